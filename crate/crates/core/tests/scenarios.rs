use std::path::Path;

use rayon::prelude::*;
use serpent::sim2d::{run_corridor, run_random_walk, run_target_follow};
use serpent::{load_config, Config};

fn fixture(name: &str) -> Config {
    load_config(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)).unwrap()
}

#[test]
fn target_following_never_collides() {
    for name in ["fig3.cfg", "wall.cfg", "open.cfg"] {
        let cfg = fixture(name);
        let bad: Vec<_> = (0..12u64)
            .into_par_iter()
            .map(|s| (s, run_target_follow(&cfg, s).unwrap().metrics))
            .filter(|(_, m)| m.collisions > 0 || !m.reached())
            .collect();
        assert!(bad.is_empty(), "{name}: {bad:?}");
    }
}

#[test]
fn wall_detour_reaches_target_behind_it() {
    let cfg = fixture("wall.cfg");
    let run = run_target_follow(&cfg, 3).unwrap();
    assert!(run.metrics.reached());
    let target = cfg.world.as_ref().unwrap().target.unwrap();
    let dist = |x: f64, y: f64| (x - target.center[0]).hypot(y - target.center[1]);
    let start = &cfg.sim2d.start;
    // the straight line to the target is blocked, so the path is longer than it
    assert!(run.metrics.path_length > dist(start[0], start[1]) + 0.2, "{}", run.metrics.path_length);
}

#[test]
fn open_floor_path_is_nearly_straight() {
    let cfg = fixture("open.cfg");
    let run = run_target_follow(&cfg, 0).unwrap();
    let target = cfg.world.as_ref().unwrap().target.unwrap();
    let s = cfg.sim2d.start;
    let direct = (target.center[0] - s[0]).hypot(target.center[1] - s[1]) - target.radius;
    assert!(run.metrics.reached());
    assert!(run.metrics.path_length < 1.5 * direct, "{} vs {direct}", run.metrics.path_length);
}

#[test]
fn runs_are_seed_deterministic() {
    let cfg = fixture("fig3.cfg");
    let a = run_random_walk(&cfg, 11).unwrap();
    let b = run_random_walk(&cfg, 11).unwrap();
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.trajectory, b.trajectory);
}

#[test]
fn corridor_run_stays_between_walls() {
    let cfg = fixture("corridor.cfg");
    let run = run_corridor(&cfg, 0).unwrap();
    assert_eq!(run.metrics.base.collisions, 0);
    assert!(run.metrics.max_lateral_extent > 0.0);
}
