//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit
//! on any failure. Runtime limits are checked against wall-clock time.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_6, TAU};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use serpent::adapt::{combine, steering_offset, target_heading_offset, SteeringParams};
use serpent::config::{AxisLayout, NamedLayout};
use serpent::dyn3d::{simulate_gait_3d, Chain, ChainState, Dyn3dSim};
use serpent::gait::{joint_targets, master_sample, DelayLine};
use serpent::lattice::run_lattice;
use serpent::sim2d::{run_corridor, run_random_walk, run_target_follow};
use serpent::{load_config, Config, GaitParams, SnakeConfig, WorldModel};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn fixture(name: &str) -> Config {
    load_config(configs().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_gait_equivalence() -> Outcome {
    let p = GaitParams::new(0.3, TAU, -TAU / 12.0, 0.05);
    let joints = 12;
    // sample period that divides the per-link delay exactly
    let delay = (-p.phase_shift).rem_euclid(TAU) / p.omega;
    let dt = delay / 100.0;
    let mut line = DelayLine::new(&p, joints, dt).unwrap();
    let period = TAU / p.omega;
    let warm = (period / dt).round() as usize;
    let total = warm + (10.0 * period / dt).round() as usize;
    let mut worst = 0.0f64;
    for k in 0..=total {
        let t = k as f64 * dt;
        let out = line.step(master_sample(&p, t)).to_vec();
        if k < warm {
            continue;
        }
        for (j, y) in out.iter().enumerate() {
            let i = (j + 1) as f64;
            let oracle = p.amplitude * (p.omega * t + (i - 1.0) * p.phase_shift).sin() + p.offset;
            worst = worst.max((y - oracle).abs());
        }
    }
    check(worst < 1e-9, format!("max |delay line - closed form| = {worst:.3e} over 10 periods, 12 joints"))
}

fn c2_joint_limit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let sp = SteeringParams::default();
    for draw in 0..100_000u32 {
        let n_links = rng.random_range(2..=30);
        let mut snake = SnakeConfig::with_links(n_links);
        if draw % 2 == 1 {
            snake.joint_axes = AxisLayout::Named(NamedLayout::Planar);
        }
        let g = || GaitParams {
            amplitude: 0.0,
            omega: 1.0,
            phase_shift: 0.0,
            offset: 0.0,
            phase_offset: 0.0,
        };
        let mut h = g();
        let mut v = g();
        for p in [&mut h, &mut v] {
            p.amplitude = rng.random_range(0.0..1.5);
            p.omega = rng.random_range(0.1..20.0);
            p.phase_shift = rng.random_range(-TAU..TAU);
            p.offset = rng.random_range(-1.0..1.0);
            p.phase_offset = rng.random_range(-TAU..TAU);
        }
        let t = rng.random_range(0.0..1000.0);
        for c in joint_targets(&snake, &h, &v, t) {
            worst = worst.max(c.angle.abs());
        }
        // adaptive path: offsets from the steering laws, amplitude within the limit
        let a = rng.random_range(0.0..FRAC_PI_6);
        let d: f64 = rng.random_range(0.0..3.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let obs = steering_offset(d, sign, &sp).unwrap();
        let tgt = target_heading_offset(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0), &sp);
        let ups = combine(obs, tgt, d, 0.5, a, FRAC_PI_6);
        let adapted = GaitParams { amplitude: a, offset: ups, ..h };
        for c in joint_targets(&snake, &adapted, &v, t) {
            worst = worst.max(c.angle.abs());
        }
    }
    check(worst <= FRAC_PI_6, format!("max |command| = {worst:.17} (limit {FRAC_PI_6:.17}) over 1e5 draws"))
}

fn c3_scenario_superiority() -> Outcome {
    let cfg = fixture("fig3.cfg");
    let runs: Vec<_> = (0..50u64)
        .into_par_iter()
        .map(|seed| {
            (
                run_random_walk(&cfg, seed).unwrap().metrics,
                run_target_follow(&cfg, seed).unwrap().metrics,
            )
        })
        .collect();
    let rw = runs.iter().filter(|r| r.0.reached()).count();
    let tf = runs.iter().filter(|r| r.1.reached()).count();
    let collisions: u64 = runs.iter().map(|r| r.1.collisions).sum();
    let mutual: Vec<_> = runs.iter().filter(|r| r.0.reached() && r.1.reached()).collect();
    let mut t_rw: Vec<f64> = mutual.iter().map(|r| r.0.time_to_target).collect();
    let mut t_tf: Vec<f64> = mutual.iter().map(|r| r.1.time_to_target).collect();
    let (m_rw, m_tf) = if mutual.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (median(&mut t_rw), median(&mut t_tf))
    };
    check(
        tf > rw && !mutual.is_empty() && m_tf < m_rw && collisions == 0,
        format!(
            "reached: target {tf}/50 vs random {rw}/50; median time over {} mutual: {m_tf:.2} s vs {m_rw:.2} s; target-follow collisions {collisions}",
            mutual.len()
        ),
    )
}

fn c4_amplitude_shaping() -> Outcome {
    let cfg = fixture("corridor.cfg");
    let l = cfg.snake.link_length;
    let b = cfg.world.as_ref().expect("corridor world").bounds;
    let extents: Vec<f64> = [8.0, 6.0, 4.0]
        .iter()
        .map(|w| {
            let mut c = cfg.clone();
            c.world = Some(WorldModel::corridor(w * l, b[0], b[2]));
            run_corridor(&c, c.seed).unwrap().metrics.max_lateral_extent
        })
        .collect();
    check(
        extents[0] > extents[1] && extents[1] > extents[2],
        format!("max_lateral_extent 8L/6L/4L = {:.6e} / {:.6e} / {:.6e} m", extents[0], extents[1], extents[2]),
    )
}

fn c5_contact_equilibrium() -> Outcome {
    let cfg = Config::default();
    let s = &cfg.dyn3d;
    let m = cfg.snake.link_mass;
    let chain = Chain::new(1, cfg.snake.link_length, m, cfg.snake.body_half_width, &[]).unwrap();
    let state = ChainState::straight(&chain, Vector3::new(0.0, 0.0, 0.05));
    let mut sim = Dyn3dSim::new(chain, state, s).unwrap();
    let steps = (2.0 / s.dt).round() as usize;
    for _ in 0..steps {
        sim.step(&[]).unwrap();
    }
    let z = sim.state.base_position.z;
    let vz = sim.state.velocity[2];
    let dz = (z + m * s.gravity / s.k_spring).abs();
    check(dz < 1e-4 && vz.abs() < 1e-6, format!("after 2 s: |p_z + mg/k| = {dz:.3e} m, |v_z| = {:.3e} m/s", vz.abs()))
}

fn c6_anisotropic_propulsion() -> Outcome {
    let cfg = fixture("dyn3d.cfg");
    let h = cfg.gait.horizontal;
    let duration = 10.0 * h.period();
    let run = |mu_t: f64, mu_n: f64| {
        let mut c = cfg.clone();
        c.dyn3d.mu_t = mu_t;
        c.dyn3d.mu_n = mu_n;
        simulate_gait_3d(&c, &h, &c.gait.vertical, duration).unwrap().summary.forward_displacement
    };
    let (aniso, iso) = rayon::join(|| run(0.1, 0.5), || run(0.5, 0.5));
    check(
        aniso > 0.0 && aniso > iso,
        format!("forward displacement over 10 periods: (0.1, 0.5) {aniso:.4} m, (0.5, 0.5) {iso:.4} m"),
    )
}

fn c7_passive_dissipation() -> Outcome {
    let mut cfg = Config::default();
    cfg.snake = SnakeConfig::with_links(13);
    cfg.dyn3d.kp = 0.0;
    cfg.dyn3d.kd = 0.0;
    let chain = Chain::from_snake(&cfg.snake).unwrap();
    let joints = chain.n_joints();
    let state = ChainState::straight(&chain, Vector3::new(0.0, 0.0, 0.02));
    let mut sim = Dyn3dSim::new(chain, state, &cfg.dyn3d).unwrap();
    let zeros = vec![0.0; joints];
    let mut contact = false;
    let mut prev = sim.energy(None);
    let mut worst = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for _ in 0..(0.5 / cfg.dyn3d.dt) as usize {
        sim.step(&zeros).unwrap();
        let e = sim.energy(None);
        if contact {
            worst = worst.max(e - prev);
            checked += 1;
        }
        contact |= sim.link_states().iter().any(|l| l.position.z < 0.0);
        prev = e;
    }
    check(
        checked > 0 && worst <= 1e-9,
        format!("largest per-step energy increase after contact {worst:.3e} J over {checked} steps"),
    )
}

fn c8_heterogeneity() -> Outcome {
    let cfg = fixture("fig9a.cfg");
    let run = simulate_gait_3d(&cfg, &cfg.gait.horizontal, &cfg.gait.vertical, cfg.dyn3d.duration).unwrap();
    let s = &run.summary;
    let amps: Vec<f64> = s.link_fits.iter().map(|f| f.fit.amplitude).collect();
    let mut rel = 0.0f64;
    for i in 0..amps.len() {
        for j in i + 1..amps.len() {
            rel = rel.max((amps[i] - amps[j]).abs() / amps[i].max(amps[j]));
        }
    }
    check(
        amps.len() == 3 && rel > 0.01 && s.heterogeneity_index > 0.0,
        format!(
            "head/middle/tail amplitudes {:?} m, max pairwise relative difference {rel:.3}, heterogeneity_index {:.4}",
            amps.iter().map(|a| format!("{a:.5}")).collect::<Vec<_>>(),
            s.heterogeneity_index
        ),
    )
}

fn c9_lattice_locking() -> Outcome {
    let homo = fixture("lattice_homogeneous.cfg");
    let hetero = fixture("lattice_heterogeneous.cfg");
    assert_eq!(homo.lattice.n, 12);
    let h = run_lattice(&homo.lattice, homo.seed, 1.0).unwrap();
    let x = run_lattice(&hetero.lattice, hetero.seed, 1.0).unwrap();
    let bias_ok = h.lags.iter().all(|l| (l - homo.lattice.bias).abs() < 1e-6);
    check(
        h.lag_std < 1e-6 && bias_ok && x.lag_std > 10.0 * h.lag_std && x.lag_std > 10.0 * 1e-6,
        format!("lag std homogeneous {:.3e} rad, heterogeneous {:.3e} rad", h.lag_std, x.lag_std),
    )
}

fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn c10_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_serpent");
    let cfg = |n: &str| configs().join(n).to_string_lossy().into_owned();
    let runs: Vec<(&str, Vec<String>, i32)> = vec![
        ("target", vec!["sim2d".into(), "--config".into(), cfg("fig3.cfg"), "--scenario".into(), "target".into(), "--seed".into(), "0..50".into()], 0),
        ("random", vec!["sim2d".into(), "--config".into(), cfg("fig3.cfg"), "--scenario".into(), "random".into(), "--seed".into(), "0..50".into()], 3),
        ("dyn3d", vec!["dyn3d".into(), "--gait".into(), cfg("dyn3d.cfg")], 0),
        ("homogeneous", vec!["lattice".into(), "--config".into(), cfg("lattice_homogeneous.cfg"), "--sweep".into(), "beta_scale=0.5:1.5:3".into(), "--seed".into(), "0..3".into()], 0),
        ("heterogeneous", vec!["lattice".into(), "--config".into(), cfg("lattice_heterogeneous.cfg"), "--sweep".into(), "beta_scale=0.5:1.5:3".into(), "--seed".into(), "0..3".into()], 0),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    let mut files = 0;
    for (name, args, expect) in &runs {
        let out = tmp.path().join(name);
        let mut trees = Vec::new();
        for jobs in ["4", "4", "1"] {
            let _ = std::fs::remove_dir_all(&out);
            let status = Command::new(bin)
                .args(args)
                .args(["--jobs", jobs, "--out"])
                .arg(&out)
                .env_remove("SERPENT_OUT")
                .output()
                .unwrap();
            if status.status.code() != Some(*expect) {
                failures.push(format!("{name}: exit {:?}, expected {expect}", status.status.code()));
            }
            trees.push(read_tree(&out));
        }
        // manifests record the job count among their arguments
        let mut threads = trees.clone();
        for t in &mut threads {
            t.retain(|k, _| k.file_name() != Some(std::ffi::OsStr::new("manifest.json")));
        }
        if threads[0] != threads[2] {
            failures.push(format!("{name}: outputs depend on the worker count"));
        }
        files += trees[0].len();
        if trees[0].is_empty() || trees[0] != trees[1] {
            failures.push(format!("{name}: outputs differ between reruns"));
        }
    }
    check(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{files} output files byte-identical across reruns; results identical with 1 and 4 worker threads")
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    type Criterion = (u32, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        (1, "gait equivalence", Duration::from_secs(1), c1_gait_equivalence),
        (2, "joint-limit safety", Duration::from_secs(5), c2_joint_limit),
        (3, "scenario superiority", Duration::from_secs(60), c3_scenario_superiority),
        (4, "amplitude shaping", Duration::from_secs(30), c4_amplitude_shaping),
        (5, "contact equilibrium", Duration::from_secs(5), c5_contact_equilibrium),
        (6, "anisotropic propulsion", Duration::from_secs(120), c6_anisotropic_propulsion),
        (7, "passive dissipation", Duration::from_secs(30), c7_passive_dissipation),
        (8, "heterogeneity reproduction", Duration::from_secs(120), c8_heterogeneity),
        (9, "lattice phase-locking", Duration::from_secs(10), c9_lattice_locking),
        (10, "determinism", Duration::from_secs(600), c10_determinism),
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, limit, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            check(false, format!("panicked: {msg}"))
        });
        let took = start.elapsed();
        let in_time = took <= limit;
        let ok = outcome.ok && in_time;
        if !ok {
            failed += 1;
        }
        let timing = if in_time {
            format!("{:.2} s", took.as_secs_f64())
        } else {
            format!("{:.2} s, over the {} s limit", took.as_secs_f64(), limit.as_secs())
        };
        println!("[{}] {id:>2} {name}: {} ({timing})", if ok { "PASS" } else { "FAIL" }, outcome.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
