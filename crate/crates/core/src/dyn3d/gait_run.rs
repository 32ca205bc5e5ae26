//! Gait-driven runs of the 3D chain and their summary.

use nalgebra::Vector3;
use serde::Serialize;

use super::{Chain, ChainState, Dyn3dSim};
use crate::config::{Config, GaitParams, JointAxis};
use crate::error::DynError;
use crate::gait::joint_targets;
use crate::lattice::{extract_phase_amp, heterogeneity_index, PhaseFit, PHASE_WEIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkRow {
    pub t: f64,
    pub link: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub qx: f64,
    pub qy: f64,
    pub qz: f64,
    pub qw: f64,
}

/// Sinusoid fit of one link observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkFit {
    pub link: usize,
    /// `"lateral"` (y relative to the centre of mass) or `"vertical"` (z).
    pub observable: &'static str,
    #[serde(flatten)]
    pub fit: PhaseFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dyn3dSummary {
    pub duration: f64,
    pub steps: usize,
    /// Centre-of-mass displacement.
    pub net_displacement: [f64; 3],
    /// Centre-of-mass displacement along the initial heading (+x).
    pub forward_displacement: f64,
    pub head_displacement: [f64; 3],
    /// Head, middle and tail fits, empty when the run is shorter than three periods.
    pub link_fits: Vec<LinkFit>,
    /// Fits of the realized angles of the actuated joint axis.
    pub joint_fits: Vec<PhaseFit>,
    pub heterogeneity_index: f64,
    pub max_penetration: f64,
    pub max_newton_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitRun3d {
    pub rows: Vec<LinkRow>,
    pub summary: Dyn3dSummary,
}

fn com(pos: &[Vector3<f64>]) -> Vector3<f64> {
    pos.iter().sum::<Vector3<f64>>() / pos.len() as f64
}

/// Drives the chain with the gait from rest, lying straight along +x at its
/// contact equilibrium height.
pub fn simulate_gait_3d(cfg: &Config, h: &GaitParams, v: &GaitParams, duration: f64) -> Result<GaitRun3d, DynError> {
    let ds = &cfg.dyn3d;
    let snake = &cfg.snake;
    let chain = Chain::from_snake(snake)?;
    let n = chain.n_links;
    let rest = -snake.link_mass * ds.gravity / ds.k_spring;
    let state = ChainState::straight(&chain, Vector3::new(0.0, 0.0, rest));
    let mut sim = Dyn3dSim::new(chain, state, ds)?;
    let steps = (duration / ds.dt).round() as usize;

    // the actuated axis drives the joint-angle fits
    let horizontal_active = h.amplitude > 0.0 || v.amplitude == 0.0;
    let fit_axis = if horizontal_active { JointAxis::Horizontal } else { JointAxis::Vertical };
    let axes = snake.axes();
    let fit_joints: Vec<usize> = (0..axes.len()).filter(|&j| axes[j] == fit_axis).collect();
    let fit_gait = if horizontal_active { h } else { v };
    let tracked = [0, n / 2, n - 1];

    let mut rows = Vec::new();
    let mut times = Vec::new();
    let mut lateral: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut vertical: Vec<Vec<f64>> = vec![Vec::new(); 3];
    let mut angles: Vec<Vec<f64>> = vec![Vec::new(); fit_joints.len()];
    let mut max_pen = 0.0f64;
    let mut max_iter = 0usize;

    let first = sim.link_states();
    let start_com = com(&first.iter().map(|l| l.position).collect::<Vec<_>>());
    let start_head = first[0].position;

    let mut sample = |sim: &Dyn3dSim, rows: &mut Vec<LinkRow>| {
        let links = sim.link_states();
        let t = sim.state.t;
        for (i, l) in links.iter().enumerate() {
            let q = l.orientation.coords;
            rows.push(LinkRow {
                t,
                link: i,
                x: l.position.x,
                y: l.position.y,
                z: l.position.z,
                qx: q.x,
                qy: q.y,
                qz: q.z,
                qw: q.w,
            });
        }
        let c = com(&links.iter().map(|l| l.position).collect::<Vec<_>>());
        times.push(t);
        for (k, &i) in tracked.iter().enumerate() {
            lateral[k].push(links[i].position.y - c.y);
            vertical[k].push(links[i].position.z);
        }
        for (k, &j) in fit_joints.iter().enumerate() {
            angles[k].push(sim.state.joint_angles[j]);
        }
    };

    sample(&sim, &mut rows);
    for k in 0..steps {
        let t_next = (k + 1) as f64 * ds.dt;
        let targets: Vec<f64> = joint_targets(snake, h, v, t_next).iter().map(|c| c.angle).collect();
        sim.step(&targets)?;
        max_iter = max_iter.max(sim.newton_iterations());
        if (k + 1) % ds.record_every == 0 {
            sample(&sim, &mut rows);
            for r in rows.iter().rev().take(n) {
                max_pen = max_pen.max(-r.z);
            }
        }
    }

    let last = sim.link_states();
    let end_com = com(&last.iter().map(|l| l.position).collect::<Vec<_>>());
    let net = end_com - start_com;
    let head = last[0].position - start_head;

    let window = ds.fit_periods * fit_gait.period();
    let from = times.partition_point(|&t| t < times.last().copied().unwrap_or(0.0) - window - 1e-9);
    let ts = &times[from..];
    let mut link_fits = Vec::new();
    let mut joint_fits = Vec::new();
    let obs = if horizontal_active { ("lateral", &lateral) } else { ("vertical", &vertical) };
    for (k, &i) in tracked.iter().enumerate() {
        if let Ok(fit) = extract_phase_amp(ts, &obs.1[k][from..], fit_gait.omega) {
            link_fits.push(LinkFit { link: i, observable: obs.0, fit });
        }
    }
    for series in &angles {
        if let Ok(fit) = extract_phase_amp(ts, &series[from..], fit_gait.omega) {
            joint_fits.push(fit);
        }
    }
    let index = if joint_fits.len() == fit_joints.len() {
        heterogeneity_index(&joint_fits, fit_gait.phase_shift, PHASE_WEIGHT)
    } else {
        0.0
    };

    Ok(GaitRun3d {
        rows,
        summary: Dyn3dSummary {
            duration: sim.state.t,
            steps,
            net_displacement: [net.x, net.y, net.z],
            forward_displacement: net.x,
            head_displacement: [head.x, head.y, head.z],
            link_fits,
            joint_fits,
            heterogeneity_index: index,
            max_penetration: max_pen,
            max_newton_iterations: max_iter,
        },
    })
}
