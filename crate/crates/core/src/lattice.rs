//! Chain of coupled rhythm generators with open ends.
//!
//! Phase generators follow
//! `θ̇ᵢ = ω + Σⱼ βₑ sin(θⱼ − θᵢ − bᵢⱼ)` over the one or two neighbours of `i`,
//! where `bᵢⱼ = +bₑ` toward the tail neighbour and `−bₑ` toward the head
//! neighbour, so constant lags `θᵢ₊₁ − θᵢ = bₑ` are a fixed point. The Hopf
//! variant adds a limit-cycle amplitude and is integrated in Cartesian form.
//!
//! Also here: the least-squares sinusoid fit used on simulated trajectories
//! and the heterogeneity index built from those fits.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::angle;
use crate::error::{ConfigError, LatticeError};
use crate::rng::{RunSeed, Stream};
use crate::world::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    Phase,
    Hopf,
}

/// `[lattice]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeSettings {
    pub n: usize,
    pub omega: f64,
    pub beta: f64,
    #[serde(deserialize_with = "angle::de")]
    pub bias: f64,
    pub dt: f64,
    pub duration: f64,
    pub generator: GeneratorKind,
    /// Per-edge strengths are drawn from `β (1 ± strength_spread)`.
    pub strength_spread: f64,
    /// Per-edge biases are drawn from `b (1 ± bias_spread)`.
    pub bias_spread: f64,
    /// Hopf limit-cycle radius.
    pub radius: f64,
    /// Hopf radial convergence rate, 1/s.
    pub convergence: f64,
}

impl Default for LatticeSettings {
    fn default() -> Self {
        LatticeSettings {
            n: 12,
            omega: TAU,
            beta: 4.0,
            bias: -TAU / 12.0,
            dt: 1e-3,
            duration: 100.0,
            generator: GeneratorKind::Phase,
            strength_spread: 0.0,
            bias_spread: 0.0,
            radius: 1.0,
            convergence: 10.0,
        }
    }
}

impl LatticeSettings {
    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 {
            return Err(ConfigError::invalid("lattice.n", "must be at least 2"));
        }
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(ConfigError::invalid("lattice.omega", "must be > 0"));
        }
        if !self.beta.is_finite() || !self.bias.is_finite() {
            return Err(ConfigError::invalid("lattice.beta", "must be finite"));
        }
        if !(self.dt > 0.0 && self.dt <= 0.01) {
            return Err(ConfigError::invalid("lattice.dt", "must be in (0, 0.01]"));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(ConfigError::invalid("lattice.duration", "must be positive"));
        }
        for (key, v) in [
            ("lattice.strength_spread", self.strength_spread),
            ("lattice.bias_spread", self.bias_spread),
        ] {
            if !(0.0..1.0).contains(&v) {
                return Err(ConfigError::invalid(key, "must be in [0, 1)"));
            }
        }
        if !(self.radius > 0.0) || !(self.convergence > 0.0) {
            return Err(ConfigError::invalid("lattice.radius", "radius and convergence must be positive"));
        }
        Ok(())
    }

    pub fn generator(&self) -> GeneratorParams {
        GeneratorParams { omega: self.omega, radius: self.radius, convergence: self.convergence }
    }

    /// Coupling for this run, perturbed per edge when a spread is set.
    pub fn coupling(&self, seed: u64, beta_scale: f64) -> CouplingParams {
        let mut rng = RunSeed(seed).rng(Stream::LatticeCoupling);
        let edges = self.n - 1;
        let mut beta = Vec::with_capacity(edges);
        let mut bias = Vec::with_capacity(edges);
        for _ in 0..edges {
            let ds: f64 = rng.random_range(-1.0..=1.0);
            let db: f64 = rng.random_range(-1.0..=1.0);
            beta.push(self.beta * beta_scale * (1.0 + self.strength_spread * ds));
            bias.push(self.bias * (1.0 + self.bias_spread * db));
        }
        CouplingParams { beta, bias }
    }

    /// Uniform random initial phases.
    pub fn initial_phases(&self, seed: u64) -> Vec<f64> {
        let mut rng = RunSeed(seed).rng(Stream::LatticeInit);
        (0..self.n).map(|_| rng.random_range(0.0..TAU)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorParams {
    pub omega: f64,
    pub radius: f64,
    pub convergence: f64,
}

impl GeneratorParams {
    pub fn phase(omega: f64) -> Self {
        GeneratorParams { omega, radius: 1.0, convergence: 10.0 }
    }
}

/// Per-edge coupling, edge `e` joining generators `e` and `e + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingParams {
    pub beta: Vec<f64>,
    pub bias: Vec<f64>,
}

impl CouplingParams {
    pub fn homogeneous(n: usize, beta: f64, bias: f64) -> Self {
        CouplingParams { beta: vec![beta; n.saturating_sub(1)], bias: vec![bias; n.saturating_sub(1)] }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.beta.windows(2).all(|w| w[0] == w[1]) && self.bias.windows(2).all(|w| w[0] == w[1])
    }

    fn check(&self, n: usize) -> Result<(), LatticeError> {
        if n < 2 {
            return Err(LatticeError::TooSmall(n));
        }
        if self.beta.len() != n - 1 || self.bias.len() != n - 1 {
            return Err(LatticeError::Edges { got: self.beta.len().min(self.bias.len()), expected: n - 1 });
        }
        Ok(())
    }
}

/// Phases wrapped to `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeState {
    pub x: Vec<f64>,
    pub t: f64,
}

impl LatticeState {
    pub fn new(phases: Vec<f64>) -> Self {
        LatticeState { x: phases.into_iter().map(|p| p.rem_euclid(TAU)).collect(), t: 0.0 }
    }
}

fn phase_rates(x: &[f64], omega: f64, cp: &CouplingParams, out: &mut [f64]) {
    out.fill(omega);
    for e in 0..x.len() - 1 {
        let (b, bias) = (cp.beta[e], cp.bias[e]);
        let d = x[e + 1] - x[e];
        out[e] += b * (d - bias).sin();
        out[e + 1] += b * (-d + bias).sin();
    }
}

fn check_dt(dt: f64) -> Result<(), LatticeError> {
    if dt > 0.0 && dt <= 0.01 {
        Ok(())
    } else {
        Err(LatticeError::TimeStep(dt))
    }
}

/// One RK4 step of the phase chain.
pub fn lattice_step(
    s: &LatticeState,
    gp: &GeneratorParams,
    cp: &CouplingParams,
    dt: f64,
) -> Result<LatticeState, LatticeError> {
    check_dt(dt)?;
    let n = s.x.len();
    cp.check(n)?;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    phase_rates(&s.x, gp.omega, cp, &mut k1);
    for i in 0..n {
        tmp[i] = s.x[i] + 0.5 * dt * k1[i];
    }
    phase_rates(&tmp, gp.omega, cp, &mut k2);
    for i in 0..n {
        tmp[i] = s.x[i] + 0.5 * dt * k2[i];
    }
    phase_rates(&tmp, gp.omega, cp, &mut k3);
    for i in 0..n {
        tmp[i] = s.x[i] + dt * k3[i];
    }
    phase_rates(&tmp, gp.omega, cp, &mut k4);
    let x = (0..n)
        .map(|i| (s.x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).rem_euclid(TAU))
        .collect();
    Ok(LatticeState { x, t: s.t + dt })
}

/// Hopf oscillators `(x, y)` per unit.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfState {
    pub xy: Vec<[f64; 2]>,
    pub t: f64,
}

impl HopfState {
    pub fn from_phases(phases: &[f64], radius: f64) -> Self {
        HopfState { xy: phases.iter().map(|p| [radius * p.cos(), radius * p.sin()]).collect(), t: 0.0 }
    }

    pub fn phases(&self) -> Vec<f64> {
        self.xy.iter().map(|z| z[1].atan2(z[0]).rem_euclid(TAU)).collect()
    }

    pub fn amplitudes(&self) -> Vec<f64> {
        self.xy.iter().map(|z| z[0].hypot(z[1])).collect()
    }
}

fn hopf_rates(z: &[[f64; 2]], gp: &GeneratorParams, cp: &CouplingParams, out: &mut [[f64; 2]]) {
    let r2 = gp.radius * gp.radius;
    for (o, &[x, y]) in out.iter_mut().zip(z) {
        let g = gp.convergence * (r2 - x * x - y * y);
        *o = [g * x - gp.omega * y, g * y + gp.omega * x];
    }
    let mut couple = |i: usize, j: usize, beta: f64, bias: f64| {
        let [xi, yi] = z[i];
        let [xj, yj] = z[j];
        // neighbour rotated back by the bias
        let (c, s) = (bias.cos(), bias.sin());
        let (wx, wy) = (c * xj + s * yj, -s * xj + c * yj);
        let ri2 = xi * xi + yi * yi;
        if ri2 == 0.0 {
            return;
        }
        // rate of phase i from the sine of the phase difference, scaled by |z_j|/|z_i|
        let sine = (xi * wy - yi * wx) / ri2;
        out[i][0] += -beta * sine * yi;
        out[i][1] += beta * sine * xi;
    };
    for e in 0..z.len() - 1 {
        couple(e, e + 1, cp.beta[e], cp.bias[e]);
        couple(e + 1, e, cp.beta[e], -cp.bias[e]);
    }
}

/// One RK4 step of the Hopf chain.
pub fn hopf_step(s: &HopfState, gp: &GeneratorParams, cp: &CouplingParams, dt: f64) -> Result<HopfState, LatticeError> {
    check_dt(dt)?;
    let n = s.xy.len();
    cp.check(n)?;
    let add = |a: &[[f64; 2]], k: &[[f64; 2]], h: f64| -> Vec<[f64; 2]> {
        a.iter().zip(k).map(|(p, d)| [p[0] + h * d[0], p[1] + h * d[1]]).collect()
    };
    let mut k1 = vec![[0.0; 2]; n];
    let mut k2 = vec![[0.0; 2]; n];
    let mut k3 = vec![[0.0; 2]; n];
    let mut k4 = vec![[0.0; 2]; n];
    hopf_rates(&s.xy, gp, cp, &mut k1);
    hopf_rates(&add(&s.xy, &k1, dt / 2.0), gp, cp, &mut k2);
    hopf_rates(&add(&s.xy, &k2, dt / 2.0), gp, cp, &mut k3);
    hopf_rates(&add(&s.xy, &k3, dt), gp, cp, &mut k4);
    let xy = (0..n)
        .map(|i| {
            let f = |c: usize| s.xy[i][c] + dt / 6.0 * (k1[i][c] + 2.0 * k2[i][c] + 2.0 * k3[i][c] + k4[i][c]);
            [f(0), f(1)]
        })
        .collect();
    Ok(HopfState { xy, t: s.t + dt })
}

/// Magnitude of the mean unit phasor, in `[0, 1]`.
pub fn sync_order(phases: &[f64]) -> f64 {
    if phases.is_empty() {
        return 0.0;
    }
    let (c, s) = phases.iter().fold((0.0, 0.0), |(c, s), p| (c + p.cos(), s + p.sin()));
    (c.hypot(s) / phases.len() as f64).min(1.0)
}

/// Wrapped differences `x_{i+1} − x_i` in (−π, π].
pub fn phase_lags(phases: &[f64]) -> Vec<f64> {
    phases.windows(2).map(|w| wrap_angle(w[1] - w[0])).collect()
}

/// Population standard deviation.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Result of fitting `A sin(ωt + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseFit {
    pub amplitude: f64,
    pub phase: f64,
    pub offset: f64,
    /// RMS of the fit residual.
    pub residual: f64,
}

/// Least-squares fit of `a sin(ωt) + b cos(ωt) + c` over the longest
/// whole number of periods at the end of the series. Needs at least three
/// periods of uniformly spaced samples.
pub fn extract_phase_amp(t: &[f64], y: &[f64], omega_hint: f64) -> Result<PhaseFit, LatticeError> {
    let n = t.len().min(y.len());
    let period = TAU / omega_hint;
    let dt = if n >= 2 { t[1] - t[0] } else { 0.0 };
    let needed = if dt > 0.0 { (3.0 * period / dt).ceil() as usize + 1 } else { 3 };
    let span = if n >= 2 { t[n - 1] - t[0] } else { 0.0 };
    if n < 4 || !(dt > 0.0) || span < 3.0 * period - 0.5 * dt {
        return Err(LatticeError::InsufficientSamples { needed, got: n });
    }
    let periods = ((span + 0.5 * dt) / period).floor();
    let window = periods * period;
    let count = ((window / dt).round() as usize).min(n);
    let start = n - count;
    let ts = &t[start..n];
    let ys = &y[start..n];
    let mut a = DMatrix::zeros(count, 3);
    for (r, &ti) in ts.iter().enumerate() {
        a[(r, 0)] = (omega_hint * ti).sin();
        a[(r, 1)] = (omega_hint * ti).cos();
        a[(r, 2)] = 1.0;
    }
    let b = DVector::from_column_slice(ys);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|_| LatticeError::InsufficientSamples { needed, got: n })?;
    let resid = &a * &coef - &b;
    let (sa, cb) = (coef[0], coef[1]);
    let amplitude = sa.hypot(cb);
    Ok(PhaseFit {
        amplitude,
        phase: if amplitude > 0.0 { cb.atan2(sa) } else { 0.0 },
        offset: coef[2],
        residual: (resid.norm_squared() / count as f64).sqrt(),
    })
}

/// Coefficient of variation of the fitted amplitudes (population SD / mean)
/// plus `phase_weight` times the circular standard deviation of
/// `phase_i − i·φ`. Zero for a perfect travelling wave.
pub fn heterogeneity_index(fits: &[PhaseFit], phase_step: f64, phase_weight: f64) -> f64 {
    if fits.len() < 2 {
        return 0.0;
    }
    let amps: Vec<f64> = fits.iter().map(|f| f.amplitude).collect();
    let mean = amps.iter().sum::<f64>() / amps.len() as f64;
    let cv = if mean > 0.0 { std_dev(&amps) / mean } else { 0.0 };
    let (c, s) = fits.iter().enumerate().fold((0.0, 0.0), |(c, s), (i, f)| {
        let d = f.phase - i as f64 * phase_step;
        (c + d.cos(), s + d.sin())
    });
    let r = (c.hypot(s) / fits.len() as f64).min(1.0);
    let circ = (-2.0 * r.ln()).max(0.0).sqrt();
    cv + phase_weight * circ
}

/// Weight of the phase term in [`heterogeneity_index`].
pub const PHASE_WEIGHT: f64 = 1.0;

/// Final state of one lattice run.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeRun {
    pub phases: Vec<f64>,
    /// Hopf amplitudes; empty for phase generators.
    pub amplitudes: Vec<f64>,
    pub r_final: f64,
    pub lags: Vec<f64>,
    pub lag_std: f64,
    pub coupling: CouplingParams,
}

/// Integrates the configured chain from seeded random phases.
pub fn run_lattice(ls: &LatticeSettings, seed: u64, beta_scale: f64) -> Result<LatticeRun, LatticeError> {
    let gp = ls.generator();
    let cp = ls.coupling(seed, beta_scale);
    let init = ls.initial_phases(seed);
    let steps = (ls.duration / ls.dt).round() as usize;
    let (phases, amplitudes) = match ls.generator {
        GeneratorKind::Phase => {
            let mut s = LatticeState::new(init);
            for _ in 0..steps {
                s = lattice_step(&s, &gp, &cp, ls.dt)?;
            }
            (s.x, Vec::new())
        }
        GeneratorKind::Hopf => {
            let mut s = HopfState::from_phases(&init, ls.radius);
            for _ in 0..steps {
                s = hopf_step(&s, &gp, &cp, ls.dt)?;
            }
            (s.phases(), s.amplitudes())
        }
    };
    let lags = phase_lags(&phases);
    Ok(LatticeRun {
        r_final: sync_order(&phases),
        lag_std: std_dev(&lags),
        lags,
        phases,
        amplitudes,
        coupling: cp,
    })
}

/// Sweep row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub beta_scale: f64,
    pub seed: u64,
    pub r_final: f64,
    pub lag_std: f64,
}

/// `steps` evenly spaced values from `a` to `b` inclusive.
pub fn sweep_values(a: f64, b: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..steps).map(|i| a + (b - a) * i as f64 / (steps - 1) as f64).collect(),
    }
}
