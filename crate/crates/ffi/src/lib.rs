//! C ABI over the serpent toolkit.
//!
//! Every function returns a [`SerpentStatus`]; on failure the message is
//! available from [`serpent_last_error`] on the same thread. Handles are
//! opaque, created by `*_new`/`*_load` functions and released by the matching
//! `*_free`. Passing a null handle to `*_free` is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::Vector3;
use serpent::dyn3d::{Chain, ChainState, Dyn3dSim};
use serpent::error::{ConfigError, DynError};
use serpent::gait::joint_targets;
use serpent::lattice::run_lattice;
use serpent::sim2d::{run_corridor, run_random_walk, run_target_follow};
use serpent::Config;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerpentStatus {
    Ok = 0,
    NullPointer = 1,
    /// Config could not be parsed or failed validation.
    InvalidConfig = 2,
    /// Argument out of range (index, length, scenario id).
    InvalidArgument = 3,
    Io = 4,
    /// The dynamics integrator diverged.
    Blowup = 5,
    /// A bug inside the library; the handle involved should be freed.
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SerpentScenario {
    RandomWalk = 0,
    TargetFollow = 1,
    Corridor = 2,
}

/// Scenario metrics. `time_to_target` is +infinity when the target was not
/// reached; `max_lateral_extent` is only set for corridor runs (NaN otherwise).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerpentMetrics {
    pub time_to_target: f64,
    pub path_length: f64,
    pub collisions: u64,
    pub heading_change_total: f64,
    pub energy_proxy: f64,
    pub max_lateral_extent: f64,
}

/// A validated configuration.
pub struct SerpentConfig {
    inner: Config,
}

/// A running 3D dynamics simulation.
pub struct SerpentDyn3d {
    sim: Dyn3dSim,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(text).expect("nul bytes removed")));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: SerpentStatus, msg: impl Into<String>) -> SerpentStatus {
    set_error(msg);
    status
}

fn config_status(e: &ConfigError) -> SerpentStatus {
    match e {
        ConfigError::Io { .. } => SerpentStatus::Io,
        _ => SerpentStatus::InvalidConfig,
    }
}

fn dyn_status(e: &DynError) -> SerpentStatus {
    match e {
        DynError::Blowup { .. } => SerpentStatus::Blowup,
        DynError::Unstable { .. } => SerpentStatus::InvalidConfig,
        _ => SerpentStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> SerpentStatus) -> SerpentStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            fail(SerpentStatus::Internal, format!("internal error: {msg}"))
        }
    }
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, SerpentStatus> {
    if p.is_null() {
        return Err(fail(SerpentStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(SerpentStatus::InvalidArgument, "string argument is not UTF-8"))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from this thread.
#[no_mangle]
pub extern "C" fn serpent_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn serpent_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses and validates a TOML config held in `text`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_config_from_str(text: *const c_char, out: *mut *mut SerpentConfig) -> SerpentStatus {
    guard(|| {
        if out.is_null() {
            return fail(SerpentStatus::NullPointer, "out is null");
        }
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match Config::from_toml_str(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SerpentConfig { inner }));
                SerpentStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// Reads, parses and validates a config file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_config_load(path: *const c_char, out: *mut *mut SerpentConfig) -> SerpentStatus {
    guard(|| {
        if out.is_null() {
            return fail(SerpentStatus::NullPointer, "out is null");
        }
        let path = match c_str(path) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match serpent::load_config(path) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(SerpentConfig { inner }));
                SerpentStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn serpent_config_free(cfg: *mut SerpentConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Number of joints of the configured snake.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_config_joint_count(cfg: *const SerpentConfig, out: *mut usize) -> SerpentStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        *out = cfg.inner.snake.n_joints();
        SerpentStatus::Ok
    })
}

/// Clamped joint commands of the configured gait at time `t`, one per joint.
///
/// # Safety
/// `cfg` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn serpent_joint_targets(
    cfg: *const SerpentConfig,
    t: f64,
    out: *mut f64,
    len: usize,
) -> SerpentStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        let c = &cfg.inner;
        let cmds = joint_targets(&c.snake, &c.gait.horizontal, &c.gait.vertical, t);
        if len != cmds.len() {
            return fail(SerpentStatus::InvalidArgument, format!("buffer holds {len} values, need {}", cmds.len()));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, c) in dst.iter_mut().zip(&cmds) {
            *d = c.angle;
        }
        SerpentStatus::Ok
    })
}

/// Runs one planar scenario with `seed`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_sim2d_run(
    cfg: *const SerpentConfig,
    scenario: SerpentScenario,
    seed: u64,
    out: *mut SerpentMetrics,
) -> SerpentStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        let c = &cfg.inner;
        let result = match scenario {
            SerpentScenario::RandomWalk => run_random_walk(c, seed).map(|r| (r.metrics, f64::NAN)),
            SerpentScenario::TargetFollow => run_target_follow(c, seed).map(|r| (r.metrics, f64::NAN)),
            SerpentScenario::Corridor => run_corridor(c, seed).map(|r| (r.metrics.base, r.metrics.max_lateral_extent)),
        };
        match result {
            Ok((m, lateral)) => {
                *out = SerpentMetrics {
                    time_to_target: m.time_to_target,
                    path_length: m.path_length,
                    collisions: m.collisions,
                    heading_change_total: m.heading_change_total,
                    energy_proxy: m.energy_proxy,
                    max_lateral_extent: lateral,
                };
                SerpentStatus::Ok
            }
            Err(e) => fail(config_status(&e), e.to_string()),
        }
    })
}

/// Runs the configured generator chain and reports the final order parameter
/// and the standard deviation of the neighbour phase lags.
///
/// # Safety
/// `cfg` must be a live handle; `r_final` and `lag_std` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_lattice_run(
    cfg: *const SerpentConfig,
    seed: u64,
    beta_scale: f64,
    r_final: *mut f64,
    lag_std: *mut f64,
) -> SerpentStatus {
    guard(|| {
        let (Some(cfg), false, false) = (cfg.as_ref(), r_final.is_null(), lag_std.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        if !(beta_scale >= 0.0) || !beta_scale.is_finite() {
            return fail(SerpentStatus::InvalidArgument, "beta_scale must be finite and >= 0");
        }
        match run_lattice(&cfg.inner.lattice, seed, beta_scale) {
            Ok(run) => {
                *r_final = run.r_final;
                *lag_std = run.lag_std;
                SerpentStatus::Ok
            }
            Err(e) => fail(SerpentStatus::InvalidConfig, e.to_string()),
        }
    })
}

/// Straight chain at rest on the ground, head at the origin, facing +x.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_new(cfg: *const SerpentConfig, out: *mut *mut SerpentDyn3d) -> SerpentStatus {
    guard(|| {
        let (Some(cfg), false) = (cfg.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        let c = &cfg.inner;
        let chain = match Chain::from_snake(&c.snake) {
            Ok(ch) => ch,
            Err(e) => return fail(dyn_status(&e), e.to_string()),
        };
        let rest = -c.snake.link_mass * c.dyn3d.gravity / c.dyn3d.k_spring;
        let state = ChainState::straight(&chain, Vector3::new(0.0, 0.0, rest));
        match Dyn3dSim::new(chain, state, &c.dyn3d) {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(SerpentDyn3d { sim }));
                SerpentStatus::Ok
            }
            Err(e) => fail(dyn_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_free(sim: *mut SerpentDyn3d) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances one step toward the joint angle `targets` (one per joint).
///
/// # Safety
/// `sim` must be a live handle; `targets` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_step(sim: *mut SerpentDyn3d, targets: *const f64, len: usize) -> SerpentStatus {
    guard(|| {
        let Some(s) = sim.as_mut() else {
            return fail(SerpentStatus::NullPointer, "sim is null");
        };
        if targets.is_null() && len > 0 {
            return fail(SerpentStatus::NullPointer, "targets is null");
        }
        let t = if len == 0 { &[][..] } else { std::slice::from_raw_parts(targets, len) };
        match s.sim.step(t) {
            Ok(()) => SerpentStatus::Ok,
            Err(e) => fail(dyn_status(&e), e.to_string()),
        }
    })
}

/// Simulated time, seconds.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_time(sim: *const SerpentDyn3d, out: *mut f64) -> SerpentStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        *out = s.sim.state.t;
        SerpentStatus::Ok
    })
}

/// Total mechanical energy with the servo springs measured against `targets`
/// (`len` may be 0 to leave them out).
///
/// # Safety
/// `sim` must be a live handle; `targets` must point to `len` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_energy(
    sim: *const SerpentDyn3d,
    targets: *const f64,
    len: usize,
    out: *mut f64,
) -> SerpentStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), out.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        let t = if len == 0 {
            None
        } else if targets.is_null() {
            return fail(SerpentStatus::NullPointer, "targets is null");
        } else if len != s.sim.chain.n_joints() {
            return fail(SerpentStatus::InvalidArgument, format!("expected {} targets", s.sim.chain.n_joints()));
        } else {
            Some(std::slice::from_raw_parts(targets, len))
        };
        *out = s.sim.energy(t);
        SerpentStatus::Ok
    })
}

/// World position of link `index` (0 = head) written to `xyz[3]`.
///
/// # Safety
/// `sim` must be a live handle; `xyz` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn serpent_dyn3d_link_position(sim: *const SerpentDyn3d, index: usize, xyz: *mut f64) -> SerpentStatus {
    guard(|| {
        let (Some(s), false) = (sim.as_ref(), xyz.is_null()) else {
            return fail(SerpentStatus::NullPointer, "null argument");
        };
        let links = s.sim.link_states();
        let Some(l) = links.get(index) else {
            return fail(SerpentStatus::InvalidArgument, format!("link {index} out of range 0..{}", links.len()));
        };
        let dst = std::slice::from_raw_parts_mut(xyz, 3);
        dst.copy_from_slice(l.position.as_slice());
        SerpentStatus::Ok
    })
}
