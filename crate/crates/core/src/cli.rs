//! The `serpent` command line: scenario runs, 3D dynamics runs, lattice
//! sweeps and paired scenario comparison.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 step budget
//! exhausted before the target was reached, 4 integrator blow-up.
//! Progress goes to stdout as one JSON object per line; messages go to stderr.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::Config;
use crate::dyn3d::simulate_gait_3d;
use crate::error::{ConfigError, DynError, LatticeError};
use crate::lattice::{run_lattice, sweep_values, SweepPoint};
use crate::output::{write_csv_file, write_json_file, InputFile, RunManifest};
use crate::sim2d::{run_corridor, run_random_walk, run_target_follow, TrajectoryRow};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_BLOWUP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "serpent", version, about = "Snake robot locomotion simulator")]
pub struct Cli {
    /// Worker threads for multi-seed runs and sweep points.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: Option<u16>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Planar scenario runs.
    Sim2d(Sim2dArgs),
    /// 3D contact dynamics driven by a gait.
    Dyn3d(Dyn3dArgs),
    /// Coupled generator chain, optionally swept over a coupling scale.
    Lattice(LatticeArgs),
    /// Paired comparison of two multi-seed sim2d output directories.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Scenario {
    Random,
    Target,
    Corridor,
}

impl Scenario {
    fn name(self) -> &'static str {
        match self {
            Scenario::Random => "random",
            Scenario::Target => "target",
            Scenario::Corridor => "corridor",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Sim2dArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub scenario: Scenario,
    /// Seed `N` or half-open range `A..B`; repeatable. Defaults to the config seed.
    #[arg(long = "seed", value_parser = parse_seeds)]
    pub seeds: Vec<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct Dyn3dArgs {
    /// Base config; the gait file is used alone when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config-format file whose `[gait]` tables drive the joints.
    #[arg(long)]
    pub gait: PathBuf,
    /// Simulated seconds; defaults to `dyn3d.duration`.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct LatticeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `beta_scale=A:B:STEPS`, inclusive, A <= B.
    #[arg(long, value_parser = parse_sweep)]
    pub sweep: Option<Sweep>,
    #[arg(long = "seed", value_parser = parse_seeds)]
    pub seeds: Vec<Vec<u64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct CompareArgs {
    /// Baseline output directory (e.g. random walk).
    pub baseline: PathBuf,
    /// Candidate output directory (e.g. target following).
    pub candidate: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        sweep_values(self.from, self.to, self.steps)
    }
}

pub fn parse_sweep(text: &str) -> Result<Sweep, String> {
    let range = text
        .strip_prefix("beta_scale=")
        .ok_or_else(|| format!("sweep `{text}` must look like beta_scale=A:B:STEPS"))?;
    let parts: Vec<&str> = range.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("sweep range `{range}` needs three fields A:B:STEPS"));
    };
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{s}` is not finite"))
        }
    };
    let (from, to) = (num(a)?, num(b)?);
    let steps: usize = n.trim().parse().map_err(|_| format!("step count `{n}` is not a whole number"))?;
    if steps == 0 {
        return Err("step count must be at least 1".into());
    }
    if from > to {
        return Err(format!("sweep range is reversed: {from} > {to}"));
    }
    if from < 0.0 {
        return Err("beta_scale must be >= 0".into());
    }
    Ok(Sweep { from, to, steps })
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>, String> {
    if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| format!("bad seed `{a}`"))?;
        let b: u64 = b.trim().parse().map_err(|_| format!("bad seed `{b}`"))?;
        if a >= b {
            return Err(format!("seed range {a}..{b} is empty"));
        }
        Ok((a..b).collect())
    } else {
        text.trim().parse().map(|s| vec![s]).map_err(|_| format!("bad seed `{text}`"))
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) | CliError::Io { .. } => EXIT_IO,
            CliError::Dyn(DynError::Blowup { .. }) => EXIT_BLOWUP,
            CliError::Config(_) | CliError::Invalid(_) | CliError::Dyn(_) | CliError::Lattice(_) => EXIT_INVALID,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Io { context, source }
}

/// Everything a command needs besides its own arguments.
#[derive(Debug, Clone, Default)]
pub struct Context {
    /// Root for relative and default output directories (`SERPENT_OUT`).
    pub out_root: Option<PathBuf>,
    /// Arguments after the program name, recorded in the manifest.
    pub args: Vec<String>,
    pub jobs: Option<usize>,
}

impl Context {
    fn out_dir(&self, out: Option<&Path>, default: &str) -> PathBuf {
        match (out, &self.out_root) {
            (Some(p), Some(root)) if p.is_relative() => root.join(p),
            (Some(p), _) => p.to_path_buf(),
            (None, Some(root)) => root.join(default),
            (None, None) => Path::new("out").join(default),
        }
    }

    fn parallel<T: Send, R: Send>(&self, items: Vec<T>, f: impl Fn(T) -> R + Sync + Send) -> Vec<R> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs.unwrap_or(0))
            .build()
            .expect("thread pool");
        pool.install(|| items.into_par_iter().map(f).collect())
    }

    fn manifest(&self, command: &str, config: Option<InputFile>, seeds: Vec<u64>, out: &Path) -> RunManifest {
        RunManifest {
            command: command.into(),
            args: self.args.clone(),
            config,
            inputs: Vec::new(),
            seeds,
            out_dir: out.to_path_buf(),
            version: env!("CARGO_PKG_VERSION").into(),
            files: Vec::new(),
        }
    }
}

fn progress(value: Value) {
    println!("{value}");
}

fn read_config(path: &Path) -> Result<(Config, InputFile), CliError> {
    let (input, bytes) = InputFile::read(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    let text = String::from_utf8(bytes).map_err(|_| ConfigError::Parse(format!("{} is not UTF-8", path.display())))?;
    Ok((Config::from_toml_str(&text)?, input))
}

fn make_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(io_err(format!("cannot create {}", dir.display())))
}

fn seed_list(given: &[Vec<u64>], fallback: u64) -> Vec<u64> {
    let seeds: Vec<u64> = given.iter().flatten().copied().collect();
    if seeds.is_empty() {
        vec![fallback]
    } else {
        seeds
    }
}

/// Where the per-seed files of a sim2d run live.
pub fn seed_dir(out: &Path, seeds: &[u64], seed: u64) -> PathBuf {
    if seeds.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("seed-{seed}"))
    }
}

struct Sim2dOutput {
    seed: u64,
    trajectory: Vec<TrajectoryRow>,
    metrics: Value,
    reached: Option<bool>,
}

pub fn cmd_sim2d(args: &Sim2dArgs, ctx: &Context) -> Result<i32, CliError> {
    let (cfg, input) = read_config(&args.config)?;
    match args.scenario {
        Scenario::Corridor => {
            cfg.require_world()?;
        }
        _ => {
            cfg.require_target_world()?;
        }
    }
    let seeds = seed_list(&args.seeds, cfg.seed);
    let out = ctx.out_dir(args.out.as_deref(), "sim2d");
    let scenario = args.scenario;
    let runs = ctx.parallel(seeds.clone(), |seed| -> Result<Sim2dOutput, ConfigError> {
        Ok(match scenario {
            Scenario::Random => {
                let r = run_random_walk(&cfg, seed)?;
                Sim2dOutput { seed, reached: Some(r.metrics.reached()), metrics: json!(r.metrics), trajectory: r.trajectory }
            }
            Scenario::Target => {
                let r = run_target_follow(&cfg, seed)?;
                Sim2dOutput { seed, reached: Some(r.metrics.reached()), metrics: json!(r.metrics), trajectory: r.trajectory }
            }
            Scenario::Corridor => {
                let r = run_corridor(&cfg, seed)?;
                Sim2dOutput { seed, reached: None, metrics: json!(r.metrics), trajectory: r.trajectory }
            }
        })
    });

    let mut exhausted = Vec::new();
    let mut top = ctx.manifest("sim2d", Some(input.clone()), seeds.clone(), &out);
    make_dir(&out)?;
    for run in runs {
        let run = run?;
        let dir = seed_dir(&out, &seeds, run.seed);
        make_dir(&dir)?;
        write_csv_file(&dir.join("trajectory.csv"), &run.trajectory).map_err(io_err("writing trajectory.csv"))?;
        write_json_file(&dir.join("metrics.json"), &run.metrics).map_err(io_err("writing metrics.json"))?;
        if seeds.len() > 1 {
            let mut m = ctx.manifest("sim2d", Some(input.clone()), vec![run.seed], &dir);
            m.files = vec!["trajectory.csv".into(), "metrics.json".into()];
            m.write(&dir).map_err(io_err("writing manifest.json"))?;
            top.files.push(format!("seed-{}", run.seed));
        }
        if run.reached == Some(false) {
            exhausted.push(run.seed);
        }
        progress(json!({
            "command": "sim2d",
            "scenario": scenario.name(),
            "seed": run.seed,
            "reached": run.reached,
        }));
    }
    if seeds.len() == 1 {
        top.files = vec!["trajectory.csv".into(), "metrics.json".into()];
    }
    top.write(&out).map_err(io_err("writing manifest.json"))?;
    if exhausted.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("step budget exhausted before reaching the target for seed(s) {exhausted:?}");
        Ok(EXIT_BUDGET)
    }
}

pub fn cmd_dyn3d(args: &Dyn3dArgs, ctx: &Context) -> Result<i32, CliError> {
    let (gait_cfg, gait_input) = read_config(&args.gait)?;
    let (cfg, config_input) = match &args.config {
        Some(path) => {
            let (mut cfg, input) = read_config(path)?;
            cfg.gait = gait_cfg.gait;
            cfg.validate()?;
            (cfg, Some(input))
        }
        None => (gait_cfg, None),
    };
    let duration = args.duration.unwrap_or(cfg.dyn3d.duration);
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(CliError::Invalid(format!("--duration must be a positive number of seconds, got {duration}")));
    }
    let out = ctx.out_dir(args.out.as_deref(), "dyn3d");
    let run = simulate_gait_3d(&cfg, &cfg.gait.horizontal, &cfg.gait.vertical, duration)?;
    make_dir(&out)?;
    write_csv_file(&out.join("trajectory.csv"), &run.rows).map_err(io_err("writing trajectory.csv"))?;
    write_json_file(&out.join("summary.json"), &run.summary).map_err(io_err("writing summary.json"))?;
    let mut m = ctx.manifest("dyn3d", config_input, vec![cfg.seed], &out);
    m.inputs.push(gait_input);
    m.files = vec!["trajectory.csv".into(), "summary.json".into()];
    m.write(&out).map_err(io_err("writing manifest.json"))?;
    progress(json!({
        "command": "dyn3d",
        "duration": run.summary.duration,
        "steps": run.summary.steps,
        "forward_displacement": run.summary.forward_displacement,
    }));
    Ok(EXIT_OK)
}

pub fn cmd_lattice(args: &LatticeArgs, ctx: &Context) -> Result<i32, CliError> {
    let (cfg, input) = match &args.config {
        Some(path) => {
            let (cfg, input) = read_config(path)?;
            (cfg, Some(input))
        }
        None => (Config::default(), None),
    };
    let sweep = args.sweep.unwrap_or(Sweep { from: 1.0, to: 1.0, steps: 1 });
    let seeds = seed_list(&args.seeds, cfg.seed);
    let out = ctx.out_dir(args.out.as_deref(), "lattice");
    let jobs: Vec<(f64, u64)> = sweep
        .values()
        .into_iter()
        .flat_map(|b| seeds.iter().map(move |&s| (b, s)))
        .collect();
    let ls = &cfg.lattice;
    let points = ctx.parallel(jobs, |(beta_scale, seed)| {
        run_lattice(ls, seed, beta_scale).map(|r| SweepPoint { beta_scale, seed, r_final: r.r_final, lag_std: r.lag_std })
    });
    let points = points.into_iter().collect::<Result<Vec<_>, _>>()?;
    make_dir(&out)?;
    write_csv_file(&out.join("sweep.csv"), &points).map_err(io_err("writing sweep.csv"))?;
    let mut m = ctx.manifest("lattice", input, seeds, &out);
    m.files = vec!["sweep.csv".into()];
    m.write(&out).map_err(io_err("writing manifest.json"))?;
    for p in &points {
        progress(json!({ "command": "lattice", "beta_scale": p.beta_scale, "seed": p.seed }));
    }
    Ok(EXIT_OK)
}

/// Paired statistics of two scenario batches over their common seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub seeds: Vec<u64>,
    pub baseline_reached: usize,
    pub candidate_reached: usize,
    /// Seeds where both runs reached the target.
    pub mutual: usize,
    pub baseline_median_time: Option<f64>,
    pub candidate_median_time: Option<f64>,
    pub baseline_collisions: u64,
    pub candidate_collisions: u64,
    pub baseline_median_heading_change: Option<f64>,
    pub candidate_median_heading_change: Option<f64>,
}

/// Median of a non-empty slice, `None` when empty.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Metrics fields the comparison needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedMetrics {
    pub time_to_target: f64,
    pub collisions: u64,
    pub heading_change_total: f64,
}

impl PairedMetrics {
    fn from_json(v: &Value) -> Option<Self> {
        Some(PairedMetrics {
            time_to_target: match &v["time_to_target"] {
                Value::Null => f64::INFINITY,
                t => t.as_f64()?,
            },
            collisions: v["collisions"].as_u64()?,
            heading_change_total: v["heading_change_total"].as_f64()?,
        })
    }
}

pub fn compare(seeds: &[u64], baseline: &[PairedMetrics], candidate: &[PairedMetrics]) -> Comparison {
    let reached = |m: &PairedMetrics| m.time_to_target.is_finite();
    let both: Vec<(f64, f64)> = baseline
        .iter()
        .zip(candidate)
        .filter(|(a, b)| reached(a) && reached(b))
        .map(|(a, b)| (a.time_to_target, b.time_to_target))
        .collect();
    let col = |ms: &[PairedMetrics]| ms.iter().map(|m| m.collisions).sum();
    let hc = |ms: &[PairedMetrics]| median(&ms.iter().map(|m| m.heading_change_total).collect::<Vec<_>>());
    Comparison {
        seeds: seeds.to_vec(),
        baseline_reached: baseline.iter().filter(|m| reached(m)).count(),
        candidate_reached: candidate.iter().filter(|m| reached(m)).count(),
        mutual: both.len(),
        baseline_median_time: median(&both.iter().map(|p| p.0).collect::<Vec<_>>()),
        candidate_median_time: median(&both.iter().map(|p| p.1).collect::<Vec<_>>()),
        baseline_collisions: col(baseline),
        candidate_collisions: col(candidate),
        baseline_median_heading_change: hc(baseline),
        candidate_median_heading_change: hc(candidate),
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(format!("cannot read {}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn load_batch(dir: &Path) -> Result<(Vec<u64>, Vec<(u64, PairedMetrics)>), CliError> {
    let manifest = read_json(&dir.join("manifest.json"))?;
    if manifest["command"] != "sim2d" {
        return Err(CliError::Invalid(format!("{} is not a sim2d output directory", dir.display())));
    }
    let seeds: Vec<u64> = manifest["seeds"]
        .as_array()
        .map(|a| a.iter().filter_map(Value::as_u64).collect())
        .unwrap_or_default();
    let mut out = Vec::new();
    for &s in &seeds {
        let path = seed_dir(dir, &seeds, s).join("metrics.json");
        let m = PairedMetrics::from_json(&read_json(&path)?)
            .ok_or_else(|| CliError::Invalid(format!("{} lacks scenario metrics", path.display())))?;
        out.push((s, m));
    }
    Ok((seeds, out))
}

pub fn cmd_compare(args: &CompareArgs, ctx: &Context) -> Result<i32, CliError> {
    let (_, a) = load_batch(&args.baseline)?;
    let (_, b) = load_batch(&args.candidate)?;
    let mut seeds = Vec::new();
    let mut base = Vec::new();
    let mut cand = Vec::new();
    for (s, ma) in &a {
        if let Some((_, mb)) = b.iter().find(|(sb, _)| sb == s) {
            seeds.push(*s);
            base.push(*ma);
            cand.push(*mb);
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Invalid("the two directories share no seeds".into()));
    }
    let cmp = compare(&seeds, &base, &cand);
    let out = ctx.out_dir(args.out.as_deref(), "compare");
    make_dir(&out)?;
    write_json_file(&out.join("comparison.json"), &cmp).map_err(io_err("writing comparison.json"))?;
    let mut m = ctx.manifest("compare", None, seeds, &out);
    for dir in [&args.baseline, &args.candidate] {
        let (input, _) = InputFile::read(&dir.join("manifest.json")).map_err(io_err("reading manifest"))?;
        m.inputs.push(input);
    }
    m.files = vec!["comparison.json".into()];
    m.write(&out).map_err(io_err("writing manifest.json"))?;
    progress(json!({ "command": "compare", "pairs": cmp.seeds.len(), "mutual": cmp.mutual }));
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli, ctx: &Context) -> Result<i32, CliError> {
    match &cli.command {
        Command::Sim2d(a) => cmd_sim2d(a, ctx),
        Command::Dyn3d(a) => cmd_dyn3d(a, ctx),
        Command::Lattice(a) => cmd_lattice(a, ctx),
        Command::Compare(a) => cmd_compare(a, ctx),
    }
}

/// Parses `args` (program name first), runs, reports errors on stderr and
/// returns the exit code.
pub fn main_with<I, T>(args: I, out_root: Option<PathBuf>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let ctx = Context {
        out_root,
        args: args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect(),
        jobs: cli.jobs.map(usize::from),
    };
    match run(&cli, &ctx) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
