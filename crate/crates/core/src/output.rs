//! Output files: fixed-header CSV tables, JSON summaries and the run manifest.
//!
//! CSV is comma-separated with `.` decimals and LF line endings. Floats use the
//! shortest representation that round-trips, so equal runs give equal bytes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::dyn3d::LinkRow;
use crate::lattice::SweepPoint;
use crate::sim2d::TrajectoryRow;

/// Column order of each table. The serde field order of the row types must
/// match; tests pin both.
pub const TRAJECTORY_2D_HEADER: &str = "t,seg,x,y,theta";
pub const TRAJECTORY_3D_HEADER: &str = "t,link,x,y,z,qx,qy,qz,qw";
pub const SWEEP_HEADER: &str = "beta_scale,seed,r_final,lag_std";

/// Rows of one of the CSV tables.
pub trait CsvTable: Serialize {
    const HEADER: &'static str;
}

impl CsvTable for TrajectoryRow {
    const HEADER: &'static str = TRAJECTORY_2D_HEADER;
}

impl CsvTable for LinkRow {
    const HEADER: &'static str = TRAJECTORY_3D_HEADER;
}

impl CsvTable for SweepPoint {
    const HEADER: &'static str = SWEEP_HEADER;
}

pub fn write_csv<R: CsvTable, W: Write>(out: W, rows: &[R]) -> io::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(R::HEADER.split(','))?;
    for r in rows {
        w.serialize(r).map_err(io::Error::other)?;
    }
    w.flush()
}

pub fn write_csv_file<R: CsvTable>(path: &Path, rows: &[R]) -> io::Result<()> {
    let f = io::BufWriter::new(fs::File::create(path)?);
    write_csv(f, rows)
}

/// Pretty JSON with a trailing newline.
pub fn write_json_file<T: Serialize + ?Sized>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// A file consumed by a run, pinned by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn read(path: &Path) -> io::Result<(Self, Vec<u8>)> {
        let bytes = fs::read(path)?;
        Ok((InputFile { path: path.to_path_buf(), sha256: sha256_hex(&bytes) }, bytes))
    }
}

/// Written as `manifest.json` next to every output set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub args: Vec<String>,
    pub config: Option<InputFile>,
    /// Extra inputs such as a gait file.
    pub inputs: Vec<InputFile>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub version: String,
    pub files: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        write_json_file(&dir.join("manifest.json"), self)
    }
}
