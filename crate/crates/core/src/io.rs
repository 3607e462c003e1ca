//! Trajectory serialization: CSV, JSON and two-column plot data.
//!
//! CSV values carry 17 significant digits, enough to recover every `f64`
//! bit for bit. JSON output uses the shortest round-tripping decimal form.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particle_dynamics::{Frame, MethodTag, Trajectory, TrajectoryMeta};
use crate::wave_model::{field_values, WaveParameters, WAVENUMBER};

/// Exact CSV header of trajectory files.
pub const CSV_HEADER: &str = "t,x,z,X,Z,u,v,p";

/// Header of the pointwise difference file written for `method = both`.
pub const DIFF_HEADER: &str = "t,dx,dz,distance";

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One output row: lab and moving-frame position and the field at the
/// particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub X: f64,
    pub Z: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

impl TrajectoryRow {
    pub fn new(t: f64, x: f64, z: f64, wp: &WaveParameters) -> Self {
        let f = field_values(x, z, t, wp);
        TrajectoryRow {
            t,
            x,
            z,
            X: WAVENUMBER * (x - wp.c * t),
            Z: WAVENUMBER * wp.delta * z,
            u: f.u,
            v: f.v,
            p: f.p,
        }
    }

    pub fn values(&self) -> [f64; 8] {
        [self.t, self.x, self.z, self.X, self.Z, self.u, self.v, self.p]
    }

    fn from_values(v: [f64; 8]) -> Self {
        TrajectoryRow {
            t: v[0],
            x: v[1],
            z: v[2],
            X: v[3],
            Z: v[4],
            u: v[5],
            v: v[6],
            p: v[7],
        }
    }
}

pub fn rows_of(traj: &Trajectory) -> Vec<TrajectoryRow> {
    let wp = traj.meta.params;
    traj.to_frame(Frame::Lab)
        .samples
        .iter()
        .map(|s| TrajectoryRow::new(s.t, s.x, s.z, &wp))
        .collect()
}

/// `v` with 17 significant digits.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_line<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    let line: Vec<String> = values.iter().map(|&v| format_f64(v)).collect();
    writeln!(w, "{}", line.join(","))?;
    Ok(())
}

pub fn write_csv<W: Write>(rows: &[TrajectoryRow], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        write_line(&mut w, &r.values())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TrajectoryRow>> {
    let mut lines = BufReader::new(r).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Serialization("empty CSV".into()))?;
    if header.trim() != CSV_HEADER {
        return Err(Error::Serialization(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut vals = [0.0; 8];
        let mut n = 0;
        for (slot, field) in vals.iter_mut().zip(line.split(',')) {
            *slot = field
                .trim()
                .parse()
                .map_err(|_| Error::Serialization(format!("line {}: bad number {field:?}", i + 2)))?;
            n += 1;
        }
        if n != 8 || line.split(',').count() != 8 {
            return Err(Error::Serialization(format!("line {}: expected 8 fields", i + 2)));
        }
        rows.push(TrajectoryRow::from_values(vals));
    }
    Ok(rows)
}

/// Structured trajectory file: the CSV columns plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDocument {
    pub tool: String,
    pub version: String,
    pub method: MethodTag,
    pub params: WaveParameters,
    pub meta: TrajectoryMeta,
    pub rows: Vec<TrajectoryRow>,
}

impl TrajectoryDocument {
    pub fn new(traj: &Trajectory) -> Self {
        TrajectoryDocument {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            method: traj.meta.method,
            params: traj.meta.params,
            meta: traj.meta.clone(),
            rows: rows_of(traj),
        }
    }
}

pub fn write_json<W: Write>(doc: &TrajectoryDocument, mut w: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, doc).map_err(|e| Error::Serialization(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_json<R: Read>(r: R) -> Result<TrajectoryDocument> {
    serde_json::from_reader(r).map_err(|e| Error::Serialization(e.to_string()))
}

/// Writes `traj` to `w` in `format`.
pub fn serialize<W: Write>(traj: &Trajectory, format: crate::config::OutputFormat, w: W) -> Result<()> {
    match format {
        crate::config::OutputFormat::Csv => write_csv(&rows_of(traj), w),
        crate::config::OutputFormat::Json => write_json(&TrajectoryDocument::new(traj), w),
    }
}

/// Writes `traj` to `path`, creating parent directories.
pub fn serialize_to_path(traj: &Trajectory, format: crate::config::OutputFormat, path: &Path) -> Result<()> {
    serialize(traj, format, BufWriter::new(create(path)?))
}

/// Whitespace-separated `x z` columns with a comment header.
pub fn write_plot_data<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "# x z ({})", traj.meta.method)?;
    for s in &traj.to_frame(Frame::Lab).samples {
        writeln!(w, "{} {}", format_f64(s.x), format_f64(s.z))?;
    }
    w.flush()?;
    Ok(())
}

/// Pointwise difference of two trajectories on their common sample times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffRow {
    pub t: f64,
    pub dx: f64,
    pub dz: f64,
    pub distance: f64,
}

/// Differences `a - b` at the times both trajectories share (prefix of
/// the shorter one, as truncation only ever shortens a run).
pub fn difference_rows(a: &Trajectory, b: &Trajectory) -> Vec<DiffRow> {
    let a = a.to_frame(Frame::Lab);
    let b = b.to_frame(Frame::Lab);
    a.samples
        .iter()
        .zip(&b.samples)
        .take_while(|(p, q)| (p.t - q.t).abs() <= 1e-12 * p.t.abs().max(1.0))
        .map(|(p, q)| {
            let (dx, dz) = (p.x - q.x, p.z - q.z);
            DiffRow {
                t: p.t,
                dx,
                dz,
                distance: dx.hypot(dz),
            }
        })
        .collect()
}

pub fn write_diff_csv<W: Write>(rows: &[DiffRow], mut w: W) -> Result<()> {
    writeln!(w, "{DIFF_HEADER}")?;
    for r in rows {
        write_line(&mut w, &[r.t, r.dx, r.dz, r.distance])?;
    }
    w.flush()?;
    Ok(())
}

/// Opens `path` for writing, creating missing parent directories.
pub fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(fs::File::create(path)?)
}
