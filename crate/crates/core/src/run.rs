//! Run orchestration behind the command-line subcommands.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Method, OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::exact_case_equal::trajectory_case1;
use crate::exact_case_general::trajectory_case2;
use crate::io::{self, DiffRow};
use crate::particle_dynamics::{integrate, ComponentSource, ParticleState, Trajectory};
use crate::wave_model::{dispersion_speed, field_values, WaveParameters};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionRow {
    pub delta: f64,
    pub weber: f64,
    pub c: f64,
}

/// Wave speed over the grid `deltas x webers`, delta-major.
pub fn run_dispersion(deltas: &[f64], webers: &[f64]) -> Result<Vec<DispersionRow>> {
    if deltas.is_empty() || webers.is_empty() {
        return Err(Error::Configuration("dispersion grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(deltas.len() * webers.len());
    for &delta in deltas {
        for &weber in webers {
            rows.push(DispersionRow {
                delta,
                weber,
                c: dispersion_speed(delta, weber)?,
            });
        }
    }
    Ok(rows)
}

pub fn write_dispersion<W: Write>(rows: &[DispersionRow], format: OutputFormat, mut w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "delta,weber,c")?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{}",
                    io::format_f64(r.delta),
                    io::format_f64(r.weber),
                    io::format_f64(r.c)
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Serialization(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Field snapshot on a regular `nx x nz` grid over one wavelength and the
/// full depth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldRow {
    pub x: f64,
    pub z: f64,
    pub eta: f64,
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

pub fn run_field(wp: &WaveParameters, t: f64, nx: usize, nz: usize) -> Result<Vec<FieldRow>> {
    if nx == 0 || nz < 2 || !t.is_finite() {
        return Err(Error::Configuration(format!(
            "field grid needs nx >= 1, nz >= 2 and finite t (got {nx}, {nz}, {t})"
        )));
    }
    let mut rows = Vec::with_capacity(nx * nz);
    for i in 0..nx {
        let x = i as f64 / nx as f64;
        for j in 0..nz {
            let z = j as f64 / (nz - 1) as f64;
            let f = field_values(x, z, t, wp);
            rows.push(FieldRow {
                x,
                z,
                eta: f.eta,
                u: f.u,
                v: f.v,
                p: f.p,
            });
        }
    }
    Ok(rows)
}

pub fn write_field<W: Write>(rows: &[FieldRow], format: OutputFormat, mut w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "x,z,eta,u,v,p")?;
            for r in rows {
                let vals = [r.x, r.z, r.eta, r.u, r.v, r.p].map(io::format_f64);
                writeln!(w, "{}", vals.join(","))?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Serialization(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Result of one trajectory run.
#[derive(Debug, Clone)]
pub struct TrajectoryRun {
    pub params: WaveParameters,
    pub exact: Option<Trajectory>,
    pub numeric: Option<Trajectory>,
    /// `exact - numeric` when both were computed.
    pub diff: Option<Vec<DiffRow>>,
}

impl TrajectoryRun {
    /// Largest `|dx|` and `|dz|` in the difference table.
    pub fn max_difference(&self) -> Option<(f64, f64)> {
        self.diff.as_ref().map(|d| {
            d.iter()
                .fold((0.0f64, 0.0f64), |(a, b), r| (a.max(r.dx.abs()), b.max(r.dz.abs())))
        })
    }
}

/// Exact trajectory for the configured case.
pub fn exact_trajectory(cfg: &RunConfig, wp: &WaveParameters) -> Result<Trajectory> {
    let times = cfg.output_times();
    if wp.is_co_moving() {
        trajectory_case1(cfg.x0, cfg.z0, &times, wp)
    } else {
        trajectory_case2(cfg.x0, cfg.z0, &times, wp)
    }
}

pub fn numeric_trajectory(cfg: &RunConfig, wp: &WaveParameters) -> Result<Trajectory> {
    let times = cfg.output_times();
    let last = *times.last().expect("at least one output time");
    let full = integrate(
        ParticleState::new(cfg.x0, cfg.z0, 0.0),
        last.max(cfg.t_end),
        wp,
        &cfg.integrator(),
    )?;
    let covered = full.meta.truncated_at.unwrap_or(f64::INFINITY);
    let kept: Vec<f64> = times.into_iter().take_while(|&t| t <= covered).collect();
    full.resample(&kept)
}

fn uses_fallback(tr: &Trajectory) -> bool {
    tr.meta.x_source == ComponentSource::NumericFallback || tr.meta.z_source == ComponentSource::NumericFallback
}

/// Computes the trajectories requested by `cfg`.
///
/// Under `method = exact` a closed form that needs a numerically
/// integrated component is rejected with a regime error unless
/// `allow_fallback` is set; `method = both` always accepts it because the
/// numerical run is requested anyway.
pub fn run_trajectory(cfg: &RunConfig) -> Result<TrajectoryRun> {
    cfg.validate()?;
    let wp = cfg.wave_parameters()?;
    let exact = match cfg.method {
        Method::Numeric => None,
        Method::Exact | Method::Both => {
            let tr = exact_trajectory(cfg, &wp)?;
            if cfg.method == Method::Exact && !cfg.allow_fallback && uses_fallback(&tr) {
                let why = tr.meta.warnings.first().cloned().unwrap_or_default();
                return Err(Error::RegimeUnsupported(format!(
                    "{} has no closed form for these initial data (x: {:?}, z: {:?}); {why}. \
                     Use --method numeric, --method both or --allow-fallback",
                    tr.meta.method, tr.meta.x_source, tr.meta.z_source
                )));
            }
            Some(tr)
        }
    };
    let numeric = match cfg.method {
        Method::Exact => None,
        Method::Numeric | Method::Both => Some(numeric_trajectory(cfg, &wp)?),
    };
    let diff = match (&exact, &numeric) {
        (Some(e), Some(n)) => Some(io::difference_rows(e, n)),
        _ => None,
    };
    let run = TrajectoryRun {
        params: wp,
        exact,
        numeric,
        diff,
    };
    if let Some((dx, dz)) = run.max_difference() {
        info!("max |exact - numeric|: dx = {dx:e}, dz = {dz:e}");
    }
    Ok(run)
}

/// `<stem>.<tag>.<ext>` next to `base`.
fn sibling(base: &Path, tag: &str, ext: &str) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".into());
    base.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Writes the files of a run and returns their paths.
///
/// A single trajectory goes to `out`; with both methods the files are
/// `<stem>.exact.<ext>`, `<stem>.numeric.<ext>` and `<stem>.diff.csv`.
/// Plot data adds `<stem>[.<tag>].xy` files.
pub fn write_run(run: &TrajectoryRun, cfg: &RunConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let ext = cfg.format.extension();
    let mut written = Vec::new();
    let mut emit = |tr: &Trajectory, tag: Option<&str>| -> Result<()> {
        let path = match tag {
            Some(tag) => sibling(out, tag, ext),
            None => out.to_path_buf(),
        };
        io::serialize_to_path(tr, cfg.format, &path)?;
        written.push(path);
        if cfg.plot_data {
            let xy = match tag {
                Some(tag) => sibling(out, tag, "xy"),
                None => out.with_extension("xy"),
            };
            io::write_plot_data(tr, BufWriter::new(io::create(&xy)?))?;
            written.push(xy);
        }
        Ok(())
    };
    match (&run.exact, &run.numeric) {
        (Some(e), Some(n)) => {
            emit(e, Some("exact"))?;
            emit(n, Some("numeric"))?;
            let path = sibling(out, "diff", "csv");
            io::write_diff_csv(
                run.diff.as_deref().unwrap_or_default(),
                BufWriter::new(io::create(&path)?),
            )?;
            written.push(path);
        }
        (Some(tr), None) | (None, Some(tr)) => emit(tr, None)?,
        (None, None) => {}
    }
    Ok(written)
}

/// Writes the single trajectory of a run to `w`.
pub fn write_run_to<W: Write>(run: &TrajectoryRun, format: OutputFormat, w: W) -> Result<()> {
    match (&run.exact, &run.numeric) {
        (Some(tr), None) | (None, Some(tr)) => io::serialize(tr, format, w),
        _ => Err(Error::Configuration(
            "method = both writes several files; pass an output path".into(),
        )),
    }
}

/// One entry of a sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x0: f64,
    pub z0: f64,
    pub c0: f64,
    pub exit_code: i32,
    pub message: Option<String>,
    pub samples: usize,
    pub x_end: Option<f64>,
    pub z_end: Option<f64>,
    pub max_dx: Option<f64>,
    pub max_dz: Option<f64>,
}

/// Runs `base` for every `(x0, z0)` pair in parallel. Each run is
/// independent; rows come back in input order.
pub fn sweep(base: &RunConfig, starts: &[(f64, f64)]) -> Result<Vec<SweepRow>> {
    if starts.is_empty() {
        return Err(Error::Configuration("sweep needs at least one starting point".into()));
    }
    base.validate()?;
    let c0 = base.wave_parameters()?.c0;
    Ok(starts
        .par_iter()
        .map(|&(x0, z0)| {
            let cfg = RunConfig {
                x0,
                z0,
                out: None,
                ..base.clone()
            };
            match run_trajectory(&cfg) {
                Ok(run) => {
                    let tr = run.exact.as_ref().or(run.numeric.as_ref()).expect("a trajectory");
                    let last = tr.samples.last();
                    let md = run.max_difference();
                    SweepRow {
                        x0,
                        z0,
                        c0,
                        exit_code: 0,
                        message: tr.meta.warnings.first().cloned(),
                        samples: tr.len(),
                        x_end: last.map(|s| s.x),
                        z_end: last.map(|s| s.z),
                        max_dx: md.map(|m| m.0),
                        max_dz: md.map(|m| m.1),
                    }
                }
                Err(e) => SweepRow {
                    x0,
                    z0,
                    c0,
                    exit_code: e.exit_code(),
                    message: Some(e.to_string()),
                    samples: 0,
                    x_end: None,
                    z_end: None,
                    max_dx: None,
                    max_dz: None,
                },
            }
        })
        .collect())
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], format: OutputFormat, mut w: W) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            writeln!(w, "x0,z0,c0,exit_code,samples,x_end,z_end,max_dx,max_dz,message")?;
            let opt = |v: Option<f64>| v.map(io::format_f64).unwrap_or_default();
            for r in rows {
                let msg = r.message.as_deref().unwrap_or("").replace('"', "'");
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},\"{msg}\"",
                    io::format_f64(r.x0),
                    io::format_f64(r.z0),
                    io::format_f64(r.c0),
                    r.exit_code,
                    r.samples,
                    opt(r.x_end),
                    opt(r.z_end),
                    opt(r.max_dx),
                    opt(r.max_dz),
                )?;
            }
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Serialization(e.to_string()))?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}
