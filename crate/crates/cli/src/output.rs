//! Artifact files: creation, CSV tables and JSON summaries.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use wdro_mpc::backoff::BackoffSchedule;
use wdro_mpc::drilqr::{DrSolution, DrStatus};
use wdro_mpc::linearize::GainSchedule;
use wdro_mpc::ocp::NominalTrajectory;
use wdro_mpc::sim::Realization;
use wdro_mpc::tube::{TubeCheck, TubeRadii};
use wdro_mpc::{io, Vector};

use crate::error::CliError;

pub const TRAJECTORY: &str = "trajectory.csv";
pub const GAINS: &str = "gains.csv";
pub const BACKOFFS: &str = "backoffs.csv";

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    let wrap = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    File::create(path).map(BufWriter::new).map_err(wrap)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    writeln!(out)
        .and_then(|_| out.flush())
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Write {
        path: path.to_path_buf(),
        source: e.into(),
    }
}

/// Write a table with `header` and `rows` to `path`.
pub fn write_table(
    path: &Path,
    header: &[String],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |j| format!("{prefix}{j}"))
}

fn cells(v: &Vector) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| fmt(*x))
}

pub fn write_plan(
    dir: &Path,
    traj: &NominalTrajectory,
    gains: &GainSchedule,
    beta: &BackoffSchedule,
) -> Result<(), CliError> {
    let path = dir.join(TRAJECTORY);
    io::write_trajectory(create(&path)?, traj)?;
    io::write_gains(create(&dir.join(GAINS))?, gains)?;
    io::write_backoffs(create(&dir.join(BACKOFFS))?, beta)?;
    Ok(())
}

fn open(path: PathBuf) -> Result<(File, PathBuf), CliError> {
    match File::open(&path) {
        Ok(f) => Ok((f, path)),
        Err(e) => Err(CliError::Artifact {
            path,
            reason: e.to_string(),
        }),
    }
}

fn artifact<T>(path: &Path, r: wdro_mpc::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Plan previously written by `solve` into `dir`.
pub fn read_plan(dir: &Path, nx: usize, nu: usize, horizon: usize) -> Result<DrSolution, CliError> {
    let (f, path) = open(dir.join(TRAJECTORY))?;
    let traj = artifact(&path, io::read_trajectory(f, nx, nu))?;
    let (f, path) = open(dir.join(GAINS))?;
    let gains = artifact(&path, io::read_gains(f, nu, nx))?;
    let (f, path) = open(dir.join(BACKOFFS))?;
    let beta = artifact(&path, io::read_backoffs(f))?;
    if traj.horizon() != horizon || gains.horizon() != horizon || beta.horizon() != horizon {
        return Err(CliError::Artifact {
            path: dir.to_path_buf(),
            reason: format!(
                "horizons {} / {} / {} do not match the configured {horizon}",
                traj.horizon(),
                gains.horizon(),
                beta.horizon()
            ),
        });
    }
    Ok(DrSolution {
        traj,
        gains,
        beta,
        status: DrStatus::Converged,
        outer_iterations: 0,
        diagnostics: Vec::new(),
    })
}

/// Columns `realization, step, x.., u.., w.., dx..`; the terminal row leaves
/// `u` and `w` empty.
pub fn write_realizations(path: &Path, reals: &[Realization]) -> Result<(), CliError> {
    let nx = reals[0].x[0].len();
    let nu = reals[0].u.first().map_or(0, |u| u.len());
    let mut header = vec!["realization".to_string(), "step".to_string()];
    header.extend(names("x", nx));
    header.extend(names("u", nu));
    header.extend(names("w", nx));
    header.extend(names("dx", nx));
    let rows = reals.iter().enumerate().flat_map(|(r, real)| {
        (0..real.x.len()).map(move |i| {
            let mut row = vec![r.to_string(), i.to_string()];
            row.extend(cells(&real.x[i]));
            match (real.u.get(i), real.w.get(i)) {
                (Some(u), Some(w)) => {
                    row.extend(cells(u));
                    row.extend(cells(w));
                }
                _ => row.extend(std::iter::repeat_n(String::new(), nu + nx)),
            }
            row.extend(cells(&real.dx[i]));
            row
        })
    });
    write_table(path, &header, rows)
}

/// Pairs `(dx_i, dx_{i+1})` per realization and step.
pub fn write_increments(
    path: &Path,
    pairs: &[(usize, usize, &Vector, &Vector)],
) -> Result<(), CliError> {
    let nx = pairs.first().map_or(0, |p| p.2.len());
    let mut header = vec!["realization".to_string(), "step".to_string()];
    header.extend(names("dx", nx));
    header.extend((1..=nx).map(|j| format!("dx{j}_next")));
    let rows = pairs.iter().map(|(r, i, a, b)| {
        let mut row = vec![r.to_string(), i.to_string()];
        row.extend(cells(a));
        row.extend(cells(b));
        row
    });
    write_table(path, &header, rows)
}

pub fn write_radii(path: &Path, radii: &TubeRadii) -> Result<(), CliError> {
    let header = ["step", "rho", "rho_product"].map(String::from);
    let rows = radii
        .rho
        .iter()
        .zip(&radii.rho_product)
        .enumerate()
        .map(|(i, (a, b))| vec![i.to_string(), fmt(*a), fmt(*b)]);
    write_table(path, &header, rows)
}

pub fn write_tube_checks(path: &Path, draws: &[Vec<TubeCheck>]) -> Result<(), CliError> {
    let header = ["draw", "step", "distance", "bound", "margin", "pass"].map(String::from);
    let rows = draws.iter().enumerate().flat_map(|(d, checks)| {
        checks.iter().map(move |c| {
            vec![
                d.to_string(),
                c.step.to_string(),
                fmt(c.distance),
                fmt(c.bound),
                fmt(c.bound - c.distance),
                c.pass.to_string(),
            ]
        })
    });
    write_table(path, &header, rows)
}

/// One row of the linearization-error diagnostic.
pub struct LinerrRow {
    pub realization: usize,
    pub step: usize,
    pub e_norm: f64,
    pub eps_lin_norm: f64,
    /// `||dx_i - e_i - eps_i||_inf`.
    pub split_gap: f64,
    pub remainder: Vector,
    pub bound: Vector,
    pub in_box: bool,
}

pub fn write_linerr(path: &Path, rows: &[LinerrRow]) -> Result<(), CliError> {
    let nx = rows.first().map_or(0, |r| r.remainder.len());
    let mut header = ["realization", "step", "e_norm", "eps_lin_norm", "split_gap"]
        .map(String::from)
        .to_vec();
    header.extend(names("r", nx));
    header.extend(names("bound", nx));
    header.push("in_box".to_string());
    let table = rows.iter().map(|r| {
        let mut row = vec![
            r.realization.to_string(),
            r.step.to_string(),
            fmt(r.e_norm),
            fmt(r.eps_lin_norm),
            fmt(r.split_gap),
        ];
        row.extend(cells(&r.remainder));
        row.extend(cells(&r.bound));
        row.push(r.in_box.to_string());
        row
    });
    write_table(path, &header, table)
}
