//! CSV import and export of trajectories, gains, back-offs and samples.
//!
//! Every written file starts with a header row naming each column.

use std::io::{Read, Write};

use crate::backoff::BackoffSchedule;
use crate::linearize::GainSchedule;
use crate::ocp::NominalTrajectory;
use crate::{Error, Matrix, Result, Vector};

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}

fn fmt(v: f64) -> String {
    // shortest representation that round-trips
    format!("{v:?}")
}

/// Columns `step, z1.., v1.., c1..`; the terminal row leaves `v` and `c` empty.
pub fn write_trajectory<W: Write>(out: W, traj: &NominalTrajectory) -> Result<()> {
    let nx = traj.z[0].len();
    let nu = traj.v.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend((1..=nx).map(|j| format!("z{j}")));
    header.extend((1..=nu).map(|j| format!("v{j}")));
    header.extend((1..=nu).map(|j| format!("c{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, z) in traj.z.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(z.iter().map(|&x| fmt(x)));
        match (traj.v.get(i), traj.c.get(i)) {
            (Some(v), Some(c)) => {
                row.extend(v.iter().map(|&x| fmt(x)));
                row.extend(c.iter().map(|&x| fmt(x)));
            }
            _ => row.extend(std::iter::repeat_n(String::new(), 2 * nu)),
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn read_trajectory<R: Read>(input: R, nx: usize, nu: usize) -> Result<NominalTrajectory> {
    let mut r = csv::Reader::from_reader(input);
    let (mut z, mut v, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 1 + nx + 2 * nu {
            return Err(Error::invalid(format!(
                "trajectory row {} has {} columns, expected {}",
                line + 1,
                rec.len(),
                1 + nx + 2 * nu
            )));
        }
        let field = |j: usize| parse(&rec[j], line + 1);
        z.push(Vector::from_iterator(
            nx,
            (1..=nx).map(field).collect::<Result<Vec<_>>>()?,
        ));
        if !rec[1 + nx].is_empty() {
            v.push(Vector::from_iterator(
                nu,
                (1 + nx..1 + nx + nu)
                    .map(field)
                    .collect::<Result<Vec<_>>>()?,
            ));
            c.push(Vector::from_iterator(
                nu,
                (1 + nx + nu..1 + nx + 2 * nu)
                    .map(field)
                    .collect::<Result<Vec<_>>>()?,
            ));
        }
    }
    if z.len() != v.len() + 1 {
        return Err(Error::invalid("trajectory needs exactly one terminal row"));
    }
    Ok(NominalTrajectory { z, v, c })
}

/// Columns `step, k_r_c` in row-major order of each gain.
pub fn write_gains<W: Write>(out: W, gains: &GainSchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let (nu, nx) = gains.k.first().map_or((0, 0), |k| k.shape());
    let mut header = vec!["step".to_string()];
    for r in 1..=nu {
        header.extend((1..=nx).map(|c| format!("k{r}_{c}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, k) in gains.k.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for r in 0..nu {
            row.extend((0..nx).map(|c| fmt(k[(r, c)])));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn read_gains<R: Read>(input: R, nu: usize, nx: usize) -> Result<GainSchedule> {
    let mut r = csv::Reader::from_reader(input);
    let mut k = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 1 + nu * nx {
            return Err(Error::invalid(format!(
                "gain row {} has {} columns",
                line + 1,
                rec.len()
            )));
        }
        let vals = (1..rec.len())
            .map(|j| parse(&rec[j], line + 1))
            .collect::<Result<Vec<_>>>()?;
        k.push(Matrix::from_row_slice(nu, nx, &vals));
    }
    GainSchedule::new(k)
}

/// Columns `step, beta1..`.
pub fn write_backoffs<W: Write>(out: W, beta: &BackoffSchedule) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["step".to_string()];
    header.extend((1..=beta.beta.ncols()).map(|j| format!("beta{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..beta.beta.nrows() {
        let mut row = vec![i.to_string()];
        row.extend(beta.beta.row(i).iter().map(|&x| fmt(x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::invalid(e.to_string()))
}

pub fn read_backoffs<R: Read>(input: R) -> Result<BackoffSchedule> {
    let mut r = csv::Reader::from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        rows.push(
            (1..rec.len())
                .map(|j| parse(&rec[j], line + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid("back-off table is empty or ragged"));
    }
    Ok(BackoffSchedule {
        beta: Matrix::from_fn(rows.len(), cols, |i, j| rows[i][j]),
    })
}

/// One sample per row, `dim` columns. A header row is skipped if present.
pub fn read_samples<R: Read>(input: R, dim: usize) -> Result<Vec<Vector>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        if line == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        if rec.len() != dim {
            return Err(Error::invalid(format!(
                "sample row {} has {} columns, expected {dim}",
                line + 1,
                rec.len()
            )));
        }
        let vals = (0..dim)
            .map(|j| parse(&rec[j], line + 1))
            .collect::<Result<Vec<_>>>()?;
        out.push(Vector::from_vec(vals));
    }
    Ok(out)
}

fn parse(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("row {line}: cannot parse {field:?} as a number")))
}
