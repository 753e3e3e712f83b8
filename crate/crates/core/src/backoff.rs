//! Constraint back-offs from worst-case expectations propagated through the
//! closed-loop transition products.

use rayon::prelude::*;

use crate::ambiguity::{worst_case_expectation, SupportPolytope, WassersteinBall};
use crate::linearize::{GainSchedule, LtvSystem, TransitionTable};
use crate::{Error, Matrix, Result, Vector};

/// `F x <= f`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStateConstraints {
    pub f_mat: Matrix,
    pub f: Vector,
}

impl LinearStateConstraints {
    pub fn new(f_mat: Matrix, f: Vector) -> Result<Self> {
        if f_mat.nrows() == 0 || f_mat.nrows() != f.len() {
            return Err(Error::invalid(format!(
                "constraint matrix {:?} does not match bounds of length {}",
                f_mat.shape(),
                f.len()
            )));
        }
        if f_mat.iter().chain(f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("constraints must be finite"));
        }
        Ok(LinearStateConstraints { f_mat, f })
    }

    pub fn rows(&self) -> usize {
        self.f_mat.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.f_mat.ncols()
    }

    pub fn row(&self, n: usize) -> Vector {
        self.f_mat.row(n).transpose()
    }
}

/// `beta[(i, n)]` for `i = 0..=N`; row 0 is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BackoffSchedule {
    pub beta: Matrix,
}

impl BackoffSchedule {
    pub fn zeros(horizon: usize, rows: usize) -> Self {
        BackoffSchedule {
            beta: Matrix::zeros(horizon + 1, rows),
        }
    }

    pub fn horizon(&self) -> usize {
        self.beta.nrows().saturating_sub(1)
    }

    pub fn get(&self, i: usize, n: usize) -> f64 {
        self.beta[(i, n)]
    }

    /// Largest entry over the horizon (for constraint row `n`).
    pub fn max_over_steps(&self, n: usize) -> f64 {
        self.beta.column(n).max()
    }
}

/// `beta_{i,n} = sum_{m<i} wce([F]_n Phi(i, m))`.
///
/// Each summand is an independent small LP; the `(i, m)` grid is evaluated in
/// parallel and summed in index order so results do not depend on scheduling.
pub fn compute_backoffs(
    cons: &LinearStateConstraints,
    ltv: &LtvSystem,
    gains: &GainSchedule,
    ball: &WassersteinBall,
    support: &SupportPolytope,
) -> Result<BackoffSchedule> {
    let table = TransitionTable::new(ltv, gains)?;
    backoffs_from_table(cons, &table, ball, support)
}

pub fn backoffs_from_table(
    cons: &LinearStateConstraints,
    table: &TransitionTable,
    ball: &WassersteinBall,
    support: &SupportPolytope,
) -> Result<BackoffSchedule> {
    let horizon = table.horizon();
    let nf = cons.rows();
    if horizon > 0 && cons.state_dim() != table.get(1, 0)?.nrows() {
        return Err(Error::invalid(
            "constraint matrix does not match the state dimension",
        ));
    }
    if support.dim() != cons.state_dim() {
        return Err(Error::invalid(
            "support dimension does not match the state dimension",
        ));
    }
    let jobs: Vec<(usize, usize)> = (1..=horizon)
        .flat_map(|i| (0..i).map(move |m| (i, m)))
        .collect();
    let terms: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(i, m)| {
            let phi = table.get(i, m)?;
            (0..nf)
                .map(|n| {
                    let a = (cons.f_mat.row(n) * phi).transpose();
                    worst_case_expectation(&a, ball, support)
                        .map_err(|e| attach_context(e, i, n, m))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut sched = BackoffSchedule::zeros(horizon, nf);
    for (&(i, _), vals) in jobs.iter().zip(&terms) {
        for (n, v) in vals.iter().enumerate() {
            sched.beta[(i, n)] += v;
        }
    }
    Ok(sched)
}

fn attach_context(e: Error, i: usize, n: usize, m: usize) -> Error {
    let at = format!("step {i}, row {n}, disturbance {m}");
    match e {
        Error::Lp { context, source } => Error::Lp {
            context: format!("{context} ({at})"),
            source,
        },
        Error::InvalidInput(msg) => Error::InvalidInput(format!("{msg} ({at})")),
        Error::Numerical(msg) => Error::Numerical(format!("{msg} ({at})")),
        other => other,
    }
}
