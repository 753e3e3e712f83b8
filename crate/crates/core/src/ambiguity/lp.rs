//! Dense two-phase simplex for small inequality-form linear programs
//!
//! ```text
//! min c'x  s.t.  A x <= b,  x free
//! ```
//!
//! Free variables are split into positive and negative parts, each row gets a
//! slack, and rows with a negative right-hand side get an artificial variable
//! for phase one. Pricing is Dantzig's rule, switching to Bland's rule after a
//! run of degenerate pivots so the method cannot cycle.

use thiserror::Error;

use crate::{Matrix, Vector};

/// Primal and dual feasibility tolerance.
pub const LP_TOL: f64 = 1e-8;
const PIVOT_TOL: f64 = 1e-11;
const DEGENERATE_RUN: usize = 50;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration cap of {cap} reached")]
    IterationLimit { cap: usize },
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vector,
    /// Multipliers `y >= 0` of `A x <= b`; at optimality `A'y = -c` and
    /// `-b'y = value`.
    pub duals: Vector,
    pub iterations: usize,
}

struct Tableau {
    /// `rows x (cols + 1)`, last column is the right-hand side.
    t: Vec<f64>,
    rows: usize,
    cols: usize,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

impl Tableau {
    fn width(&self) -> usize {
        self.cols + 1
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * self.width() + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, row: usize, col: usize, reduced: &mut [f64], objective: &mut f64) {
        let w = self.width();
        let p = self.at(row, col);
        for j in 0..w {
            self.t[row * w + j] /= p;
        }
        let pivot_row: Vec<f64> = self.t[row * w..(row + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == row {
                continue;
            }
            let f = self.t[i * w + col];
            if f != 0.0 {
                for (j, pv) in pivot_row.iter().enumerate() {
                    self.t[i * w + j] -= f * pv;
                }
            }
        }
        let f = reduced[col];
        if f != 0.0 {
            for j in 0..self.cols {
                reduced[j] -= f * pivot_row[j];
            }
            *objective -= f * pivot_row[self.cols];
        }
        self.basis[row] = col;
    }

    /// Runs primal simplex on the current reduced-cost row. Columns with
    /// `allowed[j] == false` never enter.
    fn optimize(
        &mut self,
        reduced: &mut [f64],
        objective: &mut f64,
        allowed: &[bool],
        cost_scale: f64,
    ) -> Result<(), LpError> {
        let dj_tol = 1e-10 * cost_scale.max(1.0);
        let mut degenerate = 0usize;
        loop {
            let bland = degenerate >= DEGENERATE_RUN;
            let mut enter = None;
            let mut best = -dj_tol;
            for j in 0..self.cols {
                if !allowed[j] || reduced[j] >= -dj_tol {
                    continue;
                }
                if bland {
                    enter = Some(j);
                    break;
                }
                if reduced[j] < best {
                    best = reduced[j];
                    enter = Some(j);
                }
            }
            let Some(col) = enter else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, col);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0);
                        if ratio < lr && !tie || tie && self.basis[i] < self.basis[li] {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if self.iterations >= self.cap {
                return Err(LpError::IterationLimit { cap: self.cap });
            }
            self.iterations += 1;
            if ratio <= 1e-14 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(row, col, reduced, objective);
        }
    }
}

/// Solve `min c'x s.t. a_ub x <= b_ub`.
pub fn lp_solve(c: &Vector, a_ub: &Matrix, b_ub: &Vector) -> Result<LpSolution, LpError> {
    let (m, n) = a_ub.shape();
    if c.len() != n || b_ub.len() != m {
        return Err(LpError::Malformed(format!(
            "objective has {} entries, constraint matrix is {m}x{n}, bounds have {}",
            c.len(),
            b_ub.len()
        )));
    }
    if c.iter()
        .chain(a_ub.iter())
        .chain(b_ub.iter())
        .any(|v| !v.is_finite())
    {
        return Err(LpError::Malformed("non-finite data".into()));
    }

    let flipped: Vec<bool> = b_ub.iter().map(|b| *b < 0.0).collect();
    let n_art = flipped.iter().filter(|f| **f).count();
    // columns: x+ (n), x- (n), slack (m), artificial (n_art)
    let slack0 = 2 * n;
    let art0 = slack0 + m;
    let cols = art0 + n_art;
    let w = cols + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut next_art = art0;
    for i in 0..m {
        let sign = if flipped[i] { -1.0 } else { 1.0 };
        for j in 0..n {
            let a = sign * a_ub[(i, j)];
            t[i * w + j] = a;
            t[i * w + n + j] = -a;
        }
        t[i * w + slack0 + i] = sign;
        t[i * w + cols] = sign * b_ub[i];
        if flipped[i] {
            t[i * w + next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = slack0 + i;
        }
    }
    let mut tab = Tableau {
        t,
        rows: m,
        cols,
        basis,
        iterations: 0,
        cap: 10 * (m + cols),
    };

    // phase one: minimize the sum of artificials
    if n_art > 0 {
        let mut reduced = vec![0.0; cols];
        let mut objective = 0.0;
        for i in 0..m {
            if flipped[i] {
                for (j, r) in reduced.iter_mut().enumerate().take(art0) {
                    *r -= tab.at(i, j);
                }
                objective -= tab.rhs(i);
            }
        }
        let allowed = vec![true; cols];
        let scale = b_ub.amax();
        tab.optimize(&mut reduced, &mut objective, &allowed, 1.0)
            .map_err(|e| match e {
                LpError::Unbounded => LpError::Malformed("phase one unbounded".into()),
                other => other,
            })?;
        let residual = -objective;
        if residual > LP_TOL * scale.max(1.0) {
            return Err(LpError::Infeasible { residual });
        }
        // drive remaining artificials out of the basis
        for i in 0..m {
            if tab.basis[i] >= art0 {
                if let Some(j) = (0..art0).find(|&j| tab.at(i, j).abs() > 1e-9) {
                    let mut scratch = vec![0.0; cols];
                    let mut obj = 0.0;
                    tab.pivot(i, j, &mut scratch, &mut obj);
                }
            }
        }
    }

    // phase two
    let cost = |j: usize| -> f64 {
        if j < n {
            c[j]
        } else if j < 2 * n {
            -c[j - n]
        } else {
            0.0
        }
    };
    let mut reduced: Vec<f64> = (0..cols).map(cost).collect();
    let mut objective = 0.0;
    for i in 0..m {
        let cb = cost(tab.basis[i]);
        if cb != 0.0 {
            for (j, r) in reduced.iter_mut().enumerate() {
                *r -= cb * tab.at(i, j);
            }
            objective -= cb * tab.rhs(i);
        }
    }
    let allowed: Vec<bool> = (0..cols).map(|j| j < art0).collect();
    tab.optimize(&mut reduced, &mut objective, &allowed, c.amax())?;

    let mut x = Vector::zeros(n);
    for i in 0..m {
        let j = tab.basis[i];
        let v = tab.rhs(i);
        if j < n {
            x[j] += v;
        } else if j < 2 * n {
            x[j - n] -= v;
        }
    }
    let duals = Vector::from_fn(m, |i, _| reduced[slack0 + i].max(0.0));
    Ok(LpSolution {
        value: c.dot(&x),
        x,
        duals,
        iterations: tab.iterations,
    })
}
