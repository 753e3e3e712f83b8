//! Wasserstein balls around empirical disturbance distributions on polytopic
//! supports, their worst-case linear expectations, and discrete type-1
//! optimal-transport distances.

pub mod lp;
mod transport;

pub use transport::{assignment, w1_distance};

use serde::{Deserialize, Serialize};

use crate::{Error, Matrix, Result, Vector};
use lp::{lp_solve, LpError};

/// Ground norm of the transport cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundNorm {
    #[default]
    L1,
    Linf,
}

impl GroundNorm {
    pub fn norm(self, v: &Vector) -> f64 {
        match self {
            GroundNorm::L1 => v.lp_norm(1),
            GroundNorm::Linf => v.amax(),
        }
    }

    pub fn dual(self) -> GroundNorm {
        match self {
            GroundNorm::L1 => GroundNorm::Linf,
            GroundNorm::Linf => GroundNorm::L1,
        }
    }

    /// Matrix norm induced by this vector norm: max column sum for `L1`,
    /// max row sum for `Linf`.
    pub fn induced(self, m: &Matrix) -> f64 {
        match self {
            GroundNorm::L1 => m
                .column_iter()
                .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
            GroundNorm::Linf => m
                .row_iter()
                .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }
}

/// `{w : H w <= h}`, checked to be nonempty and bounded.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportPolytope {
    h_mat: Matrix,
    h: Vector,
}

impl SupportPolytope {
    pub fn new(h_mat: Matrix, h: Vector) -> Result<Self> {
        if h_mat.nrows() != h.len() || h_mat.ncols() == 0 {
            return Err(Error::invalid(format!(
                "support matrix {:?} does not match bound vector of length {}",
                h_mat.shape(),
                h.len()
            )));
        }
        let dim = h_mat.ncols();
        for j in 0..dim {
            for sign in [1.0, -1.0] {
                let mut c = Vector::zeros(dim);
                c[j] = sign;
                match lp_solve(&c, &h_mat, &h) {
                    Ok(_) => {}
                    Err(LpError::Infeasible { .. }) => {
                        return Err(Error::invalid("support polytope is empty"))
                    }
                    Err(LpError::Unbounded) => {
                        return Err(Error::invalid(format!(
                            "support polytope is unbounded along coordinate {j}"
                        )))
                    }
                    Err(e) => {
                        return Err(Error::Lp {
                            context: "support probe".into(),
                            source: e,
                        })
                    }
                }
            }
        }
        Ok(SupportPolytope { h_mat, h })
    }

    /// Axis-aligned box `lower <= w <= upper` as a polytope.
    pub fn from_box(lower: &Vector, upper: &Vector) -> Result<Self> {
        let d = lower.len();
        if upper.len() != d {
            return Err(Error::invalid("box bounds have different lengths"));
        }
        let mut h_mat = Matrix::zeros(2 * d, d);
        let mut h = Vector::zeros(2 * d);
        for j in 0..d {
            h_mat[(2 * j, j)] = 1.0;
            h[2 * j] = upper[j];
            h_mat[(2 * j + 1, j)] = -1.0;
            h[2 * j + 1] = -lower[j];
        }
        Self::new(h_mat, h)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.h_mat
    }

    pub fn bounds(&self) -> &Vector {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.h_mat.ncols()
    }

    pub fn contains(&self, w: &Vector, tol: f64) -> bool {
        w.len() == self.dim() && (&self.h_mat * w - &self.h).max() <= tol
    }

    /// `max_{w in support} a'w`.
    pub fn support_function(&self, a: &Vector) -> Result<f64> {
        lp_solve(&-a, &self.h_mat, &self.h)
            .map(|s| -s.value)
            .map_err(|e| Error::Lp {
                context: "support function".into(),
                source: e,
            })
    }
}

/// Uniform mixture of Dirac masses at observed disturbance samples.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    samples: Vec<Vector>,
}

/// Membership tolerance for samples in the support.
pub const SUPPORT_TOL: f64 = 1e-9;

impl EmpiricalDistribution {
    /// Samples without a support check (used when the support is the whole space).
    pub fn new(samples: Vec<Vector>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::invalid(
                "empirical distribution needs at least one sample",
            ));
        };
        let d = first.len();
        if samples.iter().any(|s| s.len() != d) {
            return Err(Error::invalid("samples have inconsistent dimensions"));
        }
        if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("samples contain non-finite values"));
        }
        Ok(EmpiricalDistribution { samples })
    }

    pub fn with_support(samples: Vec<Vector>, support: &SupportPolytope) -> Result<Self> {
        let dist = Self::new(samples)?;
        for (l, s) in dist.samples.iter().enumerate() {
            if !support.contains(s, SUPPORT_TOL) {
                return Err(Error::invalid(format!(
                    "sample {l} lies outside the support"
                )));
            }
        }
        Ok(dist)
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn mean_of(&self, a: &Vector) -> f64 {
        self.samples.iter().map(|w| a.dot(w)).sum::<f64>() / self.len() as f64
    }
}

/// Type-1 Wasserstein ball of radius `eps` around an empirical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct WassersteinBall {
    pub center: EmpiricalDistribution,
    pub eps: f64,
    pub ground_norm: GroundNorm,
}

impl WassersteinBall {
    pub fn new(center: EmpiricalDistribution, eps: f64, ground_norm: GroundNorm) -> Result<Self> {
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!(
                "ball radius must be >= 0, got {eps}"
            )));
        }
        Ok(WassersteinBall {
            center,
            eps,
            ground_norm,
        })
    }
}

/// `sup { E_Q[a'w] : W1(Q, P_hat) <= eps, supp Q in support }`.
///
/// Evaluated through the finite dual
///
/// ```text
/// inf  lambda eps + 1/M sum_l s_l
/// s.t. a'w_l + gamma_l'(h - H w_l) <= s_l
///      || H'gamma_l - a ||_* <= lambda
///      gamma_l >= 0                               l = 1..M
/// ```
///
/// with one independent `(s_l, gamma_l)` block per sample and `||.||_*` the
/// dual of the ground norm, which keeps the problem a linear program.
pub fn worst_case_expectation(
    a: &Vector,
    ball: &WassersteinBall,
    support: &SupportPolytope,
) -> Result<f64> {
    let d = support.dim();
    if a.len() != d || ball.center.dim() != d {
        return Err(Error::invalid(format!(
            "direction has {} entries, support dimension {d}, samples dimension {}",
            a.len(),
            ball.center.dim()
        )));
    }
    if a.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let (c, a_ub, b_ub) = dual_program(a, ball, support);
    match lp_solve(&c, &a_ub, &b_ub) {
        Ok(sol) => Ok(sol.value),
        Err(LpError::Unbounded) => Err(Error::invalid(
            "worst-case expectation unbounded: samples violate the support",
        )),
        Err(e) => Err(Error::Lp {
            context: "worst-case expectation".into(),
            source: e,
        }),
    }
}

/// Builds the LP in inequality form. Variable layout:
/// `[lambda, s_1..s_M, gamma_1..gamma_M, t_1..t_M]`, where the `t_l` blocks
/// (one entry per dimension) only exist for the `Linf` ground norm.
fn dual_program(
    a: &Vector,
    ball: &WassersteinBall,
    support: &SupportPolytope,
) -> (Vector, Matrix, Vector) {
    let samples = ball.center.samples();
    let m = samples.len();
    let d = a.len();
    let hm = support.matrix();
    let nh = hm.nrows();
    let linf = ball.ground_norm == GroundNorm::Linf;

    let s0 = 1;
    let g0 = s0 + m;
    let t0 = g0 + m * nh;
    let nvar = t0 + if linf { m * d } else { 0 };
    let rows_per_sample = 1 + 2 * d + nh + if linf { 1 } else { 0 };
    let nrow = m * rows_per_sample;

    let mut c = Vector::zeros(nvar);
    c[0] = ball.eps;
    for l in 0..m {
        c[s0 + l] = 1.0 / m as f64;
    }

    let mut a_ub = Matrix::zeros(nrow, nvar);
    let mut b_ub = Vector::zeros(nrow);
    let mut r = 0;
    for (l, w) in samples.iter().enumerate() {
        let gl = g0 + l * nh;
        // epigraph of the per-sample piece
        let gap = support.bounds() - hm * w;
        for k in 0..nh {
            a_ub[(r, gl + k)] = gap[k];
        }
        a_ub[(r, s0 + l)] = -1.0;
        b_ub[r] = -a.dot(w);
        r += 1;
        // dual-norm ball around H'gamma_l - a
        for j in 0..d {
            for sign in [1.0, -1.0] {
                for k in 0..nh {
                    a_ub[(r, gl + k)] = sign * hm[(k, j)];
                }
                if linf {
                    a_ub[(r, t0 + l * d + j)] = -1.0;
                } else {
                    a_ub[(r, 0)] = -1.0;
                }
                b_ub[r] = sign * a[j];
                r += 1;
            }
        }
        if linf {
            for j in 0..d {
                a_ub[(r, t0 + l * d + j)] = 1.0;
            }
            a_ub[(r, 0)] = -1.0;
            r += 1;
        }
        for k in 0..nh {
            a_ub[(r, gl + k)] = -1.0;
            r += 1;
        }
    }
    debug_assert_eq!(r, nrow);
    (c, a_ub, b_ub)
}

/// Closed form for an unconstrained support: `mean(a'w_l) + eps ||a||_*`.
pub fn worst_case_expectation_free(a: &Vector, ball: &WassersteinBall) -> f64 {
    ball.center.mean_of(a) + ball.eps * ball.ground_norm.dual().norm(a)
}
