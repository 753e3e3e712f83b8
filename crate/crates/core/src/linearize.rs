//! LTV error system along a nominal trajectory and the closed-loop transition
//! products that carry each disturbance to each predicted step.

use crate::model::Dynamics;
use crate::ocp::NominalTrajectory;
use crate::{Error, Matrix, Result};

/// `A_i, B_i` for `i = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvSystem {
    pub a: Vec<Matrix>,
    pub b: Vec<Matrix>,
}

impl LtvSystem {
    pub fn new(a: Vec<Matrix>, b: Vec<Matrix>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::invalid(format!(
                "LTV system has {} A matrices but {} B matrices",
                a.len(),
                b.len()
            )));
        }
        Ok(LtvSystem { a, b })
    }

    /// The same `(A, B)` repeated `horizon` times.
    pub fn time_invariant(a: Matrix, b: Matrix, horizon: usize) -> Self {
        LtvSystem {
            a: vec![a; horizon],
            b: vec![b; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.a.len()
    }

    pub fn state_dim(&self) -> usize {
        self.a.first().map_or(0, |a| a.nrows())
    }

    pub fn input_dim(&self) -> usize {
        self.b.first().map_or(0, |b| b.ncols())
    }
}

/// Time-varying feedback gains `K_i` (`n_u x n_x`), `i = 0..N-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub k: Vec<Matrix>,
}

impl GainSchedule {
    pub fn new(k: Vec<Matrix>) -> Result<Self> {
        if k.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::numerical(
                "gain schedule contains non-finite entries",
            ));
        }
        Ok(GainSchedule { k })
    }

    pub fn zeros(horizon: usize, input_dim: usize, state_dim: usize) -> Self {
        GainSchedule {
            k: vec![Matrix::zeros(input_dim, state_dim); horizon],
        }
    }

    pub fn constant(gain: Matrix, horizon: usize) -> Self {
        GainSchedule {
            k: vec![gain; horizon],
        }
    }

    pub fn horizon(&self) -> usize {
        self.k.len()
    }

    /// `A_cl,i = A_i + B_i K_i` for every step.
    pub fn closed_loop(&self, ltv: &LtvSystem) -> Result<Vec<Matrix>> {
        if self.horizon() != ltv.horizon() {
            return Err(Error::invalid(format!(
                "gain schedule has length {} but LTV system has length {}",
                self.horizon(),
                ltv.horizon()
            )));
        }
        ltv.a
            .iter()
            .zip(&ltv.b)
            .zip(&self.k)
            .enumerate()
            .map(|(i, ((a, b), k))| {
                if k.shape() != (b.ncols(), a.ncols()) {
                    return Err(Error::invalid(format!(
                        "gain {i} has shape {:?}, expected {:?}",
                        k.shape(),
                        (b.ncols(), a.ncols())
                    )));
                }
                Ok(a + b * k)
            })
            .collect()
    }
}

/// Linearize `model` at every `(z_i, v_i)` of `traj`.
pub fn ltv_along(model: &dyn Dynamics, traj: &NominalTrajectory) -> Result<LtvSystem> {
    let (a, b) = traj
        .v
        .iter()
        .zip(&traj.z)
        .map(|(v, z)| model.jacobians(z, v))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .unzip();
    Ok(LtvSystem { a, b })
}

/// Lower-triangular table of `Phi(i, m) = A_cl,i-1 ... A_cl,m+1` for
/// `1 <= i <= N`, `0 <= m < i`; `Phi(i, i-1) = I`.
///
/// The disturbance entering after step `m` reaches step `i` through `Phi(i, m)`,
/// so `e_i = sum_m Phi(i, m) w_m`.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    rows: Vec<Vec<Matrix>>,
}

impl TransitionTable {
    pub fn from_closed_loop(a_cl: &[Matrix]) -> Self {
        let n = a_cl.len();
        let nx = a_cl.first().map_or(0, |a| a.nrows());
        let mut rows: Vec<Vec<Matrix>> = Vec::with_capacity(n);
        for i in 1..=n {
            // Phi(i, m) = A_cl,i-1 Phi(i-1, m) for m < i-1
            let mut row: Vec<Matrix> = match rows.last() {
                Some(prev) => prev.iter().map(|p| &a_cl[i - 1] * p).collect(),
                None => Vec::new(),
            };
            row.push(Matrix::identity(nx, nx));
            rows.push(row);
        }
        TransitionTable { rows }
    }

    pub fn new(ltv: &LtvSystem, gains: &GainSchedule) -> Result<Self> {
        Ok(Self::from_closed_loop(&gains.closed_loop(ltv)?))
    }

    pub fn horizon(&self) -> usize {
        self.rows.len()
    }

    /// `[Phi(i, 0), ..., Phi(i, i-1)]`.
    pub fn products(&self, i: usize) -> Result<&[Matrix]> {
        if i == 0 || i > self.rows.len() {
            return Err(Error::invalid(format!(
                "step {i} outside 1..={}",
                self.rows.len()
            )));
        }
        Ok(&self.rows[i - 1])
    }

    pub fn get(&self, i: usize, m: usize) -> Result<&Matrix> {
        let row = self.products(i)?;
        row.get(m)
            .ok_or_else(|| Error::invalid(format!("disturbance index {m} must be below step {i}")))
    }
}

/// `[Phi(i, 0), ..., Phi(i, i-1)]` for a single step `i`.
pub fn closed_loop_products(
    ltv: &LtvSystem,
    gains: &GainSchedule,
    i: usize,
) -> Result<Vec<Matrix>> {
    let a_cl = gains.closed_loop(ltv)?;
    if i == 0 || i > a_cl.len() {
        return Err(Error::invalid(format!(
            "step {i} outside 1..={}",
            a_cl.len()
        )));
    }
    let nx = ltv.state_dim();
    let mut out = vec![Matrix::identity(nx, nx); i];
    for m in (0..i.saturating_sub(1)).rev() {
        out[m] = &out[m + 1] * &a_cl[m + 1];
    }
    Ok(out)
}
