//! Backward Riccati recursion over an LTV system.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::linearize::{GainSchedule, LtvSystem};
use crate::model::Dynamics;
use crate::{Error, Matrix, Result, Vector};

/// Quadratic stage and terminal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    pub q: Matrix,
    pub r: Matrix,
    pub qf: Matrix,
}

const SYM_TOL: f64 = 1e-9;

impl CostWeights {
    pub fn new(q: Matrix, r: Matrix, qf: Matrix) -> Result<Self> {
        let w = CostWeights { q, r, qf };
        w.validate()?;
        Ok(w)
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.q.nrows();
        if !self.q.is_square() || !self.r.is_square() || self.qf.shape() != (nx, nx) {
            return Err(Error::invalid(
                "Q, R and Qf must be square with Qf shaped like Q",
            ));
        }
        check_symmetric_psd("Q", &self.q, false)?;
        check_symmetric_psd("Qf", &self.qf, false)?;
        check_symmetric_psd("R", &self.r, true)?;
        Ok(())
    }
}

fn check_symmetric_psd(name: &str, m: &Matrix, strict: bool) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{name} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    if (m - m.transpose()).amax() > SYM_TOL * scale {
        return Err(Error::invalid(format!("{name} is not symmetric")));
    }
    let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
    if strict && min_eig <= 0.0 {
        return Err(Error::invalid(format!("{name} is not positive definite")));
    }
    if min_eig < -SYM_TOL * scale {
        return Err(Error::invalid(format!(
            "{name} is not positive semidefinite"
        )));
    }
    Ok(())
}

/// Gains plus the cost-to-go matrices `P_0..P_N`.
#[derive(Debug, Clone)]
pub struct RiccatiSweep {
    pub gains: GainSchedule,
    pub cost_to_go: Vec<Matrix>,
}

/// Backward recursion from `P_N = Qf`:
/// `K_i = -(R + B'PB)^-1 B'PA`, `P_i = Q + K'RK + (A+BK)'P(A+BK)`.
/// `K` carries the minus sign so the policy reads `u = K x + c`.
pub fn riccati_sweep(ltv: &LtvSystem, w: &CostWeights) -> Result<RiccatiSweep> {
    w.validate()?;
    let n = ltv.horizon();
    if n == 0 {
        return Err(Error::invalid(
            "Riccati recursion needs a horizon of at least 1",
        ));
    }
    if ltv.state_dim() != w.state_dim() || ltv.input_dim() != w.input_dim() {
        return Err(Error::invalid("weights do not match LTV system dimensions"));
    }
    let mut p = w.qf.clone();
    let mut cost_to_go = vec![p.clone()];
    let mut gains = Vec::with_capacity(n);
    for i in (0..n).rev() {
        let (a, b) = (&ltv.a[i], &ltv.b[i]);
        let bt_p = b.transpose() * &p;
        let s = &w.r + &bt_p * b;
        let rhs = -(&bt_p * a);
        let k = solve_spd(&s, &rhs).map_err(|e| match e {
            Error::Numerical(msg) => Error::numerical(format!("Riccati step {i}: {msg}")),
            other => other,
        })?;
        let a_cl = a + b * &k;
        let next = &w.q + k.transpose() * &w.r * &k + a_cl.transpose() * &p * &a_cl;
        p = (&next + next.transpose()) * 0.5;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!("cost-to-go diverged at step {i}")));
        }
        gains.push(k);
        cost_to_go.push(p.clone());
    }
    gains.reverse();
    cost_to_go.reverse();
    Ok(RiccatiSweep {
        gains: GainSchedule::new(gains)?,
        cost_to_go,
    })
}

pub fn riccati_gains(ltv: &LtvSystem, w: &CostWeights) -> Result<GainSchedule> {
    Ok(riccati_sweep(ltv, w)?.gains)
}

/// Solve `S X = rhs` for symmetric `S`: Cholesky first, pivoted LU if that
/// fails, singular beyond `1e-12` relative is an error.
pub(crate) fn solve_spd(s: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    if let Some(ch) = Cholesky::new(s.clone()) {
        let diag_min = ch.l_dirty().diagonal().min();
        if diag_min * diag_min > 1e-12 * s.amax().max(f64::MIN_POSITIVE) {
            return Ok(ch.solve(rhs));
        }
    }
    let lu = s.clone().full_piv_lu();
    let u_diag = lu.u().diagonal().abs();
    if u_diag.min() <= 1e-12 * u_diag.max().max(f64::MIN_POSITIVE) {
        return Err(Error::numerical("R + B'PB is singular"));
    }
    lu.solve(rhs)
        .ok_or_else(|| Error::numerical("R + B'PB is singular"))
}

/// Stationary gain of the linearization at `(z, v)`, obtained as `K_0` of a
/// long time-invariant recursion.
pub fn stationary_gain(
    model: &dyn Dynamics,
    z: &Vector,
    v: &Vector,
    w: &CostWeights,
    horizon: usize,
) -> Result<Matrix> {
    let (a, b) = model.jacobians(z, v)?;
    let ltv = LtvSystem::time_invariant(a, b, horizon);
    Ok(riccati_gains(&ltv, w)?.k.swap_remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn no_actuation_gives_zero_gains() {
        let ltv = LtvSystem::time_invariant(
            Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            Matrix::zeros(2, 1),
            20,
        );
        let w =
            CostWeights::new(Matrix::identity(2, 2), scalar(1.0), Matrix::identity(2, 2)).unwrap();
        let g = riccati_gains(&ltv, &w).unwrap();
        assert!(g.k.iter().all(|k| k.amax() == 0.0));
    }

    #[test]
    fn scalar_gain_matches_fixpoint() {
        // oracle: iterate the scalar recursion until P stops moving
        let (a, b, q, r) = (1.1f64, 1.0f64, 1.0f64, 1.0f64);
        let mut p = q;
        loop {
            let k = -(b * p * a) / (r + b * p * b);
            let next = q + k * r * k + (a + b * k) * p * (a + b * k);
            if (next - p).abs() < 1e-12 {
                p = next;
                break;
            }
            p = next;
        }
        let k_star = -(b * p * a) / (r + b * p * b);
        let ltv = LtvSystem::time_invariant(scalar(a), scalar(b), 200);
        let w = CostWeights::new(scalar(q), scalar(r), scalar(q)).unwrap();
        let g = riccati_gains(&ltv, &w).unwrap();
        assert!((g.k[0][(0, 0)] - k_star).abs() < 1e-10);
    }

    #[test]
    fn cost_to_go_stays_psd() {
        let ltv = LtvSystem::time_invariant(
            Matrix::from_row_slice(2, 2, &[1.2, 0.3, -0.4, 0.95]),
            Matrix::from_row_slice(2, 1, &[0.0, 0.2]),
            80,
        );
        let w = CostWeights::new(
            Matrix::from_diagonal(&Vector::from_vec(vec![10.0, 0.0])),
            scalar(0.1),
            Matrix::zeros(2, 2),
        )
        .unwrap();
        let sweep = riccati_sweep(&ltv, &w).unwrap();
        assert_eq!(sweep.cost_to_go.len(), 81);
        for p in &sweep.cost_to_go {
            assert_eq!(*p, p.transpose());
            assert!(SymmetricEigen::new(p.clone()).eigenvalues.min() >= -1e-9);
        }
    }

    #[test]
    fn rejects_invalid_weights() {
        let bad_r = CostWeights::new(Matrix::identity(2, 2), scalar(0.0), Matrix::identity(2, 2));
        assert!(matches!(bad_r, Err(Error::InvalidInput(_))));
        let asym = CostWeights::new(
            Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]),
            scalar(1.0),
            Matrix::identity(2, 2),
        );
        assert!(asym.is_err());
        let indefinite = CostWeights::new(
            Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            scalar(1.0),
            Matrix::identity(2, 2),
        );
        assert!(indefinite.is_err());
    }

    #[test]
    fn empty_horizon_rejected() {
        let w = CostWeights::new(scalar(1.0), scalar(1.0), scalar(1.0)).unwrap();
        let ltv = LtvSystem::new(vec![], vec![]).unwrap();
        assert!(riccati_gains(&ltv, &w).is_err());
    }
}
