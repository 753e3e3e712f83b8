//! Linearization-remainder bounds and the split of the closed-loop deviation
//! into a linear error part `e` and a remainder-driven part `eps_lin`.
//!
//! These are diagnostics; they do not enter the constraint tightening.

use crate::linearize::{GainSchedule, LtvSystem};
use crate::model::Dynamics;
use crate::{Error, Result, Vector};

/// `||[dx; du]||_inf^2 * mu_n` for every output `n`.
pub fn remainder_bound(mu: &Vector, dx: &Vector, du: &Vector) -> Vector {
    let eta = dx.amax().max(du.amax());
    mu * (eta * eta)
}

/// `f_d(x, u) - f_d(z, v) - A (x - z) - B (u - v)` with `(A, B)` the Jacobians
/// at `(z, v)`.
pub fn linearization_remainder(
    model: &dyn Dynamics,
    z: &Vector,
    v: &Vector,
    x: &Vector,
    u: &Vector,
) -> Result<Vector> {
    let (a, b) = model.jacobians(z, v)?;
    let exact = model.step(x, u)?;
    let nominal = model.step(z, v)?;
    Ok(exact - nominal - a * (x - z) - b * (u - v))
}

/// Error paths `e_0..e_N` and `eps_0..eps_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitErrors {
    pub e: Vec<Vector>,
    pub eps_lin: Vec<Vector>,
}

/// `e_{i+1} = A_cl,i e_i + w_i` and `eps_{i+1} = A_cl,i eps_i + r_i`, both
/// from zero.
pub fn split_error_rollout(
    ltv: &LtvSystem,
    gains: &GainSchedule,
    disturbances: &[Vector],
    remainders: &[Vector],
) -> Result<SplitErrors> {
    let n = ltv.horizon();
    if disturbances.len() != n || remainders.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} disturbances and remainders, got {} and {}",
            disturbances.len(),
            remainders.len()
        )));
    }
    let a_cl = gains.closed_loop(ltv)?;
    let nx = ltv.state_dim();
    let mut e = vec![Vector::zeros(nx)];
    let mut eps_lin = vec![Vector::zeros(nx)];
    for i in 0..n {
        e.push(&a_cl[i] * &e[i] + &disturbances[i]);
        eps_lin.push(&a_cl[i] * &eps_lin[i] + &remainders[i]);
    }
    Ok(SplitErrors { e, eps_lin })
}

/// `(||[e_i; K_i e_i]||_inf + ||[eps_i; K_i eps_i]||_inf)^2 * mu` for
/// `i = 0..N-1`.
pub fn error_split_bound(
    mu: &Vector,
    gains: &GainSchedule,
    split: &SplitErrors,
) -> Result<Vec<Vector>> {
    let n = gains.horizon();
    if split.e.len() < n || split.eps_lin.len() < n {
        return Err(Error::invalid(
            "error paths are shorter than the gain schedule",
        ));
    }
    Ok((0..n)
        .map(|i| {
            let k = &gains.k[i];
            let part = |x: &Vector| x.amax().max((k * x).amax());
            let s = part(&split.e[i]) + part(&split.eps_lin[i]);
            mu * (s * s)
        })
        .collect())
}
