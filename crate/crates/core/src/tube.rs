//! Wasserstein reachable-set radii of the closed-loop error distributions and
//! their Monte-Carlo validation by exact optimal transport.

use serde::Serialize;

use crate::ambiguity::{w1_distance, GroundNorm};
use crate::linearize::{GainSchedule, LtvSystem, TransitionTable};
use crate::{Error, Matrix, Result, Vector};

/// Per-step radii `rho_0..rho_N` of the error tube.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeRadii {
    /// `eps * sum_m ||Phi(i, m)||^p`.
    pub rho: Vec<f64>,
    /// `eps * sum_m prod_j ||A_cl,j||^p`, never smaller than `rho`.
    pub rho_product: Vec<f64>,
    pub p: f64,
    pub norm: GroundNorm,
}

pub fn tube_radii(
    ltv: &LtvSystem,
    gains: &GainSchedule,
    eps: f64,
    p: f64,
    norm: GroundNorm,
) -> Result<TubeRadii> {
    let a_cl = gains.closed_loop(ltv)?;
    tube_radii_from_closed_loop(&a_cl, eps, p, norm)
}

pub fn tube_radii_from_closed_loop(
    a_cl: &[Matrix],
    eps: f64,
    p: f64,
    norm: GroundNorm,
) -> Result<TubeRadii> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("radius must be >= 0, got {eps}")));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("order must be >= 1, got {p}")));
    }
    let table = TransitionTable::from_closed_loop(a_cl);
    let n = a_cl.len();
    let factor: Vec<f64> = a_cl.iter().map(|a| norm.induced(a).powf(p)).collect();

    let mut rho = vec![0.0; n + 1];
    let mut rho_product = vec![0.0; n + 1];
    for i in 1..=n {
        let phis = table.products(i)?;
        rho[i] = eps
            * phis
                .iter()
                .map(|phi| norm.induced(phi).powf(p))
                .sum::<f64>();
        // prod_{j=m+1}^{i-1} accumulated from m = i-1 downwards
        let mut prod = 1.0;
        let mut sum = 0.0;
        for m in (0..i).rev() {
            if m + 1 < i {
                prod *= factor[m + 1];
            }
            sum += prod;
        }
        rho_product[i] = eps * sum;
    }
    Ok(TubeRadii {
        rho,
        rho_product,
        p,
        norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum InvariantRadius {
    Finite(f64),
    /// `||A_cl|| >= 1` in the chosen norm; carries the norm.
    Divergent(f64),
}

/// `eps / (1 - ||A_cl||^p)` when the geometric series converges.
pub fn invariant_radius(a_cl: &Matrix, eps: f64, p: f64, norm: GroundNorm) -> InvariantRadius {
    let q = norm.induced(a_cl);
    let qp = q.powf(p);
    if qp < 1.0 {
        InvariantRadius::Finite(eps / (1.0 - qp))
    } else {
        InvariantRadius::Divergent(q)
    }
}

/// Series certificate through the first power `A_cl^k` (`k <= max_power`)
/// with `||A_cl^k||^p < 1`:
///
/// ```text
/// sum_m ||A^m||^p <= (sum_{j<k} ||A^j||^p) / (1 - ||A^k||^p)
/// ```
///
/// Returns the radius and `k`, or the norm of `A_cl^max_power` if no power
/// qualifies.
pub fn invariant_radius_multistep(
    a_cl: &Matrix,
    eps: f64,
    p: f64,
    norm: GroundNorm,
    max_power: usize,
) -> (InvariantRadius, usize) {
    let mut power = Matrix::identity(a_cl.nrows(), a_cl.ncols());
    let mut head = 0.0;
    for k in 1..=max_power.max(1) {
        head += norm.induced(&power).powf(p);
        power = a_cl * power;
        let qk = norm.induced(&power).powf(p);
        if qk < 1.0 {
            return (InvariantRadius::Finite(eps * head / (1.0 - qk)), k);
        }
    }
    (InvariantRadius::Divergent(norm.induced(&power)), max_power)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeCheck {
    pub step: usize,
    pub distance: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Absolute slack allowed when comparing a distance with its bound.
pub const TUBE_SLACK: f64 = 1e-9;

/// Compare, step by step, the W1 distance between realized and nominal error
/// sample sets with the tube radius.
pub fn validate_tube(
    nominal: &[Vec<Vector>],
    realized: &[Vec<Vector>],
    radii: &TubeRadii,
) -> Result<Vec<TubeCheck>> {
    if nominal.len() != realized.len() || nominal.len() > radii.rho.len() {
        return Err(Error::invalid(format!(
            "{} nominal steps, {} realized steps, {} radii",
            nominal.len(),
            realized.len(),
            radii.rho.len()
        )));
    }
    if radii.p != 1.0 {
        return Err(Error::invalid(
            "tube validation uses the type-1 distance; order must be 1",
        ));
    }
    nominal
        .iter()
        .zip(realized)
        .enumerate()
        .map(|(i, (a, b))| {
            let distance = w1_distance(b, a, radii.norm)?;
            let bound = radii.rho[i];
            Ok(TubeCheck {
                step: i,
                distance,
                bound,
                pass: distance <= bound + TUBE_SLACK,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn zero_radius() {
        let r =
            tube_radii_from_closed_loop(&vec![scalar(2.0); 4], 0.0, 1.0, GroundNorm::L1).unwrap();
        assert!(r.rho.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_step_memory() {
        let r =
            tube_radii_from_closed_loop(&vec![Matrix::zeros(2, 2); 5], 0.1, 1.0, GroundNorm::Linf)
                .unwrap();
        assert_eq!(r.rho[0], 0.0);
        assert!(r.rho[1..].iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn scalar_two_step() {
        let r = tube_radii_from_closed_loop(&[scalar(0.3), scalar(-0.7)], 0.2, 1.0, GroundNorm::L1)
            .unwrap();
        assert!((r.rho[2] - 0.2 * 1.7).abs() < 1e-15);
        assert_eq!(r.rho, r.rho_product);
    }

    #[test]
    fn invariant_series() {
        assert_eq!(
            invariant_radius(&Matrix::zeros(2, 2), 0.3, 1.0, GroundNorm::L1),
            InvariantRadius::Finite(0.3)
        );
        assert_eq!(
            invariant_radius(&scalar(0.5), 0.1, 1.0, GroundNorm::L1),
            InvariantRadius::Finite(0.2)
        );
        assert!(matches!(
            invariant_radius(&scalar(1.0), 0.1, 1.0, GroundNorm::L1),
            InvariantRadius::Divergent(_)
        ));
    }

    #[test]
    fn bad_arguments() {
        assert!(tube_radii_from_closed_loop(&[scalar(1.0)], -1.0, 1.0, GroundNorm::L1).is_err());
        assert!(tube_radii_from_closed_loop(&[scalar(1.0)], 1.0, 0.5, GroundNorm::L1).is_err());
        let r = tube_radii_from_closed_loop(&[scalar(1.0)], 1.0, 1.0, GroundNorm::L1).unwrap();
        let a = vec![vec![Vector::zeros(1)]; 3];
        assert!(validate_tube(&a, &a, &r).is_err());
    }
}
