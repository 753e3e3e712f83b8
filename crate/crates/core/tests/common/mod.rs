#![allow(dead_code)]

use wdro_mpc::ambiguity::{EmpiricalDistribution, GroundNorm, SupportPolytope, WassersteinBall};
use wdro_mpc::backoff::LinearStateConstraints;
use wdro_mpc::drilqr::DrProblem;
use wdro_mpc::model::{BoxSet, DiscreteModel, MassSpring};
use wdro_mpc::riccati::CostWeights;
use wdro_mpc::sim::DisturbanceSampler;
use wdro_mpc::{Matrix, Vector};

pub const HORIZON: usize = 140;
pub const EPS: f64 = 0.03;
pub const SAMPLES: usize = 5;
pub const SAMPLE_SEED: u64 = 1;
pub const ROLLOUT_SEED: u64 = 2;
pub const FIXED_GAIN: [f64; 2] = [-7.97, -7.16];

pub fn scalar(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

pub fn diag(v: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_column_slice(v))
}

/// Mass-spring setup with the case-study weights, constraint and disturbance law.
pub struct CaseStudy {
    pub model: DiscreteModel<MassSpring>,
    pub weights: CostWeights,
    pub cons: LinearStateConstraints,
    pub support: SupportPolytope,
    pub sampler: DisturbanceSampler,
    pub ball: WassersteinBall,
    pub x0: Vector,
}

impl CaseStudy {
    pub fn new() -> Self {
        Self::with_eps(EPS)
    }

    pub fn with_eps(eps: f64) -> Self {
        let model = DiscreteModel::new(MassSpring::default(), 0.1).unwrap();
        let weights =
            CostWeights::new(diag(&[100.0, 1.0]), scalar(1.0), diag(&[100.0, 1.0])).unwrap();
        let cons = LinearStateConstraints::new(
            Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
            Vector::from_element(1, 0.5),
        )
        .unwrap();
        let bounds = BoxSet::from_slices(&[-1e-3, -0.1], &[1e-3, 0.1]).unwrap();
        let support = SupportPolytope::from_box(bounds.lower(), bounds.upper()).unwrap();
        let sampler = DisturbanceSampler::within(bounds, &support).unwrap();
        let center =
            EmpiricalDistribution::with_support(sampler.samples(SAMPLE_SEED, SAMPLES), &support)
                .unwrap();
        let ball = WassersteinBall::new(center, eps, GroundNorm::L1).unwrap();
        CaseStudy {
            model,
            weights,
            cons,
            support,
            sampler,
            ball,
            x0: Vector::from_vec(vec![-2.0, 0.0]),
        }
    }

    pub fn problem(&self) -> DrProblem<'_> {
        DrProblem {
            model: &self.model,
            weights: &self.weights,
            cons: &self.cons,
            ball: &self.ball,
            support: &self.support,
        }
    }
}

/// Brute-force worst-case `a * E[w]` over two-point distributions
/// `p d(w1) + (1-p) d(w2)` with `w1, w2` on a `points`-grid of `[lo, hi]`,
/// subject to `W1(., d(center)) <= eps`. For each pair the feasible `p` form an
/// interval, so only its end points are evaluated.
pub fn two_point_grid_oracle(
    a: f64,
    center: f64,
    eps: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> f64 {
    let grid: Vec<f64> = (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect();
    let mut best = f64::NEG_INFINITY;
    for &w1 in &grid {
        for &w2 in &grid {
            let (d1, d2) = ((w1 - center).abs(), (w2 - center).abs());
            // p d1 + (1 - p) d2 <= eps with p in [0, 1]
            let mut cands = Vec::new();
            for p in [0.0, 1.0] {
                if p * d1 + (1.0 - p) * d2 <= eps + 1e-15 {
                    cands.push(p);
                }
            }
            if (d1 - d2).abs() > 0.0 {
                let p = (eps - d2) / (d1 - d2);
                if (0.0..=1.0).contains(&p) {
                    cands.push(p);
                }
            }
            for p in cands {
                best = best.max(a * (p * w1 + (1.0 - p) * w2));
            }
        }
    }
    best
}

/// Closed form of the scalar worst-case expectation on `[lo, hi]`: all mass
/// moves monotonically towards the favourable end until the budget or the
/// support runs out.
pub fn scalar_box_wce(a: f64, samples: &[f64], eps: f64, lo: f64, hi: f64) -> f64 {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    if a >= 0.0 {
        a * (mean + eps.min(hi - mean))
    } else {
        a * (mean - eps.min(mean - lo))
    }
}
