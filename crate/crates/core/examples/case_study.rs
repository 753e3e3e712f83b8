//! Mass-spring case study: solve in all three gain modes and compare
//! back-offs and closed-loop errors over 30 realizations.

use std::time::Instant;

use wdro_mpc::ambiguity::{EmpiricalDistribution, GroundNorm, SupportPolytope, WassersteinBall};
use wdro_mpc::backoff::LinearStateConstraints;
use wdro_mpc::drilqr::{default_initial_guess, solve_observed, DrProblem, GainMode, SolverOptions};
use wdro_mpc::model::{BoxSet, DiscreteModel, MassSpring};
use wdro_mpc::riccati::CostWeights;
use wdro_mpc::sim::{monte_carlo, DisturbanceSampler};
use wdro_mpc::{Matrix, Vector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model = DiscreteModel::new(MassSpring::default(), 0.1)?;
    let q = Matrix::from_diagonal(&Vector::from_vec(vec![100.0, 1.0]));
    let weights = CostWeights::new(q.clone(), Matrix::identity(1, 1), q)?;
    let cons = LinearStateConstraints::new(
        Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
        Vector::from_element(1, 0.5),
    )?;
    let bounds = BoxSet::from_slices(&[-1e-3, -0.1], &[1e-3, 0.1])?;
    let support = SupportPolytope::from_box(bounds.lower(), bounds.upper())?;
    let sampler = DisturbanceSampler::within(bounds, &support)?;
    let center = EmpiricalDistribution::with_support(sampler.samples(1, 5), &support)?;
    let ball = WassersteinBall::new(center, 0.03, GroundNorm::L1)?;
    let problem = DrProblem {
        model: &model,
        weights: &weights,
        cons: &cons,
        ball: &ball,
        support: &support,
    };
    let x0 = Vector::from_vec(vec![-2.0, 0.0]);
    let n = 140;
    let init = default_initial_guess(&model, &weights, &x0, n)?;

    let modes = [
        GainMode::Riccati,
        GainMode::Fixed(Matrix::from_row_slice(1, 2, &[-7.97, -7.16])),
        GainMode::Zero,
    ];
    let mut solutions = Vec::new();
    for mode in modes {
        let start = Instant::now();
        let opts = SolverOptions {
            gain_mode: mode.clone(),
            ..SolverOptions::default()
        };
        let sol = solve_observed(&problem, &x0, &opts, &init, |d| {
            println!(
                "  [{}] it {:2} obj {:.6} beta_max {:.4e} dbeta {:.2e} dz {:.2e} sqp {} kkt {:.1e} {:?}",
                mode.name(),
                d.iteration,
                d.objective,
                d.beta_norm,
                d.beta_change,
                d.traj_change,
                d.sqp_iterations,
                d.kkt_residual,
                d.ocp_status
            )
        })?;
        let peak = sol.traj.z.iter().map(|z| z[1]).fold(f64::MIN, f64::max);
        println!(
            "{}: {:?} after {} solves in {:.2?}; max beta {:.4}, peak velocity {:.4}",
            mode.name(),
            sol.status,
            sol.outer_iterations,
            start.elapsed(),
            sol.beta.max_over_steps(0),
            peak
        );
        solutions.push((mode.name().to_string(), sol));
    }

    let plans: Vec<(String, &_)> = solutions.iter().map(|(m, s)| (m.clone(), s)).collect();
    let results = monte_carlo(&model, &plans, &x0, &sampler, 30, 2, Some(&cons))?;
    for r in &results {
        let s = &r.summary;
        println!(
            "{:8} terminal mean {:.4e} max {:.4e}  violation freq {:.4}",
            s.mode, s.terminal_mean_error, s.terminal_max_error, s.violation_frequency
        );
    }
    Ok(())
}
