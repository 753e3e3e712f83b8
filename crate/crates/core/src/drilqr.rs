//! Iterative distributionally robust LQR: alternate Riccati gains, DRO
//! back-offs and the tightened OCP until the nominal trajectory and the
//! back-offs stop moving.

use serde::Serialize;

use crate::ambiguity::{SupportPolytope, WassersteinBall};
use crate::backoff::{compute_backoffs, BackoffSchedule, LinearStateConstraints};
use crate::linearize::{ltv_along, GainSchedule, LtvSystem};
use crate::model::Dynamics;
use crate::ocp::{solve_tightened_ocp, NominalTrajectory, OcpStatus, SqpOptions, TightenedOcp};
use crate::riccati::{riccati_gains, stationary_gain, CostWeights};
use crate::{Error, Matrix, Result, Vector};

/// How the feedback gains are chosen in each outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub enum GainMode {
    /// Riccati recursion along the current linearization.
    Riccati,
    /// The same gain at every step.
    Fixed(Matrix),
    /// No feedback.
    Zero,
}

impl GainMode {
    pub fn name(&self) -> &'static str {
        match self {
            GainMode::Riccati => "riccati",
            GainMode::Fixed(_) => "fixed",
            GainMode::Zero => "zero",
        }
    }

    pub fn gains(&self, ltv: &LtvSystem, w: &CostWeights) -> Result<GainSchedule> {
        let n = ltv.horizon();
        match self {
            GainMode::Riccati => riccati_gains(ltv, w),
            GainMode::Fixed(k) => {
                if k.shape() != (ltv.input_dim(), ltv.state_dim()) {
                    return Err(Error::invalid(format!(
                        "fixed gain has shape {:?}, expected ({}, {})",
                        k.shape(),
                        ltv.input_dim(),
                        ltv.state_dim()
                    )));
                }
                GainSchedule::new(vec![k.clone(); n])
            }
            GainMode::Zero => Ok(GainSchedule::zeros(n, ltv.input_dim(), ltv.state_dim())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub max_outer_iters: usize,
    /// Bound on `||z_new - z_old||_inf / max(1, ||z_new||_inf)`.
    pub tol_traj: f64,
    /// Bound on `||beta_new - beta_old||_inf`.
    pub tol_beta: f64,
    pub gain_mode: GainMode,
    pub sqp: SqpOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_outer_iters: 50,
            tol_traj: 1e-6,
            tol_beta: 1e-8,
            gain_mode: GainMode::Riccati,
            sqp: SqpOptions {
                tol_kkt: 1e-9,
                ..SqpOptions::default()
            },
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 {
            return Err(Error::invalid("max_outer_iters must be at least 1"));
        }
        if !(self.tol_traj > 0.0 && self.tol_beta > 0.0) {
            return Err(Error::invalid("tolerances must be positive"));
        }
        Ok(())
    }
}

/// One OCP solve of the outer loop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationDiagnostics {
    pub iteration: usize,
    pub objective: f64,
    /// `max |beta|` used by this solve.
    pub beta_norm: f64,
    /// `||beta - beta_prev||_inf`; infinite on the first iteration.
    pub beta_change: f64,
    /// Relative change of `z` produced by this solve.
    pub traj_change: f64,
    pub sqp_iterations: usize,
    pub kkt_residual: f64,
    pub ocp_status: OcpStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DrStatus {
    Converged,
    NonConvergence,
}

#[derive(Debug, Clone)]
pub struct DrSolution {
    /// Nominal trajectory with `c` expressed for `gains`.
    pub traj: NominalTrajectory,
    pub gains: GainSchedule,
    pub beta: BackoffSchedule,
    pub status: DrStatus,
    /// Number of tightened OCP solves.
    pub outer_iterations: usize,
    pub diagnostics: Vec<IterationDiagnostics>,
}

/// Problem data shared by every outer iteration.
#[derive(Clone, Copy)]
pub struct DrProblem<'a> {
    pub model: &'a dyn Dynamics,
    pub weights: &'a CostWeights,
    pub cons: &'a LinearStateConstraints,
    pub ball: &'a WassersteinBall,
    pub support: &'a SupportPolytope,
}

impl DrProblem<'_> {
    /// Gains and back-offs along `traj`.
    pub fn gains_and_backoffs(
        &self,
        traj: &NominalTrajectory,
        mode: &GainMode,
    ) -> Result<(GainSchedule, BackoffSchedule)> {
        let ltv = ltv_along(self.model, traj)?;
        let gains = mode.gains(&ltv, self.weights)?;
        let beta = compute_backoffs(self.cons, &ltv, &gains, self.ball, self.support)?;
        Ok((gains, beta))
    }
}

/// Zero-feedforward rollout from `x0` under the LQR gain of the linearization
/// at the origin.
pub fn default_initial_guess(
    model: &dyn Dynamics,
    weights: &CostWeights,
    x0: &Vector,
    horizon: usize,
) -> Result<NominalTrajectory> {
    let (nx, nu) = (model.state_dim(), model.input_dim());
    let k = stationary_gain(model, &Vector::zeros(nx), &Vector::zeros(nu), weights, 500)?;
    NominalTrajectory::rollout(
        model,
        x0,
        &GainSchedule::constant(k, horizon),
        &vec![Vector::zeros(nu); horizon],
    )
}

pub fn solve(
    problem: &DrProblem<'_>,
    x0: &Vector,
    opts: &SolverOptions,
    init: &NominalTrajectory,
) -> Result<DrSolution> {
    solve_observed(problem, x0, opts, init, |_| {})
}

/// [`solve`] with a callback invoked after every outer iteration.
pub fn solve_observed(
    problem: &DrProblem<'_>,
    x0: &Vector,
    opts: &SolverOptions,
    init: &NominalTrajectory,
    mut observe: impl FnMut(&IterationDiagnostics),
) -> Result<DrSolution> {
    opts.validate()?;
    let model = problem.model;
    if init.horizon() == 0 {
        return Err(Error::invalid("initial guess has an empty horizon"));
    }
    if x0.len() != model.state_dim() {
        return Err(Error::invalid("initial state has the wrong dimension"));
    }
    // keep the initial inputs but start exactly at x0
    let mut traj = if init.z[0] == *x0 && init.rollout_residual(model)? <= 1e-9 {
        init.clone()
    } else {
        NominalTrajectory::from_inputs(model, x0, &init.v)?
    };

    let mut diagnostics = Vec::new();
    let mut prev_beta: Option<BackoffSchedule> = None;
    let mut traj_change = f64::INFINITY;
    let mut solves = 0;
    loop {
        let (gains, beta) = problem.gains_and_backoffs(&traj, &opts.gain_mode)?;
        let beta_change = prev_beta
            .as_ref()
            .map(|p| (&beta.beta - &p.beta).amax())
            .unwrap_or(f64::INFINITY);
        let converged = beta_change <= opts.tol_beta && traj_change <= opts.tol_traj;
        if converged || solves == opts.max_outer_iters {
            return Ok(DrSolution {
                traj: traj.reparameterized(&gains)?,
                gains,
                beta,
                status: if converged {
                    DrStatus::Converged
                } else {
                    DrStatus::NonConvergence
                },
                outer_iterations: solves,
                diagnostics,
            });
        }

        let ocp = TightenedOcp {
            model,
            weights: problem.weights,
            cons: problem.cons,
            beta: &beta,
            gains: &gains,
            x0,
        };
        let sol = solve_tightened_ocp(&ocp, &traj, &opts.sqp)?;
        solves += 1;
        if let Some(v) = sol.violation {
            return Err(Error::Infeasible {
                step: v.step,
                row: v.row,
                violation: v.amount,
                outer_iteration: Some(solves),
            });
        }
        traj_change = sol.traj.relative_change(&traj);
        let diag = IterationDiagnostics {
            iteration: solves,
            objective: sol.objective,
            beta_norm: beta.beta.amax(),
            beta_change,
            traj_change,
            sqp_iterations: sol.iterations,
            kkt_residual: sol.kkt_residual,
            ocp_status: sol.status,
        };
        observe(&diag);
        diagnostics.push(diag);
        traj = sol.traj;
        prev_beta = Some(beta);
    }
}

/// One receding-horizon step: shift the previous plan by one sample, re-solve
/// from the measured state and return the first input with the new solution.
pub fn mpc_step(
    problem: &DrProblem<'_>,
    state: &Vector,
    previous: &DrSolution,
    opts: &SolverOptions,
) -> Result<(Vector, DrSolution)> {
    let n = previous.traj.horizon();
    let nu = problem.model.input_dim();
    let mut c: Vec<Vector> = previous.traj.c[1..].to_vec();
    c.push(Vector::zeros(nu));
    let mut k: Vec<Matrix> = previous.gains.k[1..].to_vec();
    k.push(previous.gains.k[n - 1].clone());
    let warm = NominalTrajectory::rollout(problem.model, state, &GainSchedule::new(k)?, &c)?;
    let sol = solve(problem, state, opts, &warm)?;
    Ok((sol.traj.v[0].clone(), sol))
}
