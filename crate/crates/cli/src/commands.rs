//! Subcommand implementations. Each returns the process exit code; when
//! several modes run, the largest code wins.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use wdro_mpc::drilqr::{default_initial_guess, solve_observed, DrSolution, DrStatus};
use wdro_mpc::linearize::ltv_along;
use wdro_mpc::linerr::{error_split_bound, linearization_remainder, split_error_rollout};
use wdro_mpc::model::hessian_mu;
use wdro_mpc::sim::{
    coupled_rollouts, error_increments, monte_carlo, perturb_samples, Realization,
};
use wdro_mpc::tube::{invariant_radius_multistep, tube_radii, validate_tube};
use wdro_mpc::{io, Error, Vector};

use crate::config::{Experiment, Linearization, ModeName, SCHEMA_VERSION};
use crate::error::{CliError, EXIT_NONCONVERGENCE, EXIT_OK};
use crate::output::{self, LinerrRow};

pub struct Context {
    pub exp: Experiment,
    pub out: PathBuf,
    pub modes: Vec<ModeName>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub verbose: bool,
}

impl Context {
    fn mode_dir(&self, mode: ModeName) -> PathBuf {
        self.out.join(mode.as_str())
    }

    fn event(&self, value: Value) {
        if self.verbose {
            eprintln!("{value}");
        }
    }

    fn dims(&self) -> (usize, usize) {
        (self.exp.model.state_dim(), self.exp.model.input_dim())
    }

    fn plan(&self, mode: ModeName) -> Result<DrSolution, CliError> {
        let (nx, nu) = self.dims();
        output::read_plan(&self.mode_dir(mode), nx, nu, self.exp.horizon)
    }
}

fn row_maxima(sol: &DrSolution) -> Vec<f64> {
    (0..sol.beta.beta.ncols())
        .map(|n| sol.beta.max_over_steps(n))
        .collect()
}

fn failure_report(e: &Error) -> Value {
    match e {
        Error::Infeasible {
            step,
            row,
            violation,
            outer_iteration,
        } => json!({
            "status": "infeasible",
            "step": step,
            "row": row,
            "violation": violation,
            "outer_iteration": outer_iteration,
            "message": e.to_string(),
        }),
        _ => json!({ "status": "error", "message": e.to_string() }),
    }
}

pub fn solve(ctx: &Context) -> Result<u8, CliError> {
    let exp = &ctx.exp;
    let problem = exp.problem();
    let init = default_initial_guess(exp.model.as_ref(), &exp.weights, &exp.x0, exp.horizon)?;
    let mut code = EXIT_OK;
    for &mode in &ctx.modes {
        let opts = exp.solver_options(mode)?;
        let dir = ctx.mode_dir(mode);
        let started = Instant::now();
        ctx.event(json!({ "event": "start", "mode": mode.as_str(), "horizon": exp.horizon }));
        let result = solve_observed(&problem, &exp.x0, &opts, &init, |d| {
            ctx.event(json!({ "event": "iteration", "mode": mode.as_str(), "diagnostics": d }));
        });
        let sol = match result {
            Ok(sol) => sol,
            Err(e) => {
                for name in [output::TRAJECTORY, output::GAINS, output::BACKOFFS] {
                    let _ = fs::remove_file(dir.join(name));
                }
                let mut report = failure_report(&e);
                report["schema_version"] = json!(SCHEMA_VERSION);
                report["mode"] = json!(mode.as_str());
                output::write_json(&dir.join("diagnostics.json"), &report)?;
                eprintln!("{}: {e}", mode.as_str());
                code = code.max(CliError::from(e).exit_code());
                continue;
            }
        };
        output::write_plan(&dir, &sol.traj, &sol.gains, &sol.beta)?;
        let status = match sol.status {
            DrStatus::Converged => "converged",
            DrStatus::NonConvergence => "nonconvergence",
        };
        let cost = sol.traj.cost(&exp.weights);
        output::write_json(
            &dir.join("diagnostics.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "mode": mode.as_str(),
                "status": status,
                "outer_iterations": sol.outer_iterations,
                "cost": cost,
                "max_backoff": row_maxima(&sol),
                "iterations": sol.diagnostics,
            }),
        )?;
        ctx.event(json!({
            "event": "done",
            "mode": mode.as_str(),
            "status": status,
            "seconds": started.elapsed().as_secs_f64(),
        }));
        println!(
            "{}: {status} after {} iterations, cost {cost:.6}, max back-off {:?}",
            mode.as_str(),
            sol.outer_iterations,
            row_maxima(&sol)
        );
        if sol.status == DrStatus::NonConvergence {
            code = code.max(EXIT_NONCONVERGENCE);
        }
    }
    Ok(code)
}

fn linerr_rows(
    ctx: &Context,
    lin: &Linearization,
    mu: &Vector,
    plan: &DrSolution,
    reals: &[Realization],
) -> Result<Vec<LinerrRow>, CliError> {
    let model = ctx.exp.model.as_ref();
    let traj = &plan.traj;
    let n = traj.horizon();
    let ltv = ltv_along(model, traj)?;
    let per_run = reals
        .par_iter()
        .enumerate()
        .map(|(r, real)| {
            let rem = (0..n)
                .map(|i| {
                    linearization_remainder(model, &traj.z[i], &traj.v[i], &real.x[i], &real.u[i])
                })
                .collect::<wdro_mpc::Result<Vec<_>>>()?;
            let split = split_error_rollout(&ltv, &plan.gains, &real.w, &rem)?;
            let bound = error_split_bound(mu, &plan.gains, &split)?;
            Ok((0..n)
                .map(|i| LinerrRow {
                    realization: r,
                    step: i,
                    e_norm: split.e[i].amax(),
                    eps_lin_norm: split.eps_lin[i].amax(),
                    split_gap: (&real.dx[i] - &split.e[i] - &split.eps_lin[i]).amax(),
                    remainder: rem[i].clone(),
                    bound: bound[i].clone(),
                    in_box: lin.state.contains(&real.x[i]) && lin.input.contains(&real.u[i]),
                })
                .collect::<Vec<_>>())
        })
        .collect::<wdro_mpc::Result<Vec<_>>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

pub fn simulate(ctx: &Context) -> Result<u8, CliError> {
    let exp = &ctx.exp;
    let runs = ctx.runs.unwrap_or(exp.simulation.runs);
    let seed = ctx.seed.unwrap_or(exp.simulation.seed);
    if runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let plans = ctx
        .modes
        .iter()
        .map(|&m| Ok((m.as_str().to_string(), ctx.plan(m)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let refs: Vec<(String, &DrSolution)> = plans.iter().map(|(m, p)| (m.clone(), p)).collect();
    let started = Instant::now();
    let results = monte_carlo(
        exp.model.as_ref(),
        &refs,
        &exp.x0,
        &exp.sampler,
        runs,
        seed,
        Some(&exp.cons),
    )?;
    ctx.event(
        json!({ "event": "simulated", "runs": runs, "seconds": started.elapsed().as_secs_f64() }),
    );

    let mu = match &exp.linearization {
        Some(lin) => Some(hessian_mu(
            exp.model.as_ref(),
            &lin.state,
            &lin.input,
            lin.grid,
            lin.safety,
        )?),
        None => None,
    };
    for (res, (mode, plan)) in results.iter().zip(&plans) {
        let dir = ctx.out.join(mode);
        output::write_realizations(&dir.join("realizations.csv"), &res.realizations)?;
        output::write_increments(
            &dir.join("error_increments.csv"),
            &error_increments(&res.realizations),
        )?;
        if let (Some(lin), Some(mu)) = (&exp.linearization, &mu) {
            let rows = linerr_rows(ctx, lin, mu, plan, &res.realizations)?;
            output::write_linerr(&dir.join("linerr.csv"), &rows)?;
        }
        let s = &res.summary;
        println!(
            "{mode}: terminal error mean {:.4} max {:.4}, violation frequency {:.4}, violating runs {:.4}",
            s.terminal_mean_error, s.terminal_max_error, s.violation_frequency, s.violating_runs
        );
    }
    let summaries: Vec<_> = results.iter().map(|r| &r.summary).collect();
    output::write_json(
        &ctx.out.join("simulation_summary.json"),
        &json!({
            "schema_version": SCHEMA_VERSION,
            "runs": runs,
            "seed": seed,
            "mu": mu.map(|m| m.iter().copied().collect::<Vec<_>>()),
            "modes": summaries,
        }),
    )?;
    Ok(EXIT_OK)
}

pub fn tube(ctx: &Context) -> Result<u8, CliError> {
    let exp = &ctx.exp;
    let ball = &exp.ball;
    let draws = ctx.runs.unwrap_or(exp.tube.draws);
    let seed = ctx.seed.unwrap_or(exp.tube.seed);
    let mut total_failures = 0;
    for &mode in &ctx.modes {
        let plan = ctx.plan(mode)?;
        let dir = ctx.mode_dir(mode);
        let n = plan.traj.horizon();
        let ltv = ltv_along(exp.model.as_ref(), &plan.traj)?;
        let radii = tube_radii(&ltv, &plan.gains, ball.eps, 1.0, ball.ground_norm)?;
        output::write_radii(&dir.join("tube_radii.csv"), &radii)?;

        // nominal sequences cycle through the center atoms
        let atoms = ball.center.samples();
        let nominal: Vec<Vec<Vector>> = (0..atoms.len())
            .map(|l| {
                (0..n)
                    .map(|m| atoms[(l + m) % atoms.len()].clone())
                    .collect()
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut checks = Vec::with_capacity(draws);
        for _ in 0..draws {
            let perturbed = perturb_samples(&nominal, ball.eps, ball.ground_norm, &mut rng);
            let c = coupled_rollouts(&ltv, &plan.gains, &nominal, &perturbed)?;
            checks.push(validate_tube(&c.nominal, &c.realized, &radii)?);
        }
        output::write_tube_checks(&dir.join("tube_validation.csv"), &checks)?;

        let flat = checks.iter().flatten();
        let failures = flat.clone().filter(|c| !c.pass).count();
        let min_margin = flat
            .map(|c| c.bound - c.distance)
            .fold(f64::INFINITY, f64::min);
        let a_cl = plan.gains.closed_loop(&ltv)?;
        let (invariant, power) =
            invariant_radius_multistep(&a_cl[n - 1], ball.eps, 1.0, ball.ground_norm, 50);
        output::write_json(
            &dir.join("tube_summary.json"),
            &json!({
                "schema_version": SCHEMA_VERSION,
                "mode": mode.as_str(),
                "eps": ball.eps,
                "norm": ball.ground_norm,
                "p": 1.0,
                "draws": draws,
                "seed": seed,
                "terminal_radius": radii.rho[n],
                "terminal_radius_product": radii.rho_product[n],
                "failures": failures,
                "min_margin": if draws > 0 { json!(min_margin) } else { Value::Null },
                "invariant_radius": invariant,
                "invariant_power": power,
            }),
        )?;
        println!(
            "{}: terminal radius {:.6} (product form {:.6}), {failures} failed checks over {draws} draws",
            mode.as_str(),
            radii.rho[n],
            radii.rho_product[n]
        );
        total_failures += failures;
    }
    if total_failures > 0 {
        return Err(CliError::Check(format!(
            "{total_failures} tube checks exceeded their radius"
        )));
    }
    Ok(EXIT_OK)
}

pub fn backoff(ctx: &Context, trajectory: Option<&Path>) -> Result<u8, CliError> {
    let exp = &ctx.exp;
    let (nx, nu) = ctx.dims();
    let traj = match trajectory {
        Some(path) => {
            let f = fs::File::open(path).map_err(|e| CliError::Artifact {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            io::read_trajectory(f, nx, nu).map_err(|e| CliError::Artifact {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?
        }
        None => default_initial_guess(exp.model.as_ref(), &exp.weights, &exp.x0, exp.horizon)?,
    };
    let problem = exp.problem();
    for &mode in &ctx.modes {
        let gain_mode = exp.gain_mode(mode)?;
        let (gains, beta) = problem.gains_and_backoffs(&traj, &gain_mode)?;
        let dir = ctx.mode_dir(mode).join("backoff");
        output::write_plan(&dir, &traj.reparameterized(&gains)?, &gains, &beta)?;
        let maxima: Vec<f64> = (0..beta.beta.ncols())
            .map(|n| beta.max_over_steps(n))
            .collect();
        println!("{}: max back-off per row {maxima:?}", mode.as_str());
    }
    Ok(EXIT_OK)
}
