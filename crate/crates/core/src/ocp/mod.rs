//! Constraint-tightened nominal OCP, solved by single-shooting SQP over the
//! feedforward terms `c` of the policy `v_i = K_i z_i + c_i`.

mod qp;

use crate::backoff::{BackoffSchedule, LinearStateConstraints};
use crate::linearize::GainSchedule;
use crate::model::Dynamics;
use crate::riccati::CostWeights;
use crate::{Error, Matrix, Result, Vector};

/// Nominal states `z_0..z_N`, inputs `v_0..v_{N-1}` and feedforward terms
/// `c_0..c_{N-1}` with `v_i = K_i z_i + c_i` for the gains that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct NominalTrajectory {
    pub z: Vec<Vector>,
    pub v: Vec<Vector>,
    pub c: Vec<Vector>,
}

impl NominalTrajectory {
    /// Roll `model` forward from `x0` under `v_i = K_i z_i + c_i`.
    pub fn rollout(
        model: &dyn Dynamics,
        x0: &Vector,
        gains: &GainSchedule,
        c: &[Vector],
    ) -> Result<Self> {
        if gains.horizon() != c.len() {
            return Err(Error::invalid(format!(
                "{} gains for {} feedforward terms",
                gains.horizon(),
                c.len()
            )));
        }
        let mut z = Vec::with_capacity(c.len() + 1);
        let mut v = Vec::with_capacity(c.len());
        z.push(x0.clone());
        for (i, (k, ci)) in gains.k.iter().zip(c).enumerate() {
            let vi = k * &z[i] + ci;
            let next = model.step(&z[i], &vi).map_err(|e| match e {
                Error::Numerical(msg) => Error::numerical(format!("rollout step {i}: {msg}")),
                other => other,
            })?;
            v.push(vi);
            z.push(next);
        }
        Ok(NominalTrajectory {
            z,
            v,
            c: c.to_vec(),
        })
    }

    /// Open-loop rollout of an input sequence (`K = 0`, `c = v`).
    pub fn from_inputs(model: &dyn Dynamics, x0: &Vector, v: &[Vector]) -> Result<Self> {
        let gains = GainSchedule::zeros(v.len(), model.input_dim(), model.state_dim());
        Self::rollout(model, x0, &gains, v)
    }

    pub fn horizon(&self) -> usize {
        self.v.len()
    }

    /// Re-express the same `(z, v)` under different gains: `c_i = v_i - K_i z_i`.
    pub fn reparameterized(&self, gains: &GainSchedule) -> Result<Self> {
        if gains.horizon() != self.horizon() {
            return Err(Error::invalid(
                "gain schedule length differs from trajectory",
            ));
        }
        let c = gains
            .k
            .iter()
            .zip(self.v.iter().zip(&self.z))
            .map(|(k, (v, z))| v - k * z)
            .collect();
        Ok(NominalTrajectory {
            z: self.z.clone(),
            v: self.v.clone(),
            c,
        })
    }

    /// `max_i ||z_{i+1} - f_d(z_i, v_i)||_inf`.
    pub fn rollout_residual(&self, model: &dyn Dynamics) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.horizon() {
            let next = model.step(&self.z[i], &self.v[i])?;
            worst = worst.max((next - &self.z[i + 1]).amax());
        }
        Ok(worst)
    }

    /// Quadratic cost `sum z'Qz + v'Rv + z_N'Qf z_N`.
    pub fn cost(&self, w: &CostWeights) -> f64 {
        let stage: f64 = self
            .z
            .iter()
            .zip(&self.v)
            .map(|(z, v)| quad(&w.q, z) + quad(&w.r, v))
            .sum();
        stage
            + quad(
                &w.qf,
                self.z.last().expect("trajectory has a terminal state"),
            )
    }

    /// Largest relative change `||z - other.z||_inf / max(1, ||z||_inf)`.
    pub fn relative_change(&self, other: &NominalTrajectory) -> f64 {
        let scale = self.z.iter().map(|z| z.amax()).fold(1.0, f64::max);
        self.z
            .iter()
            .zip(&other.z)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
            / scale
    }
}

fn quad(m: &Matrix, x: &Vector) -> f64 {
    x.dot(&(m * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum OcpStatus {
    Optimal,
    MaxIter,
    Infeasible,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ConstraintViolation {
    pub step: usize,
    pub row: usize,
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct OcpSolution {
    pub traj: NominalTrajectory,
    pub objective: f64,
    pub kkt_residual: f64,
    pub status: OcpStatus,
    pub iterations: usize,
    /// Merit value after each accepted step, starting with the point at which
    /// the penalty weight last grew.
    pub merit_history: Vec<f64>,
    /// Worst violation of the tightened constraints, if any exceeds the tolerance.
    pub violation: Option<ConstraintViolation>,
    /// Multipliers of the tightened constraints, indexed `(i - 1) * n_F + n`.
    pub multipliers: Vector,
}

/// SQP settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpOptions {
    pub tol_kkt: f64,
    pub max_iter: usize,
    /// Initial exact-penalty weight on constraint violation.
    pub penalty: f64,
    /// The weight grows tenfold while the QP needs slack, up to this value.
    pub max_penalty: f64,
    /// Initial Levenberg damping.
    pub damping: f64,
    /// Violation above which the solution is reported infeasible.
    pub feasibility_tol: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            tol_kkt: 1e-6,
            max_iter: 100,
            penalty: 1e4,
            max_penalty: 1e10,
            damping: 1e-8,
            feasibility_tol: 1e-6,
        }
    }
}

/// Data of one tightened OCP instance.
#[derive(Clone, Copy)]
pub struct TightenedOcp<'a> {
    pub model: &'a dyn Dynamics,
    pub weights: &'a CostWeights,
    pub cons: &'a LinearStateConstraints,
    pub beta: &'a BackoffSchedule,
    pub gains: &'a GainSchedule,
    pub x0: &'a Vector,
}

/// Everything the SQP needs at one value of `c`.
struct Evaluation {
    traj: NominalTrajectory,
    objective: f64,
    gradient: Vector,
    hessian: Matrix,
    /// `[F]_n z_i - [f]_n + beta_{i,n}` for `i = 1..N`.
    cons: Vector,
    cons_jac: Matrix,
}

impl Evaluation {
    fn violation_l1(&self) -> f64 {
        self.cons.iter().map(|v| v.max(0.0)).sum()
    }

    fn merit(&self, rho: f64) -> f64 {
        self.objective + rho * self.violation_l1()
    }
}

impl<'a> TightenedOcp<'a> {
    fn validate(&self) -> Result<()> {
        let n = self.gains.horizon();
        if n == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        if self.beta.horizon() != n || self.beta.beta.ncols() != self.cons.rows() {
            return Err(Error::invalid(format!(
                "back-off table is {:?}, expected ({}, {})",
                self.beta.beta.shape(),
                n + 1,
                self.cons.rows()
            )));
        }
        let nx = self.model.state_dim();
        if self.x0.len() != nx
            || self.weights.state_dim() != nx
            || self.weights.input_dim() != self.model.input_dim()
            || self.cons.state_dim() != nx
        {
            return Err(Error::invalid(
                "OCP data dimensions are inconsistent with the model",
            ));
        }
        Ok(())
    }

    fn evaluate(&self, c: &[Vector]) -> Result<Evaluation> {
        let model = self.model;
        let (nx, nu) = (model.state_dim(), model.input_dim());
        let n = self.gains.horizon();
        let nc = n * nu;
        let traj = NominalTrajectory::rollout(model, self.x0, self.gains, c)?;
        let w = self.weights;

        let mut gradient = Vector::zeros(nc);
        let mut hessian = Matrix::zeros(nc, nc);
        let nf = self.cons.rows();
        let mut cons = Vector::zeros(n * nf);
        let mut cons_jac = Matrix::zeros(n * nf, nc);

        // sens = dz_i/dc; only the first i*nu columns are nonzero
        let mut sens = Matrix::zeros(nx, nc);
        for i in 0..=n {
            let z = &traj.z[i];
            let live = i * nu;
            if i >= 1 {
                for row in 0..nf {
                    let idx = (i - 1) * nf + row;
                    let f_row = self.cons.f_mat.row(row);
                    cons[idx] = (f_row * z)[0] - self.cons.f[row] + self.beta.get(i, row);
                    let jrow = f_row * sens.columns(0, live);
                    cons_jac.view_mut((idx, 0), (1, live)).copy_from(&jrow);
                }
            }
            if i == n {
                let s = sens.columns(0, live);
                let qz = &w.qf * z;
                gradient.rows_mut(0, live).gemv_tr(2.0, &s, &qz, 1.0);
                let qs = &w.qf * s;
                hessian
                    .view_mut((0, 0), (live, live))
                    .gemm_tr(2.0, &s, &qs, 1.0);
            } else {
                let k = &self.gains.k[i];
                let v = &traj.v[i];
                // dv_i/dc = K_i S_i + E_i
                let mut t = Matrix::zeros(nu, live + nu);
                t.columns_mut(0, live)
                    .copy_from(&(k * sens.columns(0, live)));
                t.columns_mut(live, nu).fill_with_identity();

                let s = sens.columns(0, live);
                let qz = &w.q * z;
                gradient.rows_mut(0, live).gemv_tr(2.0, &s, &qz, 1.0);
                let rv = &w.r * v;
                gradient.rows_mut(0, live + nu).gemv_tr(2.0, &t, &rv, 1.0);
                let qs = &w.q * s;
                hessian
                    .view_mut((0, 0), (live, live))
                    .gemm_tr(2.0, &s, &qs, 1.0);
                let rt = &w.r * &t;
                hessian
                    .view_mut((0, 0), (live + nu, live + nu))
                    .gemm_tr(2.0, &t, &rt, 1.0);

                let (a, b) = model.jacobians(z, v)?;
                let mut next = Matrix::zeros(nx, nc);
                next.columns_mut(0, live + nu).copy_from(&(&b * &t));
                let a_s = &a * sens.columns(0, live);
                let mut head = next.columns_mut(0, live);
                head += a_s;
                sens = next;
            }
        }
        let objective = traj.cost(w);
        if !objective.is_finite() {
            return Err(Error::numerical(
                "objective is not finite along the rollout",
            ));
        }
        Ok(Evaluation {
            traj,
            objective,
            gradient,
            hessian,
            cons,
            cons_jac,
        })
    }
}

fn kkt_residual(ev: &Evaluation, mu: &Vector) -> f64 {
    let stationarity = (&ev.gradient + ev.cons_jac.transpose() * mu).amax();
    let primal = ev.cons.max().max(0.0);
    let complementarity = ev
        .cons
        .iter()
        .zip(mu.iter())
        .map(|(g, m)| (g.min(0.0) * m).abs())
        .fold(0.0, f64::max);
    stationarity.max(primal).max(complementarity)
}

fn unflatten(x: &Vector, nu: usize) -> Vec<Vector> {
    x.as_slice()
        .chunks(nu)
        .map(Vector::from_column_slice)
        .collect()
}

fn flatten(c: &[Vector]) -> Vector {
    Vector::from_iterator(
        c.iter().map(|v| v.len()).sum(),
        c.iter().flat_map(|v| v.iter().copied()),
    )
}

/// Minimize the nominal quadratic cost subject to the dynamics, the policy
/// `v_i = K_i z_i + c_i` and `[F]_n z_i <= [f]_n - beta_{i,n}` for `i = 1..N`.
///
/// Each SQP iteration rolls out the policy, linearizes the constraints
/// through the forward sensitivities `dz_i/dc`, solves the condensed QP with
/// the Gauss-Newton Hessian plus Levenberg damping and `l1`-penalized slacks,
/// and backtracks on the exact penalty merit function. The penalty weight is
/// raised while the QP still needs slack.
pub fn solve_tightened_ocp(
    problem: &TightenedOcp<'_>,
    warm: &NominalTrajectory,
    opts: &SqpOptions,
) -> Result<OcpSolution> {
    problem.validate()?;
    let nu = problem.model.input_dim();
    let n = problem.gains.horizon();
    if warm.horizon() != n {
        return Err(Error::invalid(format!(
            "warm start has horizon {}, expected {n}",
            warm.horizon()
        )));
    }
    // keep the warm start's (z, v) under the current gains
    let c0 = warm.reparameterized(problem.gains)?.c;
    let mut rho = opts.penalty;
    let mut c = flatten(&c0);
    let mut ev = problem.evaluate(&c0)?;
    let mut mu = Vector::zeros(ev.cons.len());
    let mut damping = opts.damping;
    let mut merit_history = vec![ev.merit(rho)];
    let mut status = OcpStatus::MaxIter;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if iterations > 0 && kkt_residual(&ev, &mu) < opts.tol_kkt {
            status = OcpStatus::Optimal;
            break;
        }
        iterations += 1;

        let mut h = ev.hessian.clone();
        for j in 0..h.nrows() {
            h[(j, j)] += damping;
        }
        let sub = qp::solve_soft_qp(&h, &ev.gradient, &ev.cons_jac, &(-&ev.cons), rho, 1e-11)?;
        if sub.slack.amax() > 1e-9 && rho < opts.max_penalty {
            rho = (rho * 10.0).min(opts.max_penalty);
            merit_history = vec![ev.merit(rho)];
            continue;
        }
        let d = &sub.step;
        let predicted_viol: f64 = (&ev.cons + &ev.cons_jac * d)
            .iter()
            .map(|v| v.max(0.0))
            .sum();
        let slope = ev.gradient.dot(d) - rho * ev.violation_l1() + rho * predicted_viol;
        if d.amax() <= 1e-15 * (1.0 + c.amax()) || slope >= 0.0 {
            // no descent direction left: the QP certifies stationarity
            mu = sub.multipliers;
            status = OcpStatus::Optimal;
            break;
        }

        let phi = ev.merit(rho);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-10 {
            let trial = &c + d * alpha;
            match problem.evaluate(&unflatten(&trial, nu)) {
                Ok(tr) if tr.merit(rho) <= phi + 1e-4 * alpha * slope => {
                    accepted = Some((trial, tr));
                    break;
                }
                Ok(_) | Err(Error::Numerical(_)) => alpha *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((trial, tr)) => {
                c = trial;
                ev = tr;
                mu = sub.multipliers;
                merit_history.push(ev.merit(rho));
                damping = (damping * 0.5).max(opts.damping);
            }
            None => {
                damping *= 10.0;
                if damping > 1e8 {
                    break;
                }
            }
        }
    }

    let kkt = kkt_residual(&ev, &mu);
    let nf = problem.cons.rows();
    let violation = ev
        .cons
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > opts.feasibility_tol)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(idx, v)| ConstraintViolation {
            step: idx / nf + 1,
            row: idx % nf,
            amount: *v,
        });
    if violation.is_some() {
        status = OcpStatus::Infeasible;
    }
    Ok(OcpSolution {
        objective: ev.objective,
        traj: ev.traj,
        kkt_residual: kkt,
        status,
        iterations,
        merit_history,
        violation,
        multipliers: mu,
    })
}
