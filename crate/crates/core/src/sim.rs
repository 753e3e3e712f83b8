//! Seeded disturbance sampling and closed-loop Monte-Carlo simulation.
//!
//! Random streams come from ChaCha8 seeded with `seed_from_u64`. A draw is
//! `lo + (hi - lo) * U` with `U` uniform on `[0, 1)`, taken per step and,
//! within a step, in dimension order. Realization `r` of a Monte-Carlo run
//! uses stream `r` of the run seed, so every plan sees the same disturbances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::ambiguity::{GroundNorm, SupportPolytope, SUPPORT_TOL};
use crate::backoff::LinearStateConstraints;
use crate::drilqr::DrSolution;
use crate::linearize::{GainSchedule, LtvSystem};
use crate::model::{BoxSet, Dynamics};
use crate::{Error, Result, Vector};

/// Independent uniform disturbances on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceSampler {
    bounds: BoxSet,
}

impl DisturbanceSampler {
    pub fn new(bounds: BoxSet) -> Self {
        DisturbanceSampler { bounds }
    }

    /// Sampler whose box must lie inside `support`.
    pub fn within(bounds: BoxSet, support: &SupportPolytope) -> Result<Self> {
        if bounds.dim() != support.dim() {
            return Err(Error::invalid("sampler and support dimensions differ"));
        }
        let d = bounds.dim();
        // a box lies in a polytope iff every corner does
        for bits in 0..1usize << d {
            let corner = Vector::from_fn(d, |i, _| {
                if bits & (1 << i) != 0 {
                    bounds.upper()[i]
                } else {
                    bounds.lower()[i]
                }
            });
            if !support.contains(&corner, SUPPORT_TOL) {
                return Err(Error::invalid("sampler box leaves the disturbance support"));
            }
        }
        Ok(DisturbanceSampler { bounds })
    }

    pub fn bounds(&self) -> &BoxSet {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn draw(&self, rng: &mut impl Rng) -> Vector {
        let (lo, hi) = (self.bounds.lower(), self.bounds.upper());
        Vector::from_fn(self.dim(), |i, _| {
            lo[i] + (hi[i] - lo[i]) * rng.random::<f64>()
        })
    }

    pub fn draw_many(&self, rng: &mut impl Rng, count: usize) -> Vec<Vector> {
        (0..count).map(|_| self.draw(rng)).collect()
    }

    /// `count` draws from a fresh stream seeded with `seed`.
    pub fn samples(&self, seed: u64, count: usize) -> Vec<Vector> {
        self.draw_many(&mut ChaCha8Rng::seed_from_u64(seed), count)
    }

    /// Disturbance sequence of realization `index` of the run seeded `seed`.
    pub fn realization_sequence(&self, seed: u64, index: u64, steps: usize) -> Vec<Vector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.draw_many(&mut rng, steps)
    }
}

/// One closed-loop run of the true system.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub x: Vec<Vector>,
    pub u: Vec<Vector>,
    pub w: Vec<Vector>,
    /// `x_i - z_i`.
    pub dx: Vec<Vector>,
}

/// Simulate `x_{i+1} = f_d(x_i, u_i) + w_i` under `u_i = v_i + K_i (x_i - z_i)`.
pub fn rollout(
    model: &dyn Dynamics,
    plan: &DrSolution,
    x0: &Vector,
    disturbances: &[Vector],
) -> Result<Realization> {
    let traj = &plan.traj;
    let n = traj.horizon();
    if disturbances.len() != n || plan.gains.horizon() != n {
        return Err(Error::invalid(format!(
            "plan horizon {n} does not match {} disturbances",
            disturbances.len()
        )));
    }
    let mut x = vec![x0.clone()];
    let mut u = Vec::with_capacity(n);
    let mut dx = vec![x0 - &traj.z[0]];
    for i in 0..n {
        let ui = &traj.v[i] + &plan.gains.k[i] * &dx[i];
        let next = model.step(&x[i], &ui)? + &disturbances[i];
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "state became non-finite at step {}",
                i + 1
            )));
        }
        dx.push(&next - &traj.z[i + 1]);
        x.push(next);
        u.push(ui);
    }
    Ok(Realization {
        x,
        u,
        w: disturbances.to_vec(),
        dx,
    })
}

/// Monte-Carlo statistics of one plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSummary {
    pub mode: String,
    pub runs: usize,
    /// Per step, mean over runs of `||dx_i||_inf`.
    pub mean_error: Vec<f64>,
    /// Per step, max over runs of `||dx_i||_inf`.
    pub max_error: Vec<f64>,
    pub terminal_mean_error: f64,
    pub terminal_max_error: f64,
    /// Fraction of `(run, step >= 1)` pairs violating `F x <= f`.
    pub violation_frequency: f64,
    /// Fraction of runs with at least one violation.
    pub violating_runs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeResult {
    pub summary: ModeSummary,
    pub realizations: Vec<Realization>,
}

/// Run `runs` realizations of every plan with common random numbers.
pub fn monte_carlo(
    model: &dyn Dynamics,
    plans: &[(String, &DrSolution)],
    x0: &Vector,
    sampler: &DisturbanceSampler,
    runs: usize,
    seed: u64,
    cons: Option<&LinearStateConstraints>,
) -> Result<Vec<ModeResult>> {
    if runs == 0 {
        return Err(Error::invalid("at least one run is required"));
    }
    plans
        .iter()
        .map(|(mode, plan)| {
            let n = plan.traj.horizon();
            let realizations = (0..runs)
                .into_par_iter()
                .map(|r| {
                    let w = sampler.realization_sequence(seed, r as u64, n);
                    rollout(model, plan, x0, &w)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(ModeResult {
                summary: summarize(mode, &realizations, cons),
                realizations,
            })
        })
        .collect()
}

fn summarize(
    mode: &str,
    reals: &[Realization],
    cons: Option<&LinearStateConstraints>,
) -> ModeSummary {
    let runs = reals.len();
    let steps = reals[0].dx.len();
    let mut mean_error = vec![0.0; steps];
    let mut max_error = vec![0.0f64; steps];
    for r in reals {
        for (i, d) in r.dx.iter().enumerate() {
            let e = d.amax();
            mean_error[i] += e / runs as f64;
            max_error[i] = max_error[i].max(e);
        }
    }
    let (mut bad_steps, mut bad_runs) = (0usize, 0usize);
    if let Some(c) = cons {
        for r in reals {
            let bad = r.x[1..]
                .iter()
                .filter(|x| (&c.f_mat * *x - &c.f).max() > 0.0)
                .count();
            bad_steps += bad;
            bad_runs += usize::from(bad > 0);
        }
    }
    ModeSummary {
        mode: mode.to_string(),
        runs,
        terminal_mean_error: mean_error[steps - 1],
        terminal_max_error: max_error[steps - 1],
        mean_error,
        max_error,
        violation_frequency: bad_steps as f64 / (runs * (steps - 1)).max(1) as f64,
        violating_runs: bad_runs as f64 / runs as f64,
    }
}

/// `(realization, step, dx_i, dx_{i+1})` rows for error-increment plots.
pub fn error_increments(reals: &[Realization]) -> Vec<(usize, usize, &Vector, &Vector)> {
    reals
        .iter()
        .enumerate()
        .flat_map(|(r, real)| {
            real.dx
                .windows(2)
                .enumerate()
                .map(move |(i, pair)| (r, i, &pair[0], &pair[1]))
        })
        .collect()
}

/// Error sample sets indexed `[step][sample]`, for steps `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledErrors {
    pub nominal: Vec<Vec<Vector>>,
    pub realized: Vec<Vec<Vector>>,
}

/// Roll the linear error recursion `e_{i+1} = A_cl,i e_i + w_i` under each
/// nominal and each index-aligned perturbed disturbance sequence.
pub fn coupled_rollouts(
    ltv: &LtvSystem,
    gains: &GainSchedule,
    nominal: &[Vec<Vector>],
    perturbed: &[Vec<Vector>],
) -> Result<CoupledErrors> {
    if nominal.len() != perturbed.len() || nominal.is_empty() {
        return Err(Error::invalid(format!(
            "coupled sample sets differ in size: {} vs {}",
            nominal.len(),
            perturbed.len()
        )));
    }
    let n = ltv.horizon();
    if nominal.iter().chain(perturbed).any(|s| s.len() != n) {
        return Err(Error::invalid(format!(
            "every disturbance sequence needs {n} entries"
        )));
    }
    let a_cl = gains.closed_loop(ltv)?;
    let paths = |seqs: &[Vec<Vector>]| -> Vec<Vec<Vector>> {
        let mut out = vec![Vec::with_capacity(seqs.len()); n + 1];
        for seq in seqs {
            let mut e = Vector::zeros(ltv.state_dim());
            out[0].push(e.clone());
            for i in 0..n {
                e = &a_cl[i] * &e + &seq[i];
                out[i + 1].push(e.clone());
            }
        }
        out
    };
    Ok(CoupledErrors {
        nominal: paths(nominal),
        realized: paths(perturbed),
    })
}

/// Move every sample by a random offset whose ground norm is at most `eps`.
pub fn perturb_samples(
    samples: &[Vec<Vector>],
    eps: f64,
    norm: GroundNorm,
    rng: &mut impl Rng,
) -> Vec<Vec<Vector>> {
    samples
        .iter()
        .map(|seq| {
            seq.iter()
                .map(|w| {
                    let dir = Vector::from_fn(w.len(), |_, _| rng.random::<f64>() * 2.0 - 1.0);
                    let len = norm.norm(&dir);
                    let scale = if len > 0.0 {
                        eps * rng.random::<f64>() / len
                    } else {
                        0.0
                    };
                    w + dir * scale
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_is_deterministic_and_bounded() {
        let s = DisturbanceSampler::new(BoxSet::from_slices(&[-1e-3, -0.1], &[1e-3, 0.1]).unwrap());
        let a = s.samples(7, 50);
        assert_eq!(a, s.samples(7, 50));
        assert_ne!(a, s.samples(8, 50));
        assert!(a.iter().all(|w| s.bounds().contains(w)));
        assert_ne!(
            s.realization_sequence(7, 0, 5),
            s.realization_sequence(7, 1, 5)
        );
    }

    #[test]
    fn sampler_must_fit_support() {
        let sup = SupportPolytope::from_box(
            &Vector::from_element(2, -0.1),
            &Vector::from_element(2, 0.1),
        )
        .unwrap();
        let inside = BoxSet::from_slices(&[-0.1, 0.0], &[0.1, 0.05]).unwrap();
        let outside = BoxSet::from_slices(&[-0.2, 0.0], &[0.1, 0.05]).unwrap();
        assert!(DisturbanceSampler::within(inside, &sup).is_ok());
        assert!(DisturbanceSampler::within(outside, &sup).is_err());
    }

    #[test]
    fn perturbations_respect_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let base = vec![vec![Vector::zeros(3); 4]; 6];
        for norm in [GroundNorm::L1, GroundNorm::Linf] {
            let p = perturb_samples(&base, 0.05, norm, &mut rng);
            assert!(p.iter().flatten().all(|w| norm.norm(w) <= 0.05 + 1e-15));
        }
    }
}
