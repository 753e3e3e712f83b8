//! Experiment configuration: a versioned JSON document, validated on load
//! into ready-to-use library objects.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wdro_mpc::ambiguity::{EmpiricalDistribution, GroundNorm, SupportPolytope, WassersteinBall};
use wdro_mpc::backoff::LinearStateConstraints;
use wdro_mpc::drilqr::{DrProblem, GainMode, SolverOptions};
use wdro_mpc::model::{BoxSet, DiscreteModel, Dynamics, LinearDiscrete, MassSpring};
use wdro_mpc::ocp::SqpOptions;
use wdro_mpc::riccati::CostWeights;
use wdro_mpc::sim::DisturbanceSampler;
use wdro_mpc::{Matrix, Vector};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Row-major nested list; every row must have the same length.
type Rows = Vec<Vec<f64>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelConfig,
    pub horizon: usize,
    pub x0: Vec<f64>,
    pub weights: WeightsConfig,
    pub constraints: ConstraintsConfig,
    pub support: SupportConfig,
    pub ball: BallConfig,
    /// Box of the uniform disturbance law used by sampled centers and simulation.
    pub disturbance: BoxConfig,
    #[serde(default)]
    pub gain_mode: ModeName,
    #[serde(default)]
    pub fixed_gain: Option<Rows>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub tube: TubeConfig,
    #[serde(default)]
    pub linearization: Option<LinearizationConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    MassSpring {
        mass: f64,
        k1: f64,
        k2: f64,
        dt: f64,
    },
    Linear {
        a: Rows,
        b: Rows,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    pub q: Rows,
    pub r: Rows,
    pub qf: Rows,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintsConfig {
    pub f_mat: Rows,
    pub f: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportConfig {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polytope { h_mat: Rows, h: Vec<f64> },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub eps: f64,
    pub norm: GroundNorm,
    pub samples: SamplesConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplesConfig {
    /// `count` draws from the disturbance law seeded with `seed`.
    Sampled {
        seed: u64,
        count: usize,
    },
    /// CSV file, relative paths resolve against the config file.
    File {
        path: PathBuf,
    },
    Values {
        values: Rows,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Riccati,
    Fixed,
    Zero,
}

impl ModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::Riccati => "riccati",
            ModeName::Fixed => "fixed",
            ModeName::Zero => "zero",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub max_outer_iters: Option<usize>,
    pub tol_traj: Option<f64>,
    pub tol_beta: Option<f64>,
    #[serde(default)]
    pub sqp: SqpConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqpConfig {
    pub tol_kkt: Option<f64>,
    pub max_iter: Option<usize>,
    pub penalty: Option<f64>,
    pub max_penalty: Option<f64>,
    pub damping: Option<f64>,
    pub feasibility_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub runs: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { runs: 30, seed: 2 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeConfig {
    pub draws: usize,
    pub seed: u64,
}

impl Default for TubeConfig {
    fn default() -> Self {
        TubeConfig { draws: 20, seed: 3 }
    }
}

/// Boxes over which the second-order remainder bound is computed.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizationConfig {
    pub state: BoxConfig,
    pub input: BoxConfig,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_safety")]
    pub safety: f64,
}

fn default_grid() -> usize {
    9
}

fn default_safety() -> f64 {
    1.1
}

/// Remainder-bound settings after validation.
pub struct Linearization {
    pub state: BoxSet,
    pub input: BoxSet,
    pub grid: usize,
    pub safety: f64,
}

/// A validated experiment.
pub struct Experiment {
    pub model: Box<dyn Dynamics>,
    pub horizon: usize,
    pub x0: Vector,
    pub weights: CostWeights,
    pub cons: LinearStateConstraints,
    pub support: SupportPolytope,
    pub ball: WassersteinBall,
    pub sampler: DisturbanceSampler,
    pub gain_mode: ModeName,
    pub fixed_gain: Option<Matrix>,
    pub solver: SolverOptions,
    pub simulation: SimulationConfig,
    pub tube: TubeConfig,
    pub linearization: Option<Linearization>,
    pub output_dir: Option<PathBuf>,
}

impl Experiment {
    pub fn problem(&self) -> DrProblem<'_> {
        DrProblem {
            model: self.model.as_ref(),
            weights: &self.weights,
            cons: &self.cons,
            ball: &self.ball,
            support: &self.support,
        }
    }

    pub fn gain_mode(&self, mode: ModeName) -> Result<GainMode, CliError> {
        Ok(match mode {
            ModeName::Riccati => GainMode::Riccati,
            ModeName::Zero => GainMode::Zero,
            ModeName::Fixed => GainMode::Fixed(self.fixed_gain.clone().ok_or_else(|| {
                CliError::Config("mode `fixed` needs `fixed_gain` in the config".into())
            })?),
        })
    }

    pub fn solver_options(&self, mode: ModeName) -> Result<SolverOptions, CliError> {
        Ok(SolverOptions {
            gain_mode: self.gain_mode(mode)?,
            ..self.solver.clone()
        })
    }
}

/// 1-based line of the first occurrence of `"key"` after each preceding key
/// in `path`, for anchoring messages in the source text.
fn line_of(source: &str, path: &[&str]) -> Option<usize> {
    let mut offset = 0;
    for key in path {
        let needle = format!("\"{key}\"");
        offset += source[offset..].find(&needle)?;
    }
    Some(source[..offset].lines().count().max(1) + usize::from(source[..offset].ends_with('\n')))
}

struct Anchor<'a> {
    source: &'a str,
}

impl Anchor<'_> {
    fn err(&self, path: &[&str], msg: impl std::fmt::Display) -> CliError {
        match line_of(self.source, path) {
            Some(line) => CliError::Config(format!("line {line} (`{}`): {msg}", path.join("."))),
            None => CliError::Config(format!("`{}`: {msg}", path.join("."))),
        }
    }

    fn matrix(
        &self,
        path: &[&str],
        rows: &Rows,
        shape: (usize, usize),
    ) -> Result<Matrix, CliError> {
        let found = (rows.len(), rows.first().map_or(0, Vec::len));
        if rows.iter().any(|r| r.len() != found.1) {
            return Err(self.err(path, "rows have different lengths"));
        }
        if found != shape {
            return Err(self.err(
                path,
                format!(
                    "expected a {}x{} matrix, got {}x{}",
                    shape.0, shape.1, found.0, found.1
                ),
            ));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(self.err(path, "entries must be finite"));
        }
        Ok(Matrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
    }

    fn vector(&self, path: &[&str], v: &[f64], len: usize) -> Result<Vector, CliError> {
        if v.len() != len {
            return Err(self.err(path, format!("expected {len} entries, got {}", v.len())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(self.err(path, "entries must be finite"));
        }
        Ok(Vector::from_column_slice(v))
    }

    fn boxset(&self, path: &[&str], b: &BoxConfig, len: usize) -> Result<BoxSet, CliError> {
        let lo = self.vector(&[path, &["lower"]].concat(), &b.lower, len)?;
        let hi = self.vector(&[path, &["upper"]].concat(), &b.upper, len)?;
        BoxSet::new(lo, hi).map_err(|e| self.err(path, e))
    }
}

pub fn load(path: &Path) -> Result<Experiment, CliError> {
    let source = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse(&source, base)
}

/// Parse and validate; relative file references resolve against `base`.
pub fn parse(source: &str, base: &Path) -> Result<Experiment, CliError> {
    let cfg: ExperimentConfig = serde_json::from_str(source)
        .map_err(|e| CliError::Config(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let at = Anchor { source };
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(at.err(
            &["schema_version"],
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                cfg.schema_version
            ),
        ));
    }

    let model: Box<dyn Dynamics> = match &cfg.model {
        ModelConfig::MassSpring { mass, k1, k2, dt } => {
            if !(*mass > 0.0 && mass.is_finite() && k1.is_finite() && k2.is_finite()) {
                return Err(at.err(
                    &["model", "mass"],
                    "mass must be positive and parameters finite",
                ));
            }
            let base = MassSpring {
                mass: *mass,
                k1: *k1,
                k2: *k2,
            };
            Box::new(DiscreteModel::new(base, *dt).map_err(|e| at.err(&["model", "dt"], e))?)
        }
        ModelConfig::Linear { a, b } => {
            let nx = a.len();
            let nu = b.first().map_or(0, Vec::len);
            let a = at.matrix(&["model", "a"], a, (nx, nx))?;
            let b = at.matrix(&["model", "b"], b, (nx, nu))?;
            Box::new(LinearDiscrete::new(a, b).map_err(|e| at.err(&["model"], e))?)
        }
    };
    let (nx, nu) = (model.state_dim(), model.input_dim());

    if cfg.horizon == 0 {
        return Err(at.err(&["horizon"], "horizon must be at least 1"));
    }
    let x0 = at.vector(&["x0"], &cfg.x0, nx)?;
    let w = &cfg.weights;
    let weights = CostWeights::new(
        at.matrix(&["weights", "q"], &w.q, (nx, nx))?,
        at.matrix(&["weights", "r"], &w.r, (nu, nu))?,
        at.matrix(&["weights", "qf"], &w.qf, (nx, nx))?,
    )
    .map_err(|e| at.err(&["weights"], e))?;

    let rows = cfg.constraints.f.len();
    let cons = LinearStateConstraints::new(
        at.matrix(
            &["constraints", "f_mat"],
            &cfg.constraints.f_mat,
            (rows, nx),
        )?,
        at.vector(&["constraints", "f"], &cfg.constraints.f, rows)?,
    )
    .map_err(|e| at.err(&["constraints"], e))?;

    let support = match &cfg.support {
        SupportConfig::Box { lower, upper } => SupportPolytope::from_box(
            &at.vector(&["support", "lower"], lower, nx)?,
            &at.vector(&["support", "upper"], upper, nx)?,
        ),
        SupportConfig::Polytope { h_mat, h } => SupportPolytope::new(
            at.matrix(&["support", "h_mat"], h_mat, (h.len(), nx))?,
            at.vector(&["support", "h"], h, h.len())?,
        ),
    }
    .map_err(|e| at.err(&["support"], e))?;

    let sampler =
        DisturbanceSampler::within(at.boxset(&["disturbance"], &cfg.disturbance, nx)?, &support)
            .map_err(|e| at.err(&["disturbance"], e))?;

    let samples = match &cfg.ball.samples {
        SamplesConfig::Sampled { seed, count } => {
            if *count == 0 {
                return Err(at.err(
                    &["ball", "samples", "count"],
                    "at least one sample is required",
                ));
            }
            sampler.samples(*seed, *count)
        }
        SamplesConfig::File { path } => {
            let full = base.join(path);
            let file = fs::File::open(&full).map_err(|e| {
                at.err(
                    &["ball", "samples", "path"],
                    format!("{}: {e}", full.display()),
                )
            })?;
            wdro_mpc::io::read_samples(file, nx)
                .map_err(|e| at.err(&["ball", "samples", "path"], e))?
        }
        SamplesConfig::Values { values } => {
            at.matrix(&["ball", "samples", "values"], values, (values.len(), nx))?;
            values
                .iter()
                .map(|v| Vector::from_column_slice(v))
                .collect()
        }
    };
    let center = EmpiricalDistribution::with_support(samples, &support)
        .map_err(|e| at.err(&["ball", "samples"], e))?;
    let ball = WassersteinBall::new(center, cfg.ball.eps, cfg.ball.norm)
        .map_err(|e| at.err(&["ball", "eps"], e))?;

    let fixed_gain = match &cfg.fixed_gain {
        Some(rows) => Some(at.matrix(&["fixed_gain"], rows, (nu, nx))?),
        None => None,
    };
    if cfg.gain_mode == ModeName::Fixed && fixed_gain.is_none() {
        return Err(at.err(&["gain_mode"], "mode `fixed` needs `fixed_gain`"));
    }

    let defaults = SolverOptions::default();
    let s = &cfg.solver;
    let q = &s.sqp;
    let solver = SolverOptions {
        max_outer_iters: s.max_outer_iters.unwrap_or(defaults.max_outer_iters),
        tol_traj: s.tol_traj.unwrap_or(defaults.tol_traj),
        tol_beta: s.tol_beta.unwrap_or(defaults.tol_beta),
        gain_mode: GainMode::Riccati,
        sqp: SqpOptions {
            tol_kkt: q.tol_kkt.unwrap_or(defaults.sqp.tol_kkt),
            max_iter: q.max_iter.unwrap_or(defaults.sqp.max_iter),
            penalty: q.penalty.unwrap_or(defaults.sqp.penalty),
            max_penalty: q.max_penalty.unwrap_or(defaults.sqp.max_penalty),
            damping: q.damping.unwrap_or(defaults.sqp.damping),
            feasibility_tol: q.feasibility_tol.unwrap_or(defaults.sqp.feasibility_tol),
        },
    };
    if solver.max_outer_iters == 0 || !(solver.tol_traj > 0.0 && solver.tol_beta > 0.0) {
        return Err(at.err(&["solver"], "iteration cap and tolerances must be positive"));
    }
    if !(solver.sqp.penalty > 0.0 && solver.sqp.max_penalty >= solver.sqp.penalty) {
        return Err(at.err(&["solver", "sqp"], "need 0 < penalty <= max_penalty"));
    }
    if cfg.simulation.runs == 0 {
        return Err(at.err(&["simulation", "runs"], "at least one run is required"));
    }

    let linearization = match &cfg.linearization {
        Some(l) => {
            if l.grid < 2 || l.safety.is_nan() || l.safety < 1.0 {
                return Err(at.err(&["linearization"], "grid must be >= 2 and safety >= 1"));
            }
            Some(Linearization {
                state: at.boxset(&["linearization", "state"], &l.state, nx)?,
                input: at.boxset(&["linearization", "input"], &l.input, nu)?,
                grid: l.grid,
                safety: l.safety,
            })
        }
        None => None,
    };

    Ok(Experiment {
        model,
        horizon: cfg.horizon,
        x0,
        weights,
        cons,
        support,
        ball,
        sampler,
        gain_mode: cfg.gain_mode,
        fixed_gain,
        solver,
        simulation: cfg.simulation,
        tube: cfg.tube,
        linearization,
        output_dir: cfg.output_dir,
    })
}
