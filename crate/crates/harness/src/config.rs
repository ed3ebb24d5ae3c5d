//! Experiment configuration and its TOML file form.

use std::path::Path;

use apbm_core::systems::{LorenzConfig, TrackingConfig, TurnModel};
use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Lorenz,
    Tracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Tracking defaults; for Lorenz, the original system at a one-second Euler step.
    Paper,
    /// Lorenz only: σ = 10, ρ = 28, β = 8/3 at T_s = 0.01 s.
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Physics model augmented with a network, one filter per λ.
    Apbm,
    /// Constant-velocity baseline (tracking).
    Cv,
    /// Filter using the exact simulator dynamics (Lorenz).
    TrueModel,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Apbm => "apbm",
            Method::Cv => "cv",
            Method::TrueModel => "true_model",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "apbm" => Some(Method::Apbm),
            "cv" => Some(Method::Cv),
            "true_model" => Some(Method::TrueModel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TurnModelName {
    CoordinatedTurn,
    Verbatim,
}

impl From<TurnModelName> for TurnModel {
    fn from(t: TurnModelName) -> Self {
        match t {
            TurnModelName::CoordinatedTurn => TurnModel::CoordinatedTurn,
            TurnModelName::Verbatim => TurnModel::Verbatim,
        }
    }
}

/// Filter-side settings shared by every method of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    /// Diagonal of `Q^x`.
    pub process_var: f64,
    /// Diagonal of the initial state covariance; also the spread of the
    /// initial-estimate draw around the true `x₀`.
    pub init_var: Vec<f64>,
    pub theta_process_var: f64,
    pub theta0_var: f64,
    pub hidden_units: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Tracking(TrackingConfig),
    Lorenz(LorenzConfig),
}

impl Scenario {
    pub fn state_dim(&self) -> usize {
        match self {
            Scenario::Tracking(_) => 4,
            Scenario::Lorenz(_) => 3,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Scenario::Tracking(c) => c.steps,
            Scenario::Lorenz(c) => c.steps,
        }
    }

    pub fn x0(&self) -> Vec<f64> {
        match self {
            Scenario::Tracking(c) => c.x0.to_vec(),
            Scenario::Lorenz(c) => c.x0.to_vec(),
        }
    }

    /// State components entering the RMSE.
    pub fn error_dims(&self) -> &'static [usize] {
        match self {
            Scenario::Tracking(_) => &[0, 2],
            Scenario::Lorenz(_) => &[0, 1, 2],
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub preset: Preset,
    pub n_runs: usize,
    pub base_seed: u64,
    pub lambda_grid: Vec<f64>,
    pub methods: Vec<Method>,
    /// Runs whose per-step trajectories are written out.
    pub trajectory_runs: Vec<usize>,
    pub filter: FilterSettings,
    pub scenario: Scenario,
}

pub const DEFAULT_RUNS: usize = 100;
pub const TRACKING_LAMBDAS: [f64; 5] = [0.0, 0.01, 0.1, 10.0, 1e6];

/// Simulated tracking scenario used by the `paper` preset.
///
/// The target starts at rest at position `(100, 100)` and is driven by the
/// coordinated-turn matrix; the turn rate starts at 0.05 rad/s. The
/// `F + G(Ω)` transition roughly doubles the velocity each step and is only
/// available through `TurnModel::Verbatim`.
pub fn tracking_paper() -> TrackingConfig {
    TrackingConfig::default()
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment, preset: Preset) -> Result<Self, ConfigError> {
        let cfg = match experiment {
            Experiment::Tracking => {
                if preset != Preset::Paper {
                    return Err(ConfigError::Invalid(
                        "the tracking experiment only has the paper preset".into(),
                    ));
                }
                Self {
                    experiment,
                    preset,
                    n_runs: DEFAULT_RUNS,
                    base_seed: 0,
                    lambda_grid: TRACKING_LAMBDAS.to_vec(),
                    methods: vec![Method::Cv, Method::Apbm],
                    trajectory_runs: vec![0],
                    filter: FilterSettings {
                        process_var: 0.1,
                        init_var: vec![0.1, 0.1, 0.01, 0.01],
                        theta_process_var: apbm_core::apbm::DEFAULT_THETA_PROCESS_VAR,
                        theta0_var: apbm_core::apbm::DEFAULT_THETA0_VAR,
                        hidden_units: 5,
                    },
                    scenario: Scenario::Tracking(tracking_paper()),
                }
            }
            Experiment::Lorenz => Self {
                experiment,
                preset,
                n_runs: DEFAULT_RUNS,
                base_seed: 0,
                lambda_grid: vec![0.0],
                methods: vec![Method::TrueModel, Method::Apbm],
                trajectory_runs: vec![0],
                filter: FilterSettings {
                    process_var: 1e-4,
                    init_var: vec![0.1; 3],
                    theta_process_var: apbm_core::apbm::DEFAULT_THETA_PROCESS_VAR,
                    theta0_var: apbm_core::apbm::DEFAULT_THETA0_VAR,
                    hidden_units: 5,
                },
                scenario: Scenario::Lorenz(match preset {
                    Preset::Paper => LorenzConfig::paper(),
                    Preset::Classical => LorenzConfig::classical(),
                }),
            },
        };
        Ok(cfg)
    }

    pub fn steps(&self) -> usize {
        self.scenario.steps()
    }

    pub fn set_steps(&mut self, steps: usize) {
        match &mut self.scenario {
            Scenario::Tracking(c) => c.steps = steps,
            Scenario::Lorenz(c) => c.steps = steps,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.n_runs == 0 {
            return bad("n_runs must be at least 1".into());
        }
        if self.steps() == 0 {
            return bad("steps must be at least 1".into());
        }
        if let Some(l) = self.lambda_grid.iter().find(|l| l.is_nan() || **l < 0.0) {
            return bad(format!("lambda values must be nonnegative, got {l}"));
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let mut seen = self.methods.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return bad("methods must not repeat".into());
        }
        let allowed: &[Method] = match self.experiment {
            Experiment::Tracking => &[Method::Apbm, Method::Cv],
            Experiment::Lorenz => &[Method::Apbm, Method::TrueModel],
        };
        if let Some(m) = self.methods.iter().find(|m| !allowed.contains(m)) {
            return bad(format!(
                "method {} is not available for this experiment",
                m.name()
            ));
        }
        if self.methods.contains(&Method::Apbm) {
            if self.lambda_grid.is_empty() {
                return bad("apbm needs a nonempty lambda_grid".into());
            }
            if self.experiment == Experiment::Lorenz && self.lambda_grid.iter().any(|l| *l != 0.0) {
                return bad(
                    "the Lorenz network replaces a state equation and has no anchor; only lambda = 0 is valid"
                        .into(),
                );
            }
        }
        let n = self.scenario.state_dim();
        if self.filter.init_var.len() != n {
            return bad(format!("init_var needs {n} entries"));
        }
        let f = &self.filter;
        let vars = f
            .init_var
            .iter()
            .chain([&f.process_var, &f.theta_process_var, &f.theta0_var]);
        if vars.clone().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("variances must be finite and nonnegative".into());
        }
        if f.hidden_units == 0 {
            return bad("hidden_units must be positive".into());
        }
        if let Some(r) = self.trajectory_runs.iter().find(|r| **r >= self.n_runs) {
            return bad(format!("trajectory run {r} is out of range"));
        }
        match &self.scenario {
            Scenario::Tracking(c) => c.validate(),
            Scenario::Lorenz(c) => c.validate(),
        }
        .map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let file: ConfigFile = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        file.resolve()
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }
}

/// On-disk form; every field except `experiment` is optional.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Experiment,
    preset: Option<Preset>,
    n_runs: Option<usize>,
    steps: Option<usize>,
    base_seed: Option<u64>,
    lambda_grid: Option<Vec<f64>>,
    methods: Option<Vec<Method>>,
    trajectory_runs: Option<Vec<usize>>,
    #[serde(default)]
    filter: FilterFile,
    tracking: Option<TrackingFile>,
    lorenz: Option<LorenzFile>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterFile {
    process_var: Option<f64>,
    init_var: Option<Vec<f64>>,
    theta_process_var: Option<f64>,
    theta0_var: Option<f64>,
    hidden_units: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackingFile {
    x0: Option<[f64; 4]>,
    omega0: Option<f64>,
    u_var: Option<f64>,
    v_var: Option<f64>,
    meas_var: Option<[f64; 2]>,
    turn_model: Option<TurnModelName>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LorenzFile {
    x0: Option<[f64; 3]>,
    meas_var: Option<f64>,
}

impl ConfigFile {
    fn resolve(self) -> Result<ExperimentConfig, ConfigError> {
        let preset = self.preset.unwrap_or(match self.experiment {
            Experiment::Tracking => Preset::Paper,
            Experiment::Lorenz => Preset::Classical,
        });
        let mut cfg = ExperimentConfig::defaults(self.experiment, preset)?;
        if let Some(v) = self.n_runs {
            cfg.n_runs = v;
        }
        if let Some(v) = self.steps {
            cfg.set_steps(v);
        }
        if let Some(v) = self.base_seed {
            cfg.base_seed = v;
        }
        if let Some(v) = self.lambda_grid {
            cfg.lambda_grid = v;
        }
        if let Some(v) = self.methods {
            cfg.methods = v;
        }
        if let Some(v) = self.trajectory_runs {
            cfg.trajectory_runs = v;
        }
        let f = &mut cfg.filter;
        let ff = self.filter;
        f.process_var = ff.process_var.unwrap_or(f.process_var);
        f.init_var = ff.init_var.unwrap_or(std::mem::take(&mut f.init_var));
        f.theta_process_var = ff.theta_process_var.unwrap_or(f.theta_process_var);
        f.theta0_var = ff.theta0_var.unwrap_or(f.theta0_var);
        f.hidden_units = ff.hidden_units.unwrap_or(f.hidden_units);

        match (&mut cfg.scenario, self.tracking, self.lorenz) {
            (_, Some(_), Some(_)) => {
                return Err(ConfigError::Invalid(
                    "only the table matching the experiment may be given".into(),
                ))
            }
            (Scenario::Tracking(c), t, None) => {
                if let Some(t) = t {
                    apply_tracking(c, t);
                }
            }
            (Scenario::Lorenz(c), None, l) => {
                if let Some(l) = l {
                    if let Some(x0) = l.x0 {
                        c.x0 = x0;
                    }
                    if let Some(v) = l.meas_var {
                        c.meas_noise_cov = DMatrix::identity(3, 3) * v;
                    }
                }
            }
            _ => {
                return Err(ConfigError::Invalid(
                    "scenario table does not match the experiment".into(),
                ))
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn apply_tracking(c: &mut TrackingConfig, t: TrackingFile) {
    if let Some(x0) = t.x0 {
        c.x0 = x0;
    }
    if let Some(w) = t.omega0 {
        c.omega0 = w;
    }
    if let Some(u) = t.u_var {
        c.u_cov = DMatrix::identity(4, 4) * u;
    }
    if let Some(v) = t.v_var {
        c.v_var = v;
    }
    if let Some([a, b]) = t.meas_var {
        c.meas_noise_cov = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![a, b]));
    }
    if let Some(m) = t.turn_model {
        c.turn_model = m.into();
    }
}
