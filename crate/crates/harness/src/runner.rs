//! Monte Carlo runner: simulate, filter every configured method on the same
//! measurements, and keep per-step estimates and parameter snapshots.

use apbm_core::apbm::{apbm_step, build_augmented_model, ApbmConfig, AugmentedModel};
use apbm_core::filtercore::{predict, update, GaussianBelief};
use apbm_core::systems::{
    cv_model, lorenz_model, lorenz_simulate, rng_for, tracking_simulate, GaussianSampler, SimTruth,
    STREAM_INIT,
};
use apbm_core::{MlpSpec, StateSpaceModel};
use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ExperimentConfig, Method, Scenario};
use crate::exec::{map_indexed, ExecError, Execution};

/// Largest tolerated fraction of failed runs per method.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("building filter {label}: {reason}")]
    Build { label: String, reason: String },
    #[error(
        "{failed} of {total} runs failed for {label} (first: run {first_run}: {first_reason})"
    )]
    TooManyFailures {
        label: String,
        failed: usize,
        total: usize,
        first_run: usize,
        first_reason: String,
    },
    #[error(transparent)]
    Exec(#[from] ExecError),
}

/// One filter configuration: a method, plus `λ` for the APBM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub method: Method,
    pub lambda: Option<f64>,
}

impl FilterSpec {
    pub fn label(&self) -> String {
        match self.lambda {
            Some(l) => format!("{}_lambda_{l}", self.method.name()),
            None => self.method.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Ok,
    Failed { step: usize, reason: String },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

/// Output of one filter over one run; estimates are after the update at
/// `k = 1..=steps` and are empty when the run failed.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodTrace {
    pub spec: FilterSpec,
    pub status: RunStatus,
    pub estimates: Vec<DVector<f64>>,
    /// Parameter mean after each update; empty for physics-only filters.
    pub thetas: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    /// `None` when the simulation itself failed.
    pub truth: Option<SimTruth>,
    /// SHA-256 of the measurement stream every method consumed.
    pub measurement_hash: [u8; 32],
    pub traces: Vec<MethodTrace>,
}

#[derive(Debug, Clone)]
pub struct MonteCarloOutput {
    pub config: ExperimentConfig,
    pub specs: Vec<FilterSpec>,
    /// Sorted by run index.
    pub records: Vec<RunRecord>,
}

impl MonteCarloOutput {
    pub fn failures(&self, spec_index: usize) -> usize {
        self.records
            .iter()
            .filter(|r| !r.traces[spec_index].status.is_ok())
            .count()
    }
}

enum FilterKind {
    Plain(StateSpaceModel),
    Augmented(Box<AugmentedModel>, ApbmConfig),
}

struct PreparedFilter {
    spec: FilterSpec,
    kind: FilterKind,
}

/// Filters in output order: baselines in configured order, then one APBM
/// per `λ` in grid order wherever `apbm` appears.
pub fn filter_specs(cfg: &ExperimentConfig) -> Vec<FilterSpec> {
    let mut specs = Vec::new();
    for &method in &cfg.methods {
        match method {
            Method::Apbm => specs.extend(cfg.lambda_grid.iter().map(|&l| FilterSpec {
                method,
                lambda: Some(l),
            })),
            _ => specs.push(FilterSpec {
                method,
                lambda: None,
            }),
        }
    }
    specs
}

fn physics_model(cfg: &ExperimentConfig) -> Result<StateSpaceModel, String> {
    let n = cfg.scenario.state_dim();
    let q = DMatrix::identity(n, n) * cfg.filter.process_var;
    match &cfg.scenario {
        Scenario::Tracking(t) => cv_model(t.dt, q, t.meas_noise_cov.clone(), t.sensor),
        Scenario::Lorenz(l) => lorenz_model(l, q),
    }
    .map_err(|e| e.to_string())
}

fn prepare(cfg: &ExperimentConfig, spec: FilterSpec) -> Result<PreparedFilter, RunnerError> {
    let build_err = |reason: String| RunnerError::Build {
        label: spec.label(),
        reason,
    };
    let physics = physics_model(cfg).map_err(build_err)?;
    let n = cfg.scenario.state_dim();
    let kind = match spec.method {
        Method::Cv | Method::TrueModel => FilterKind::Plain(physics),
        Method::Apbm => {
            let lambda = spec.lambda.unwrap_or(0.0);
            let (nn, apbm_cfg) = match &cfg.scenario {
                Scenario::Tracking(_) => {
                    let nn = MlpSpec::new(vec![n, cfg.filter.hidden_units, n])
                        .map_err(|e| build_err(e.to_string()))?;
                    let c = ApbmConfig::additive(&nn, lambda);
                    (nn, c)
                }
                Scenario::Lorenz(_) => {
                    let nn = MlpSpec::new(vec![n, cfg.filter.hidden_units, 1])
                        .map_err(|e| build_err(e.to_string()))?;
                    let c = ApbmConfig::replace(&nn, vec![0]);
                    (nn, c)
                }
            };
            let apbm_cfg =
                apbm_cfg.with_theta_noise(cfg.filter.theta_process_var, cfg.filter.theta0_var);
            let aug = build_augmented_model(&physics, &nn, &apbm_cfg)
                .map_err(|e| build_err(e.to_string()))?;
            FilterKind::Augmented(Box::new(aug), apbm_cfg)
        }
    };
    Ok(PreparedFilter { spec, kind })
}

pub fn measurement_hash(measurements: &[DVector<f64>]) -> [u8; 32] {
    let mut h = Sha256::new();
    for y in measurements {
        for v in y.iter() {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

fn simulate(cfg: &ExperimentConfig, seed: u64) -> Result<SimTruth, String> {
    match &cfg.scenario {
        Scenario::Tracking(t) => tracking_simulate(t, seed),
        Scenario::Lorenz(l) => lorenz_simulate(l, seed),
    }
    .map_err(|e| e.to_string())
}

/// Initial estimate drawn around the true `x₀` on the run's init stream.
fn initial_estimate(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(DVector<f64>, DMatrix<f64>), String> {
    let p0 = DMatrix::from_diagonal(&DVector::from_column_slice(&cfg.filter.init_var));
    let sampler = GaussianSampler::new(&p0).map_err(|e| e.to_string())?;
    let mut rng = rng_for(seed, STREAM_INIT);
    let x0 = DVector::from_vec(cfg.scenario.x0()) + sampler.sample(&mut rng);
    Ok((x0, p0))
}

fn failed(spec: FilterSpec, step: usize, reason: String) -> MethodTrace {
    MethodTrace {
        spec,
        status: RunStatus::Failed { step, reason },
        estimates: Vec::new(),
        thetas: Vec::new(),
    }
}

fn run_filter(
    filter: &PreparedFilter,
    x0: &DVector<f64>,
    p0: &DMatrix<f64>,
    measurements: &[DVector<f64>],
    expected_hash: &[u8; 32],
) -> MethodTrace {
    let spec = filter.spec;
    let mut estimates = Vec::with_capacity(measurements.len());
    let mut thetas = Vec::new();
    let mut hasher = Sha256::new();
    let result: Result<(), (usize, String)> = (|| {
        match &filter.kind {
            FilterKind::Plain(model) => {
                let mut b =
                    GaussianBelief::new(x0.clone(), p0.clone()).map_err(|e| (0, e.to_string()))?;
                for (k, y) in measurements.iter().enumerate() {
                    y.iter().for_each(|v| hasher.update(v.to_le_bytes()));
                    b = predict(&b, model)
                        .and_then(|p| update(&p, model, y))
                        .map_err(|e| (k + 1, e.to_string()))?;
                    estimates.push(b.mean().clone());
                }
            }
            FilterKind::Augmented(aug, apbm_cfg) => {
                thetas.reserve(measurements.len());
                let mut b = aug
                    .initial_belief(x0, p0, apbm_cfg)
                    .map_err(|e| (0, e.to_string()))?;
                for (k, y) in measurements.iter().enumerate() {
                    y.iter().for_each(|v| hasher.update(v.to_le_bytes()));
                    b = apbm_step(&b, aug, y).map_err(|e| (k + 1, e.to_string()))?;
                    estimates.push(aug.state_part(&b));
                    thetas.push(aug.theta_part(&b));
                }
            }
        }
        Ok(())
    })();
    if let Err((step, reason)) = result {
        return failed(spec, step, reason);
    }
    if let Some(k) = estimates
        .iter()
        .position(|e| e.iter().any(|v| !v.is_finite()))
    {
        return failed(spec, k + 1, "non-finite estimate".into());
    }
    let consumed: [u8; 32] = hasher.finalize().into();
    if &consumed != expected_hash {
        return failed(spec, 0, "measurement stream differs from the run's".into());
    }
    MethodTrace {
        spec,
        status: RunStatus::Ok,
        estimates,
        thetas,
    }
}

fn run_one(cfg: &ExperimentConfig, filters: &[PreparedFilter], run: usize) -> RunRecord {
    let seed = cfg.base_seed + run as u64;
    let all_failed = |reason: String| RunRecord {
        run,
        seed,
        truth: None,
        measurement_hash: [0; 32],
        traces: filters
            .iter()
            .map(|f| failed(f.spec, 0, reason.clone()))
            .collect(),
    };
    let truth = match simulate(cfg, seed) {
        Ok(t) => t,
        Err(e) => return all_failed(format!("simulation: {e}")),
    };
    let (x0, p0) = match initial_estimate(cfg, seed) {
        Ok(v) => v,
        Err(e) => return all_failed(format!("initial estimate: {e}")),
    };
    let hash = measurement_hash(&truth.measurements);
    let traces = filters
        .iter()
        .map(|f| run_filter(f, &x0, &p0, &truth.measurements, &hash))
        .collect();
    RunRecord {
        run,
        seed,
        truth: Some(truth),
        measurement_hash: hash,
        traces,
    }
}

/// Executes every run of `cfg` and enforces the failure threshold.
/// Results do not depend on `exec`.
pub fn run_monte_carlo(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<MonteCarloOutput, RunnerError> {
    let out = run_all(cfg, exec)?;
    check_failures(&out)?;
    Ok(out)
}

/// Executes every run of `cfg`, keeping failed runs in the records.
pub fn run_all(cfg: &ExperimentConfig, exec: Execution) -> Result<MonteCarloOutput, RunnerError> {
    cfg.validate()?;
    let specs = filter_specs(cfg);
    let filters = specs
        .iter()
        .map(|s| prepare(cfg, *s))
        .collect::<Result<Vec<_>, _>>()?;
    let records = map_indexed(exec, cfg.n_runs, |r| run_one(cfg, &filters, r))?;
    Ok(MonteCarloOutput {
        config: cfg.clone(),
        specs,
        records,
    })
}

/// Errors when any filter failed in more than [`MAX_FAILURE_FRACTION`] of
/// the runs.
pub fn check_failures(out: &MonteCarloOutput) -> Result<(), RunnerError> {
    let total = out.records.len();
    for (i, spec) in out.specs.iter().enumerate() {
        let failed = out.failures(i);
        if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
            let (first_run, first_reason) = out
                .records
                .iter()
                .find_map(|r| match &r.traces[i].status {
                    RunStatus::Failed { step, reason } => {
                        Some((r.run, format!("step {step}: {reason}")))
                    }
                    RunStatus::Ok => None,
                })
                .unwrap_or_default();
            return Err(RunnerError::TooManyFailures {
                label: spec.label(),
                failed,
                total,
                first_run,
                first_reason,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Experiment, Preset};

    fn small(experiment: Experiment, preset: Preset) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::defaults(experiment, preset).unwrap();
        cfg.n_runs = 3;
        cfg.set_steps(25);
        cfg
    }

    #[test]
    fn specs_expand_lambda_grid() {
        let cfg = small(Experiment::Tracking, Preset::Paper);
        let labels: Vec<_> = filter_specs(&cfg).iter().map(FilterSpec::label).collect();
        assert_eq!(
            labels,
            [
                "cv",
                "apbm_lambda_0",
                "apbm_lambda_0.01",
                "apbm_lambda_0.1",
                "apbm_lambda_10",
                "apbm_lambda_1000000"
            ]
        );
    }

    #[test]
    fn tracking_run_records_everything() {
        let mut cfg = small(Experiment::Tracking, Preset::Paper);
        cfg.lambda_grid = vec![0.1];
        let out = run_monte_carlo(&cfg, Execution::Sequential).unwrap();
        assert_eq!(out.records.len(), 3);
        for (r, rec) in out.records.iter().enumerate() {
            assert_eq!(rec.run, r);
            assert_eq!(rec.seed, r as u64);
            let truth = rec.truth.as_ref().unwrap();
            assert_eq!(rec.measurement_hash, measurement_hash(&truth.measurements));
            for t in &rec.traces {
                assert!(t.status.is_ok());
                assert_eq!(t.estimates.len(), 25);
            }
            assert!(rec.traces[0].thetas.is_empty());
            assert_eq!(rec.traces[1].thetas.len(), 25);
            assert_eq!(rec.traces[1].thetas[0].len(), 49);
        }
    }

    #[test]
    fn baselines_only_emit_no_theta() {
        let mut cfg = small(Experiment::Tracking, Preset::Paper);
        cfg.methods = vec![Method::Cv];
        let out = run_monte_carlo(&cfg, Execution::Sequential).unwrap();
        assert!(out
            .records
            .iter()
            .all(|r| r.traces.iter().all(|t| t.thetas.is_empty())));
    }

    #[test]
    fn runs_share_init_draw_across_methods() {
        let mut cfg = small(Experiment::Lorenz, Preset::Classical);
        cfg.set_steps(1);
        let (a, _) = initial_estimate(&cfg, 4).unwrap();
        let (b, _) = initial_estimate(&cfg, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, initial_estimate(&cfg, 5).unwrap().0);
    }

    #[test]
    fn diverging_simulation_is_a_hard_error() {
        let cfg = small(Experiment::Lorenz, Preset::Paper);
        let err = run_monte_carlo(&cfg, Execution::Sequential).unwrap_err();
        assert!(matches!(
            err,
            RunnerError::TooManyFailures {
                failed: 3,
                total: 3,
                ..
            }
        ));
    }
}
