//! Per-step RMSE and mean parameter-variance curves over Monte Carlo runs.

use nalgebra::DVector;
use thiserror::Error;

use crate::config::Method;
use crate::runner::MonteCarloOutput;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no records to reduce")]
    EmptyRecords,
    #[error("no parameter snapshots in the records")]
    MissingThetaSnapshots,
    #[error("run {run} has {got} steps, expected {expected}")]
    LengthMismatch {
        run: usize,
        expected: usize,
        got: usize,
    },
    #[error("sample variance needs at least two parameters, got {0}")]
    TooFewParameters(usize),
}

/// One run's truth and estimates, step by step.
pub type RunPair<'a> = (&'a [DVector<f64>], &'a [DVector<f64>]);

/// `RMSE_k = sqrt(Σ_r ‖p_k − p̂_k‖² / (d·N))` over the components in `dims`.
///
/// Each run is a `(truth, estimates)` pair of equal-length step sequences.
pub fn rmse_curve(runs: &[RunPair<'_>], dims: &[usize]) -> Result<Vec<f64>, MetricsError> {
    let (first, _) = runs.first().ok_or(MetricsError::EmptyRecords)?;
    let steps = first.len();
    let mut sums = vec![0.0; steps];
    for (run, (truth, est)) in runs.iter().enumerate() {
        for got in [truth.len(), est.len()] {
            if got != steps {
                return Err(MetricsError::LengthMismatch {
                    run,
                    expected: steps,
                    got,
                });
            }
        }
        for (k, (t, e)) in truth.iter().zip(est.iter()).enumerate() {
            sums[k] += dims.iter().map(|&i| (t[i] - e[i]).powi(2)).sum::<f64>();
        }
    }
    let denom = (dims.len() * runs.len()) as f64;
    Ok(sums.into_iter().map(|s| (s / denom).sqrt()).collect())
}

/// Sample variance (divisor `P − 1`) across the entries of one vector.
pub fn sample_variance(theta: &DVector<f64>) -> Result<f64, MetricsError> {
    let p = theta.len();
    if p < 2 {
        return Err(MetricsError::TooFewParameters(p));
    }
    // Shifted by the first entry so a constant vector gives exactly zero.
    let shift = theta[0];
    let (s1, s2) = theta
        .iter()
        .map(|v| v - shift)
        .fold((0.0, 0.0), |(a, b), d| (a + d, b + d * d));
    Ok(((s2 - s1 * s1 / p as f64) / (p - 1) as f64).max(0.0))
}

/// `E[Var(θ_k)]`: per-run sample variance across the parameter entries,
/// averaged over runs at each step.
pub fn weight_variance_curve(runs: &[&[DVector<f64>]]) -> Result<Vec<f64>, MetricsError> {
    let first = runs.first().ok_or(MetricsError::EmptyRecords)?;
    if first.is_empty() {
        return Err(MetricsError::MissingThetaSnapshots);
    }
    let steps = first.len();
    let mut sums = vec![0.0; steps];
    for (run, thetas) in runs.iter().enumerate() {
        if thetas.len() != steps {
            return Err(MetricsError::LengthMismatch {
                run,
                expected: steps,
                got: thetas.len(),
            });
        }
        for (k, theta) in thetas.iter().enumerate() {
            sums[k] += sample_variance(theta)?;
        }
    }
    let n = runs.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmseSeries {
    pub method: Method,
    pub lambda: Option<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceSeries {
    pub lambda: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Summary {
    pub rmse: Vec<RmseSeries>,
    pub theta_var: Vec<VarianceSeries>,
}

impl Summary {
    pub fn rmse_for(&self, method: Method, lambda: Option<f64>) -> Option<&[f64]> {
        self.rmse
            .iter()
            .find(|s| s.method == method && s.lambda == lambda)
            .map(|s| s.values.as_slice())
    }

    pub fn theta_var_for(&self, lambda: f64) -> Option<&[f64]> {
        self.theta_var
            .iter()
            .find(|s| s.lambda == lambda)
            .map(|s| s.values.as_slice())
    }
}

/// Reduces every filter of an experiment over its successful runs.
pub fn summarize(out: &MonteCarloOutput) -> Result<Summary, MetricsError> {
    let dims = out.config.scenario.error_dims();
    let mut summary = Summary::default();
    for (i, spec) in out.specs.iter().enumerate() {
        let ok: Vec<_> = out
            .records
            .iter()
            .filter_map(|r| {
                let t = &r.traces[i];
                match (&r.truth, t.status.is_ok()) {
                    (Some(truth), true) => Some((truth, t)),
                    _ => None,
                }
            })
            .collect();
        let pairs: Vec<_> = ok
            .iter()
            .map(|(truth, t)| (truth.states.as_slice(), t.estimates.as_slice()))
            .collect();
        summary.rmse.push(RmseSeries {
            method: spec.method,
            lambda: spec.lambda,
            values: rmse_curve(&pairs, dims)?,
        });
        if let (Method::Apbm, Some(lambda)) = (spec.method, spec.lambda) {
            let thetas: Vec<_> = ok.iter().map(|(_, t)| t.thetas.as_slice()).collect();
            summary.theta_var.push(VarianceSeries {
                lambda,
                values: weight_variance_curve(&thetas)?,
            });
        }
    }
    Ok(summary)
}
