use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{rng_for, GaussianSampler, SimTruth, SystemsError, STREAM_MEASUREMENT};
use crate::filtercore::{FilterError, StateSpaceModel};

/// Lorenz system with Euler discretization.
///
/// `damping` multiplies the `−x₂` term of the second equation: `0` gives
/// `ẋ₂ = x₁(ρ − x₃)`, `1` the classical `ẋ₂ = x₁(ρ − x₃) − x₂`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzConfig {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub dt: f64,
    pub damping: f64,
    pub steps: usize,
    pub x0: [f64; 3],
    pub meas_noise_cov: DMatrix<f64>,
}

impl LorenzConfig {
    /// σ = 28, ρ = 10, β = 8/3, T_s = 1 s, no `−x₂` term.
    ///
    /// Euler integration diverges within a few steps at this sampling period.
    pub fn paper() -> Self {
        Self {
            sigma: 28.0,
            rho: 10.0,
            beta: 8.0 / 3.0,
            dt: 1.0,
            damping: 0.0,
            steps: 4000,
            x0: [1.0, 1.0, 1.0],
            meas_noise_cov: DMatrix::identity(3, 3) * 1e-3,
        }
    }

    /// σ = 10, ρ = 28, β = 8/3 with the `−x₂` term, T_s = 0.01 s, 4000 steps.
    pub fn classical() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            dt: 0.01,
            damping: 1.0,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<(), SystemsError> {
        if !(self.dt > 0.0) {
            return Err(SystemsError::InvalidConfig(format!(
                "sampling period must be positive, got {}",
                self.dt
            )));
        }
        if self.steps == 0 {
            return Err(SystemsError::InvalidConfig(
                "steps must be at least 1".into(),
            ));
        }
        if self.meas_noise_cov.shape() != (3, 3) {
            return Err(SystemsError::InvalidConfig(
                "measurement noise covariance must be 3x3".into(),
            ));
        }
        Ok(())
    }
}

pub fn lorenz_deriv(x: &[f64], cfg: &LorenzConfig) -> [f64; 3] {
    [
        cfg.sigma * (x[1] - x[0]),
        x[0] * (cfg.rho - x[2]) - cfg.damping * x[1],
        x[0] * x[1] - cfg.beta * x[2],
    ]
}

fn euler_step(x: &[f64], cfg: &LorenzConfig) -> DVector<f64> {
    let d = lorenz_deriv(x, cfg);
    DVector::from_fn(3, |i, _| x[i] + cfg.dt * d[i])
}

/// Noise-free Euler trajectory observed as `y = x + n`.
pub fn lorenz_simulate(cfg: &LorenzConfig, seed: u64) -> Result<SimTruth, SystemsError> {
    cfg.validate()?;
    let noise = GaussianSampler::new(&cfg.meas_noise_cov)?;
    let mut meas_rng = rng_for(seed, STREAM_MEASUREMENT);
    let mut x = DVector::from_column_slice(&cfg.x0);
    let mut states = Vec::with_capacity(cfg.steps);
    let mut measurements = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        x = euler_step(x.as_slice(), cfg);
        if x.iter().any(|v| !v.is_finite()) {
            return Err(SystemsError::NonFiniteState { step });
        }
        measurements.push(&x + noise.sample(&mut meas_rng));
        states.push(x.clone());
    }
    Ok(SimTruth {
        states,
        omegas: Vec::new(),
        measurements,
        seed,
    })
}

/// The Euler-discretized system itself, observed directly.
pub fn lorenz_model(
    cfg: &LorenzConfig,
    process_noise: DMatrix<f64>,
) -> Result<StateSpaceModel, FilterError> {
    let c = cfg.clone();
    StateSpaceModel::new(
        3,
        3,
        Arc::new(move |x: &DVector<f64>| euler_step(x.as_slice(), &c)),
        Arc::new(|x: &DVector<f64>| x.clone()),
        process_noise,
        cfg.meas_noise_cov.clone(),
    )
}
