//! Ground-truth simulators, measurement models, and physics-only baselines
//! for the Lorenz and target-tracking experiments.

mod lorenz;
mod noise;
mod tracking;

pub use lorenz::{lorenz_deriv, lorenz_model, lorenz_simulate, LorenzConfig};
pub use noise::GaussianSampler;
pub use tracking::{
    coordinated_turn_matrix, ct_matrix, cv_matrix, cv_model, rss_bearing_measure,
    tracking_simulate, turn_matrix, RssBearingSensor, TrackingConfig, TurnModel,
};

use nalgebra::DVector;
use thiserror::Error;

use crate::filtercore::FilterError;

/// RNG stream carrying process noise.
pub const STREAM_PROCESS: u64 = 0;
/// RNG stream carrying measurement noise.
pub const STREAM_MEASUREMENT: u64 = 1;
/// RNG stream reserved for drawing initial filter estimates.
pub const STREAM_INIT: u64 = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemsError {
    #[error("state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("target is collocated with the sensor")]
    SensorCollocated,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Simulated ground truth and measurements for `k = 1..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub states: Vec<DVector<f64>>,
    /// Turn rate per step; empty for systems without one.
    pub omegas: Vec<f64>,
    pub measurements: Vec<DVector<f64>>,
    pub seed: u64,
}

impl SimTruth {
    pub fn steps(&self) -> usize {
        self.states.len()
    }
}

/// Seeded generator for one named noise stream of a run.
pub fn rng_for(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
