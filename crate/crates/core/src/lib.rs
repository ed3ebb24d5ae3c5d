//! Augmented physics-based models (APBMs) for nonlinear Bayesian filtering.
//!
//! A physics state-space model is fused with a small ReLU network whose flat
//! parameter vector is stacked under the physical state and estimated jointly
//! by a third-degree cubature Kalman filter. A pseudo-measurement of the
//! parameters with covariance `(1/λ)·I` controls how far the network is
//! allowed to pull the dynamics away from the physics.
//!
//! Modules:
//! - [`filtercore`]: Cholesky with jitter, cubature rule, Gaussian predict/update.
//! - [`mlp`]: feed-forward network evaluated from a flat parameter vector.
//! - [`apbm`]: augmented state-space model over `z = [x; θ]`.
//! - [`systems`]: Lorenz and target-tracking simulators and baseline models.

// `!(x >= 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apbm;
pub mod filtercore;
pub mod mlp;
pub mod systems;

pub use apbm::{ApbmConfig, ApbmError, AugmentedModel, Combiner};
pub use filtercore::{FilterError, GaussianBelief, StateSpaceModel};
pub use mlp::{MlpError, MlpParams, MlpSpec};
