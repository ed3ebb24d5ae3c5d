//! Augmented state-space model over `z = [x; θ]`.
//!
//! The network parameters follow a random walk, the physical state evolves
//! through a [`Combiner`] of the physics transition and the network, and the
//! measurement vector is extended with a pseudo-observation `θ̄` of the
//! parameters whose noise covariance `(1/λ)·I` sets the regularization.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::filtercore::{self, FilterError, GaussianBelief, StateSpaceModel, VectorFn};
use crate::mlp::{self, MlpError, MlpSpec};

/// Value substituted for `λ = +∞`.
pub const LAMBDA_CLAMP: f64 = 1e12;

/// Default random-walk variance of each parameter.
pub const DEFAULT_THETA_PROCESS_VAR: f64 = 1e-4;

/// Default initial variance of each parameter.
pub const DEFAULT_THETA0_VAR: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ApbmError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("lambda must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("no anchor parameter vector exists for component replacement")]
    NoAnchorExists,
    #[error("replaced component index {index} out of range for state dimension {dim}")]
    ComponentOutOfRange { index: usize, dim: usize },
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// How the network output `γ(x; θ)` is fused with the physics transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Combiner {
    /// `g = f(x) + γ(x; θ)`, with `γ` producing a full state vector.
    Additive,
    /// Listed components evolve as `x_i + γ_i(x; θ)`; the rest follow `f`.
    ReplaceComponents(Vec<usize>),
}

impl Combiner {
    fn network_output_dim(&self, state_dim: usize) -> usize {
        match self {
            Combiner::Additive => state_dim,
            Combiner::ReplaceComponents(idx) => idx.len(),
        }
    }
}

/// Parameter vector at which the augmented model reduces to the physics.
///
/// A ReLU/linear network with all weights and biases zero outputs zero
/// everywhere, so for the additive combiner the anchor is `θ̄ = 0`.
pub fn anchor_theta_bar(combiner: &Combiner, nn: &MlpSpec) -> Result<DVector<f64>, ApbmError> {
    match combiner {
        Combiner::Additive => Ok(DVector::zeros(nn.param_count())),
        Combiner::ReplaceComponents(_) => Err(ApbmError::NoAnchorExists),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApbmConfig {
    pub combiner: Combiner,
    /// Regularization strength; `f64::INFINITY` is clamped to [`LAMBDA_CLAMP`].
    pub lambda: f64,
    pub theta_bar: DVector<f64>,
    pub q_theta: DMatrix<f64>,
    pub theta0_mean: DVector<f64>,
    pub theta0_cov: DMatrix<f64>,
}

impl ApbmConfig {
    /// Additive combiner anchored at `θ̄ = 0`, with default noise settings.
    pub fn additive(nn: &MlpSpec, lambda: f64) -> Self {
        let p = nn.param_count();
        Self {
            combiner: Combiner::Additive,
            lambda,
            theta_bar: DVector::zeros(p),
            q_theta: DMatrix::identity(p, p) * DEFAULT_THETA_PROCESS_VAR,
            theta0_mean: DVector::zeros(p),
            theta0_cov: DMatrix::identity(p, p) * DEFAULT_THETA0_VAR,
        }
    }

    /// Component replacement with the parameter constraint switched off.
    ///
    /// No anchor exists here; `theta_bar` is the zero vector only so the
    /// struct is complete, and it is never observed while `lambda == 0`.
    pub fn replace(nn: &MlpSpec, indices: Vec<usize>) -> Self {
        Self {
            combiner: Combiner::ReplaceComponents(indices),
            lambda: 0.0,
            ..Self::additive(nn, 0.0)
        }
    }

    pub fn with_theta_noise(mut self, q_var: f64, theta0_var: f64) -> Self {
        let p = self.theta_bar.len();
        self.q_theta = DMatrix::identity(p, p) * q_var;
        self.theta0_cov = DMatrix::identity(p, p) * theta0_var;
        self
    }

    /// `λ` as used by the filter: `+∞` clamped, otherwise unchanged.
    pub fn effective_lambda(&self) -> Result<f64, ApbmError> {
        match self.lambda {
            l if l.is_nan() || l < 0.0 => Err(ApbmError::NegativeLambda(l)),
            l if l.is_infinite() => Ok(LAMBDA_CLAMP),
            l => Ok(l),
        }
    }
}

/// The augmented model together with what is needed to drive it.
#[derive(Debug, Clone)]
pub struct AugmentedModel {
    model: StateSpaceModel,
    physics_dim: usize,
    param_count: usize,
    theta_bar: DVector<f64>,
    pseudo_rows: bool,
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows() + b.nrows();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}

fn check(what: &'static str, expected: usize, got: usize) -> Result<(), ApbmError> {
    if expected != got {
        return Err(ApbmError::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub fn build_augmented_model(
    physics: &StateSpaceModel,
    nn: &MlpSpec,
    cfg: &ApbmConfig,
) -> Result<AugmentedModel, ApbmError> {
    let n = physics.state_dim();
    let p = nn.param_count();
    check("network input", n, nn.input_dim())?;
    check(
        "network output",
        cfg.combiner.network_output_dim(n),
        nn.output_dim(),
    )?;
    check("theta_bar", p, cfg.theta_bar.len())?;
    check("theta0_mean", p, cfg.theta0_mean.len())?;
    check("q_theta", p, cfg.q_theta.nrows())?;
    check("q_theta", p, cfg.q_theta.ncols())?;
    check("theta0_cov", p, cfg.theta0_cov.nrows())?;
    check("theta0_cov", p, cfg.theta0_cov.ncols())?;
    if let Combiner::ReplaceComponents(idx) = &cfg.combiner {
        if let Some(&index) = idx.iter().find(|&&i| i >= n) {
            return Err(ApbmError::ComponentOutOfRange { index, dim: n });
        }
    }
    let lambda = cfg.effective_lambda()?;

    let f = physics.transition_fn().clone();
    let spec = nn.clone();
    let combiner = cfg.combiner.clone();
    let transition: VectorFn = Arc::new(move |z: &DVector<f64>| {
        let x = z.rows(0, n).into_owned();
        let theta = &z.as_slice()[n..];
        let fx = f(&x);
        let gamma = mlp::forward_unchecked(&spec, theta, x.as_slice());
        let mut out = z.clone();
        match &combiner {
            Combiner::Additive => {
                for i in 0..n {
                    out[i] = fx[i] + gamma[i];
                }
            }
            Combiner::ReplaceComponents(idx) => {
                out.rows_mut(0, n).copy_from(&fx);
                for (&i, g) in idx.iter().zip(&gamma) {
                    out[i] = x[i] + g;
                }
            }
        }
        out
    });

    let h = physics.measurement_fn().clone();
    let m = physics.meas_dim();
    let pseudo_rows = lambda > 0.0;
    let meas_dim = if pseudo_rows { m + p } else { m };
    let measurement: VectorFn = Arc::new(move |z: &DVector<f64>| {
        let y = h(&z.rows(0, n).into_owned());
        if pseudo_rows {
            let mut out = DVector::zeros(m + p);
            out.rows_mut(0, m).copy_from(&y);
            out.rows_mut(m, p).copy_from(&z.rows(n, p));
            out
        } else {
            y
        }
    });

    let q = block_diag(physics.process_noise(), &cfg.q_theta);
    let r = if pseudo_rows {
        block_diag(
            physics.measurement_noise(),
            &(DMatrix::identity(p, p) / lambda),
        )
    } else {
        physics.measurement_noise().clone()
    };
    let mut angle_rows = physics.angle_rows().to_vec();
    if pseudo_rows {
        angle_rows.resize(meas_dim, false);
    }
    let model = StateSpaceModel::new(n + p, meas_dim, transition, measurement, q, r)?
        .with_angle_rows(angle_rows)?;

    Ok(AugmentedModel {
        model,
        physics_dim: n,
        param_count: p,
        theta_bar: cfg.theta_bar.clone(),
        pseudo_rows,
    })
}

impl AugmentedModel {
    pub fn model(&self) -> &StateSpaceModel {
        &self.model
    }

    pub fn physics_dim(&self) -> usize {
        self.physics_dim
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn has_pseudo_rows(&self) -> bool {
        self.pseudo_rows
    }

    /// Observation fed to the filter: `[y; θ̄]`, or `y` when `λ = 0`.
    pub fn observation(&self, y: &DVector<f64>) -> DVector<f64> {
        if !self.pseudo_rows {
            return y.clone();
        }
        let m = y.len();
        let mut out = DVector::zeros(m + self.param_count);
        out.rows_mut(0, m).copy_from(y);
        out.rows_mut(m, self.param_count).copy_from(&self.theta_bar);
        out
    }

    /// Joint prior over `[x; θ]` with no initial cross-correlation.
    pub fn initial_belief(
        &self,
        x_mean: &DVector<f64>,
        x_cov: &DMatrix<f64>,
        cfg: &ApbmConfig,
    ) -> Result<GaussianBelief, ApbmError> {
        check("initial state mean", self.physics_dim, x_mean.len())?;
        check("initial state cov", self.physics_dim, x_cov.nrows())?;
        let n = self.physics_dim;
        let p = self.param_count;
        let mut mean = DVector::zeros(n + p);
        mean.rows_mut(0, n).copy_from(x_mean);
        mean.rows_mut(n, p).copy_from(&cfg.theta0_mean);
        Ok(GaussianBelief::new(
            mean,
            block_diag(x_cov, &cfg.theta0_cov),
        )?)
    }

    pub fn state_part(&self, belief: &GaussianBelief) -> DVector<f64> {
        belief.mean().rows(0, self.physics_dim).into_owned()
    }

    pub fn theta_part(&self, belief: &GaussianBelief) -> DVector<f64> {
        belief
            .mean()
            .rows(self.physics_dim, self.param_count)
            .into_owned()
    }

    pub fn theta_cov(&self, belief: &GaussianBelief) -> DMatrix<f64> {
        let n = self.physics_dim;
        let p = self.param_count;
        belief.cov().view((n, n), (p, p)).into_owned()
    }
}

/// One predict/update cycle on the augmented state with measurement `y`.
pub fn apbm_step(
    belief: &GaussianBelief,
    model: &AugmentedModel,
    y: &DVector<f64>,
) -> Result<GaussianBelief, FilterError> {
    let predicted = filtercore::predict(belief, model.model())?;
    filtercore::update(&predicted, model.model(), &model.observation(y))
}
