use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{check_symmetric, FilterError};

/// Deterministic vector map shared between threads.
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Additive-noise state-space model.
///
/// `transition` and `measurement` are pure: the filter adds `Q` and `R`,
/// the simulators add sampled noise. Measurement rows flagged in
/// `angle_rows` have their residuals wrapped into `(-π, π]`.
#[derive(Clone)]
pub struct StateSpaceModel {
    state_dim: usize,
    meas_dim: usize,
    transition: VectorFn,
    measurement: VectorFn,
    process_noise: DMatrix<f64>,
    measurement_noise: DMatrix<f64>,
    angle_rows: Vec<bool>,
}

impl fmt::Debug for StateSpaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StateSpaceModel")
            .field("state_dim", &self.state_dim)
            .field("meas_dim", &self.meas_dim)
            .field("angle_rows", &self.angle_rows)
            .finish_non_exhaustive()
    }
}

fn check_noise(m: &DMatrix<f64>, dim: usize, what: &'static str) -> Result<(), FilterError> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(FilterError::DimensionMismatch {
            what,
            expected: dim,
            got: m.nrows().max(m.ncols()),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite { what });
    }
    check_symmetric(m)
}

impl StateSpaceModel {
    pub fn new(
        state_dim: usize,
        meas_dim: usize,
        transition: VectorFn,
        measurement: VectorFn,
        process_noise: DMatrix<f64>,
        measurement_noise: DMatrix<f64>,
    ) -> Result<Self, FilterError> {
        check_noise(&process_noise, state_dim, "process noise")?;
        check_noise(&measurement_noise, meas_dim, "measurement noise")?;
        Ok(Self {
            state_dim,
            meas_dim,
            transition,
            measurement,
            process_noise,
            measurement_noise,
            angle_rows: vec![false; meas_dim],
        })
    }

    /// Flags measurement rows holding angles.
    pub fn with_angle_rows(mut self, rows: Vec<bool>) -> Result<Self, FilterError> {
        if rows.len() != self.meas_dim {
            return Err(FilterError::DimensionMismatch {
                what: "angle row flags",
                expected: self.meas_dim,
                got: rows.len(),
            });
        }
        self.angle_rows = rows;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn meas_dim(&self) -> usize {
        self.meas_dim
    }

    pub fn process_noise(&self) -> &DMatrix<f64> {
        &self.process_noise
    }

    pub fn measurement_noise(&self) -> &DMatrix<f64> {
        &self.measurement_noise
    }

    pub fn angle_rows(&self) -> &[bool] {
        &self.angle_rows
    }

    pub fn transition_fn(&self) -> &VectorFn {
        &self.transition
    }

    pub fn measurement_fn(&self) -> &VectorFn {
        &self.measurement
    }

    pub fn transition(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.transition)(x)
    }

    pub fn measure(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.measurement)(x)
    }
}
