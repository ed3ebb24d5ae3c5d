//! Dense small-matrix utilities, the third-degree cubature rule, and
//! Gaussian predict/update steps for arbitrary nonlinear models.
//!
//! Every returned covariance is symmetrized, and every factorization goes
//! through [`cholesky`] and its jitter policy.

mod belief;
mod cholesky;
mod cubature;
mod model;
mod step;

pub use belief::GaussianBelief;
pub use cholesky::{cholesky, factor, JITTER_RETRIES};
pub use cubature::{cubature_points, propagate, CubaturePointSet, Propagated};
pub use model::{StateSpaceModel, VectorFn};
pub use step::{predict, update, wrap_angle};

use thiserror::Error;

/// Relative tolerance used for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FilterError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite after {retries} jitter retries")]
    NotPositiveDefinite { retries: usize },
    #[error("function returned a non-finite value at cubature point {point}")]
    NonFiniteFunctionValue { point: usize },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("non-finite values in {what}")]
    NonFinite { what: &'static str },
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

pub(crate) fn max_abs(m: &nalgebra::DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest `|a_ij - a_ji|`.
pub(crate) fn asymmetry(m: &nalgebra::DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_symmetric(m: &nalgebra::DMatrix<f64>) -> Result<(), FilterError> {
    if !m.is_square() {
        return Err(FilterError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * max_abs(m).max(1.0) {
        return Err(FilterError::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

/// `(m + mᵀ) / 2` in place.
pub(crate) fn symmetrize(m: &mut nalgebra::DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
