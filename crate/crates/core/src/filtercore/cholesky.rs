use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{check_symmetric, FilterError};

/// Maximum number of jittered refactorizations before giving up.
pub const JITTER_RETRIES: usize = 10;

const JITTER_START: f64 = 1e-12;
const JITTER_GROWTH: f64 = 10.0;

/// Cholesky factorization with the diagonal jitter policy.
///
/// The first attempt factors `m` as given. On failure, `εI` is added with
/// `ε = 1e-12 · trace(m)/n`, growing tenfold per retry, for at most
/// [`JITTER_RETRIES`] retries. A zero trace uses a unit scale so the
/// all-zero matrix still factors.
pub fn factor(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, FilterError> {
    check_symmetric(m)?;
    if m.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite {
            what: "matrix to factor",
        });
    }
    if let Some(chol) = Cholesky::new(m.clone()) {
        return Ok(chol);
    }
    let n = m.nrows();
    let scale = match m.trace().abs() / n as f64 {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let mut eps = JITTER_START * scale;
    for _ in 0..JITTER_RETRIES {
        let mut jittered = m.clone();
        for i in 0..n {
            jittered[(i, i)] += eps;
        }
        if let Some(chol) = Cholesky::new(jittered) {
            return Ok(chol);
        }
        eps *= JITTER_GROWTH;
    }
    Err(FilterError::NotPositiveDefinite {
        retries: JITTER_RETRIES,
    })
}

/// Lower-triangular `S` with `S·Sᵀ = m` (up to jitter).
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>, FilterError> {
    factor(m).map(|c| c.l())
}
