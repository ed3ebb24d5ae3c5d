use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::filtercore::{cholesky, FilterError};

/// Draws `N(0, C)` samples as `L·ξ` with `ξ` standard normal.
///
/// Diagonal covariances use exact square roots, so zero variances give
/// exactly zero noise. Dense covariances go through the jittered Cholesky.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSampler {
    factor: DMatrix<f64>,
}

impl GaussianSampler {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self, FilterError> {
        if !cov.is_square() {
            return Err(FilterError::NotSquare {
                rows: cov.nrows(),
                cols: cov.ncols(),
            });
        }
        let n = cov.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || cov[(i, j)] == 0.0));
        let factor = if diagonal {
            if (0..n).any(|i| !(cov[(i, i)] >= 0.0)) {
                return Err(FilterError::NotPositiveDefinite { retries: 0 });
            }
            DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt))
        } else {
            cholesky(cov)?
        };
        Ok(Self { factor })
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let xi = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * xi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn zero_covariance_gives_zero_noise() {
        let s = GaussianSampler::new(&DMatrix::zeros(3, 3)).unwrap();
        let mut rng = crate::systems::rng_for(1, 0);
        assert_eq!(s.sample(&mut rng), DVector::zeros(3));
    }

    #[test]
    fn sample_covariance_is_close() {
        let cov = dmatrix![2.0, 0.6; 0.6, 1.0];
        let s = GaussianSampler::new(&cov).unwrap();
        let mut rng = crate::systems::rng_for(7, 0);
        let n = 200_000;
        let mut acc = DMatrix::zeros(2, 2);
        for _ in 0..n {
            let v = s.sample(&mut rng);
            acc += &v * v.transpose();
        }
        acc /= n as f64;
        assert!((acc - cov).amax() < 0.03);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(GaussianSampler::new(&dmatrix![-1.0]).is_err());
    }
}
