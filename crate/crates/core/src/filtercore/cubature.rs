use nalgebra::{DMatrix, DVector};

use super::{cholesky, symmetrize, FilterError, GaussianBelief};

/// The `2n` equally weighted points of the third-degree cubature rule.
///
/// Column `j < n` is `μ + √n·S e_j`, column `n + j` is `μ − √n·S e_j`,
/// where `S` is the lower Cholesky factor of the covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct CubaturePointSet {
    points: DMatrix<f64>,
    offsets: DMatrix<f64>,
    weight: f64,
}

impl CubaturePointSet {
    pub fn len(&self) -> usize {
        self.points.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.points.ncols() == 0
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Points as columns of an `n × 2n` matrix.
    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    /// `χ_j − μ` for every point, as columns.
    pub fn offsets(&self) -> &DMatrix<f64> {
        &self.offsets
    }

    pub fn point(&self, j: usize) -> DVector<f64> {
        self.points.column(j).into_owned()
    }
}

pub fn cubature_points(belief: &GaussianBelief) -> Result<CubaturePointSet, FilterError> {
    let n = belief.dim();
    let s = cholesky(belief.cov())?;
    let scale = (n as f64).sqrt();
    let mut offsets = DMatrix::zeros(n, 2 * n);
    for j in 0..n {
        for i in j..n {
            let v = scale * s[(i, j)];
            offsets[(i, j)] = v;
            offsets[(i, n + j)] = -v;
        }
    }
    let mut points = offsets.clone();
    for mut col in points.column_iter_mut() {
        col += belief.mean();
    }
    Ok(CubaturePointSet {
        points,
        offsets,
        weight: 1.0 / (2 * n) as f64,
    })
}

/// Gaussian moments of `ℓ(x)` for `x ~ belief`.
#[derive(Debug, Clone, PartialEq)]
pub struct Propagated {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    /// `E[(x − μ)(ℓ(x) − mean)ᵀ]`, `n × m`.
    pub cross: DMatrix<f64>,
}

pub fn propagate<F>(f: F, belief: &GaussianBelief) -> Result<Propagated, FilterError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let set = cubature_points(belief)?;
    propagate_points(f, &set)
}

pub(crate) fn propagate_points<F>(f: F, set: &CubaturePointSet) -> Result<Propagated, FilterError>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let count = set.len();
    let mut values: Option<DMatrix<f64>> = None;
    for j in 0..count {
        let y = f(&set.point(j));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FilterError::NonFiniteFunctionValue { point: j });
        }
        let values = values.get_or_insert_with(|| DMatrix::zeros(y.len(), count));
        if y.len() != values.nrows() {
            return Err(FilterError::DimensionMismatch {
                what: "function output",
                expected: values.nrows(),
                got: y.len(),
            });
        }
        values.set_column(j, &y);
    }
    let mut values = values.unwrap_or_else(|| DMatrix::zeros(0, 0));
    let w = set.weight();

    let mean = values.column_sum() * w;
    for mut col in values.column_iter_mut() {
        col -= &mean;
    }
    let mut cov = &values * values.transpose() * w;
    symmetrize(&mut cov);
    let cross = set.offsets() * values.transpose() * w;
    Ok(Propagated { mean, cov, cross })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn scalar_standard_normal_points() {
        let b = GaussianBelief::new(dvector![0.0], dmatrix![1.0]).unwrap();
        let set = cubature_points(&b).unwrap();
        assert_eq!(set.points(), &dmatrix![1.0, -1.0]);
        assert_eq!(set.weight(), 0.5);
    }

    #[test]
    fn two_dim_identity_points() {
        let b = GaussianBelief::new(dvector![0.0, 0.0], DMatrix::identity(2, 2)).unwrap();
        let set = cubature_points(&b).unwrap();
        let r = 2f64.sqrt();
        let expected = dmatrix![r, 0.0, -r, 0.0; 0.0, r, 0.0, -r];
        assert!((set.points() - expected).amax() < 1e-15);
        assert_eq!(set.weight(), 0.25);
    }

    #[test]
    fn zero_covariance_collapses_points() {
        let b = GaussianBelief::new(dvector![5.0], dmatrix![0.0]).unwrap();
        let set = cubature_points(&b).unwrap();
        for v in set.points().iter() {
            assert!((v - 5.0).abs() < 1e-5);
        }
    }

    #[test]
    fn square_of_standard_normal() {
        let b = GaussianBelief::new(dvector![0.0], dmatrix![1.0]).unwrap();
        let p = propagate(|x| dvector![x[0] * x[0]], &b).unwrap();
        assert!((p.mean[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_function_has_no_spread() {
        let b = GaussianBelief::new(dvector![1.0, -2.0], dmatrix![2.0, 0.3; 0.3, 1.0]).unwrap();
        let p = propagate(|_| dvector![7.0, 3.0, -1.0], &b).unwrap();
        assert_eq!(p.mean, dvector![7.0, 3.0, -1.0]);
        assert!(p.cov.amax() == 0.0);
        assert!(p.cross.amax() == 0.0);
    }

    #[test]
    fn non_finite_output_is_reported() {
        let b = GaussianBelief::new(dvector![0.0], dmatrix![1.0]).unwrap();
        let err = propagate(|x| dvector![x[0].ln()], &b).unwrap_err();
        assert_eq!(err, FilterError::NonFiniteFunctionValue { point: 1 });
    }
}
