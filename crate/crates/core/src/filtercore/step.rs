use std::f64::consts::{PI, TAU};

use nalgebra::DVector;

use super::{factor, propagate, symmetrize, FilterError, GaussianBelief, StateSpaceModel};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn check_dim(belief: &GaussianBelief, model: &StateSpaceModel) -> Result<(), FilterError> {
    if belief.dim() != model.state_dim() {
        return Err(FilterError::DimensionMismatch {
            what: "belief vs model state",
            expected: model.state_dim(),
            got: belief.dim(),
        });
    }
    Ok(())
}

/// Cubature time update: moments of the transition plus `Q`.
pub fn predict(
    belief: &GaussianBelief,
    model: &StateSpaceModel,
) -> Result<GaussianBelief, FilterError> {
    check_dim(belief, model)?;
    let moments = propagate(|x| model.transition(x), belief)?;
    let cov = moments.cov + model.process_noise();
    GaussianBelief::new(moments.mean, cov)
}

/// Cubature measurement update with observation `y`.
pub fn update(
    belief: &GaussianBelief,
    model: &StateSpaceModel,
    y: &DVector<f64>,
) -> Result<GaussianBelief, FilterError> {
    check_dim(belief, model)?;
    if y.len() != model.meas_dim() {
        return Err(FilterError::DimensionMismatch {
            what: "observation",
            expected: model.meas_dim(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FilterError::NonFinite {
            what: "observation",
        });
    }
    let moments = propagate(|x| model.measure(x), belief)?;
    let innovation_cov = moments.cov + model.measurement_noise();
    let chol = factor(&innovation_cov).map_err(|e| match e {
        FilterError::NotPositiveDefinite { .. } => FilterError::SingularInnovation,
        other => other,
    })?;

    let mut residual = y - &moments.mean;
    for (r, &is_angle) in residual.iter_mut().zip(model.angle_rows()) {
        if is_angle {
            *r = wrap_angle(*r);
        }
    }

    // K = Pxy·Pyy⁻¹, solved as Pyy·Kᵀ = Pxyᵀ.
    let gain = chol.solve(&moments.cross.transpose()).transpose();
    let mean = belief.mean() + &gain * residual;
    let mut cov = belief.cov() - &gain * &innovation_cov * gain.transpose();
    symmetrize(&mut cov);
    GaussianBelief::new(mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtercore::VectorFn;
    use nalgebra::{dmatrix, dvector, DMatrix};
    use std::sync::Arc;

    fn identity_model(q: f64) -> StateSpaceModel {
        let id: VectorFn = Arc::new(|x: &DVector<f64>| x.clone());
        StateSpaceModel::new(
            2,
            2,
            id.clone(),
            id,
            DMatrix::identity(2, 2) * q,
            DMatrix::identity(2, 2),
        )
        .unwrap()
    }

    fn belief() -> GaussianBelief {
        GaussianBelief::new(dvector![1.0, 2.0], dmatrix![2.0, 0.5; 0.5, 1.0]).unwrap()
    }

    #[test]
    fn identity_transition_without_noise_is_a_no_op() {
        let b = belief();
        let p = predict(&b, &identity_model(0.0)).unwrap();
        assert!((p.mean() - b.mean()).amax() < 1e-14);
        assert!((p.cov() - b.cov()).amax() < 1e-14);
    }

    #[test]
    fn identity_transition_adds_process_noise() {
        let b = belief();
        let p = predict(&b, &identity_model(1.0)).unwrap();
        let grown = b.cov() + DMatrix::<f64>::identity(2, 2);
        assert!((p.cov() - grown).amax() < 1e-14);
    }

    #[test]
    fn zero_innovation_keeps_mean() {
        let b = belief();
        let u = update(&b, &identity_model(0.0), &b.mean().clone()).unwrap();
        assert!((u.mean() - b.mean()).amax() < 1e-14);
        assert!(u.cov().trace() < b.cov().trace());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(TAU - 0.01) + 0.01).abs() < 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI + 0.5) - (-PI + 0.5)).abs() < 1e-12);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn bearing_residual_is_wrapped_before_gain() {
        // Scalar angle measured directly: a prediction at -π+0.005 and an
        // observation at π-0.005 are 0.01 apart, not 2π-0.01.
        let id: VectorFn = Arc::new(|x: &DVector<f64>| x.clone());
        let model = StateSpaceModel::new(1, 1, id.clone(), id, dmatrix![0.0], dmatrix![1.0])
            .unwrap()
            .with_angle_rows(vec![true])
            .unwrap();
        let b = GaussianBelief::new(dvector![-PI + 0.005], dmatrix![1.0]).unwrap();
        let y = dvector![PI - 0.005];
        let u = update(&b, &model, &y).unwrap();
        // gain 1/2, wrapped residual -0.01
        assert!((u.mean()[0] - (-PI + 0.005 - 0.005)).abs() < 1e-12);

        let unwrapped = StateSpaceModel::new(
            1,
            1,
            Arc::new(|x: &DVector<f64>| x.clone()),
            Arc::new(|x: &DVector<f64>| x.clone()),
            dmatrix![0.0],
            dmatrix![1.0],
        )
        .unwrap();
        let v = update(&b, &unwrapped, &y).unwrap();
        assert!((v.mean()[0] - (-PI + 0.005 + 0.5 * (TAU - 0.01))).abs() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        let b = GaussianBelief::new(dvector![0.0], dmatrix![1.0]).unwrap();
        assert!(matches!(
            predict(&b, &identity_model(0.0)),
            Err(FilterError::DimensionMismatch { .. })
        ));
        let b = belief();
        assert!(matches!(
            update(&b, &identity_model(0.0), &dvector![1.0]),
            Err(FilterError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            update(&b, &identity_model(0.0), &dvector![1.0, f64::NAN]),
            Err(FilterError::NonFinite { .. })
        ));
    }
}
