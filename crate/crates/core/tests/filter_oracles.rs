//! Cubature filter checked against closed-form references.

use std::sync::Arc;

use apbm_core::filtercore::{cubature_points, predict, propagate, update, GaussianBelief};
use apbm_core::StateSpaceModel;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Textbook Kalman filter with an explicit inverse and Joseph-form update.
struct LinearKalman {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LinearKalman {
    fn step(
        &self,
        x: &DVector<f64>,
        p: &DMatrix<f64>,
        y: &DVector<f64>,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let xp = &self.a * x;
        let pp = &self.a * p * self.a.transpose() + &self.q;
        let s = &self.c * &pp * self.c.transpose() + &self.r;
        let k = &pp * self.c.transpose() * s.try_inverse().unwrap();
        let xn = &xp + &k * (y - &self.c * &xp);
        let i_kc = DMatrix::identity(x.len(), x.len()) - &k * &self.c;
        let pn = &i_kc * pp * i_kc.transpose() + &k * &self.r * k.transpose();
        (xn, pn)
    }
}

fn random_lti(rng: &mut ChaCha8Rng) -> (LinearKalman, StateSpaceModel) {
    let n = 4;
    let m = 2;
    let raw = random_matrix(rng, n, n);
    let radius = raw
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|e| e.norm())
        .fold(0.0, f64::max);
    let a = raw * (0.98 / radius.max(1e-3));
    let c = random_matrix(rng, m, n);
    let q = random_spd(rng, n, 0.05);
    let r = random_spd(rng, m, 0.1);
    let (fa, fc) = (a.clone(), c.clone());
    let model = StateSpaceModel::new(
        n,
        m,
        Arc::new(move |x: &DVector<f64>| &fa * x),
        Arc::new(move |x: &DVector<f64>| &fc * x),
        q.clone(),
        r.clone(),
    )
    .unwrap();
    (LinearKalman { a, c, q, r }, model)
}

#[test]
fn predict_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (kf, model) = random_lti(&mut rng);
    let x = random_matrix(&mut rng, 4, 1).column(0).into_owned();
    let p = random_spd(&mut rng, 4, 0.1);
    let b = GaussianBelief::new(x.clone(), p.clone()).unwrap();
    let pred = predict(&b, &model).unwrap();
    assert!((pred.mean() - &kf.a * &x).amax() < 1e-10);
    let expected = &kf.a * &p * kf.a.transpose() + &kf.q;
    assert!((pred.cov() - expected).amax() < 1e-10);
}

#[test]
fn zero_innovation_linear_update_keeps_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (kf, model) = random_lti(&mut rng);
    let x = random_matrix(&mut rng, 4, 1).column(0).into_owned();
    let b = GaussianBelief::new(x.clone(), random_spd(&mut rng, 4, 0.1)).unwrap();
    let u = update(&b, &model, &(&kf.c * &x)).unwrap();
    assert!((u.mean() - x).amax() < 1e-12);
}

#[test]
fn cubature_filter_tracks_kalman_filter_over_many_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (kf, model) = random_lti(&mut rng);
    let mut truth = random_matrix(&mut rng, 4, 1).column(0).into_owned();
    let mut x = DVector::zeros(4);
    let mut p = DMatrix::identity(4, 4) * 2.0;
    let mut belief = GaussianBelief::new(x.clone(), p.clone()).unwrap();
    let q_chol = kf.q.clone().cholesky().unwrap().l();
    let r_chol = kf.r.clone().cholesky().unwrap().l();
    for _ in 0..150 {
        truth = &kf.a * truth + &q_chol * random_matrix(&mut rng, 4, 1).column(0);
        let y = &kf.c * &truth + &r_chol * random_matrix(&mut rng, 2, 1).column(0);
        (x, p) = kf.step(&x, &p, &y);
        belief = update(&predict(&belief, &model).unwrap(), &model, &y).unwrap();
        assert!((belief.mean() - &x).amax() <= 1e-8);
        assert!((belief.cov() - &p).amax() <= 1e-8);
    }
}

#[test]
fn propagate_exact_for_wide_affine_map() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 60;
    let m = 7;
    let a = random_matrix(&mut rng, m, n);
    let b = random_matrix(&mut rng, m, 1).column(0).into_owned();
    let mu = random_matrix(&mut rng, n, 1).column(0).into_owned();
    let sigma = random_spd(&mut rng, n, 1e-3);
    let belief = GaussianBelief::new(mu.clone(), sigma.clone()).unwrap();
    let out = propagate(|x| &a * x + &b, &belief).unwrap();
    let scale = sigma.amax().max(1.0) * a.amax().powi(2);
    assert!((out.mean - (&a * &mu + &b)).amax() <= 1e-10 * scale);
    assert!((out.cov - &a * &sigma * a.transpose()).amax() <= 1e-10 * scale * n as f64);
    assert!((out.cross - &sigma * a.transpose()).amax() <= 1e-10 * scale * n as f64);
}

fn belief_strategy() -> impl Strategy<Value = (GaussianBelief, u64)> {
    (1usize..12, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mu = random_matrix(&mut rng, n, 1).column(0) * 10.0;
        // Occasionally rank-deficient to exercise the jitter path.
        let sigma = if seed % 5 == 0 {
            let v = random_matrix(&mut rng, n, 1);
            &v * v.transpose()
        } else {
            random_spd(&mut rng, n, 1e-6)
        };
        (GaussianBelief::new(mu, sigma).unwrap(), seed)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cubature_points_reproduce_moments((belief, _) in belief_strategy()) {
        let set = cubature_points(&belief).unwrap();
        let n = belief.dim();
        prop_assert_eq!(set.len(), 2 * n);
        prop_assert!((set.weight() * (2 * n) as f64 - 1.0).abs() < 1e-15);
        let mean = set.points().column_sum() * set.weight();
        let tol = 1e-12 * belief.cov().amax().max(belief.mean().amax()).max(1.0);
        prop_assert!((&mean - belief.mean()).amax() <= tol);
        let mut cov = DMatrix::zeros(n, n);
        for c in set.points().column_iter() {
            let d = c - belief.mean();
            cov += &d * d.transpose() * set.weight();
        }
        // Rank-deficient inputs pick up at most the final jitter.
        let jitter = if n > 1 { 1e-2 * belief.cov().trace() / n as f64 } else { 0.0 };
        prop_assert!((cov - belief.cov()).amax() <= tol.max(jitter));
    }

    #[test]
    fn propagate_exact_for_affine((belief, seed) in belief_strategy(), m in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5);
        let n = belief.dim();
        let a = random_matrix(&mut rng, m, n);
        let b = random_matrix(&mut rng, m, 1).column(0).into_owned();
        let out = propagate(|x| &a * x + &b, &belief).unwrap();
        let set = cubature_points(&belief).unwrap();
        // Compare against the moments of the point set itself, which equal
        // the belief up to jitter.
        let mut sigma = DMatrix::zeros(n, n);
        for c in set.points().column_iter() {
            let d = c - belief.mean();
            sigma += &d * d.transpose() * set.weight();
        }
        let scale = (sigma.amax() + belief.mean().amax()).max(1.0) * a.amax().max(1.0).powi(2);
        prop_assert!((out.mean - (&a * belief.mean() + &b)).amax() <= 1e-10 * scale);
        prop_assert!((&out.cov - &a * &sigma * a.transpose()).amax() <= 1e-10 * scale);
        prop_assert!((out.cross - &sigma * a.transpose()).amax() <= 1e-10 * scale);
        prop_assert!((&out.cov - out.cov.transpose()).amax() == 0.0);
    }
}
