use std::sync::Arc;

use nalgebra::{dmatrix, DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use super::{rng_for, GaussianSampler, SimTruth, SystemsError, STREAM_MEASUREMENT, STREAM_PROCESS};
use crate::filtercore::{wrap_angle, FilterError, StateSpaceModel};

const SMALL_TURN_RATE: f64 = 1e-6;
const MIN_RANGE: f64 = 1e-9;

/// Collocated RSS and bearing sensors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssBearingSensor {
    /// `10·log₁₀ Ψ₀` in dBm.
    pub psi0_db: f64,
    pub path_loss_exponent: f64,
    pub position: [f64; 2],
}

impl Default for RssBearingSensor {
    fn default() -> Self {
        Self {
            psi0_db: 30.0,
            path_loss_exponent: 2.2,
            position: [0.0, 0.0],
        }
    }
}

impl RssBearingSensor {
    /// `(rss, bearing)` for a target at `p`, without the collocation check.
    fn measure_unchecked(&self, px: f64, py: f64) -> [f64; 2] {
        let dx = px - self.position[0];
        let dy = py - self.position[1];
        let range = dx.hypot(dy);
        [
            self.psi0_db - 10.0 * self.path_loss_exponent * range.log10(),
            dy.atan2(dx),
        ]
    }
}

/// Measured RSS in dBm and bearing in `(-π, π]` for a target at `p`.
pub fn rss_bearing_measure(
    p: [f64; 2],
    sensor: &RssBearingSensor,
) -> Result<[f64; 2], SystemsError> {
    let range = (p[0] - sensor.position[0]).hypot(p[1] - sensor.position[1]);
    if !(range >= MIN_RANGE) {
        return Err(SystemsError::SensorCollocated);
    }
    let [rss, bearing] = sensor.measure_unchecked(p[0], p[1]);
    Ok([rss, wrap_angle(bearing)])
}

/// Which turn-rate-dependent matrix drives the simulated target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TurnModel {
    /// `F + G(Ω)` summed directly; velocities roughly double per step.
    Verbatim,
    /// The standard coordinated-turn matrix, which reduces to `F` at `Ω = 0`.
    #[default]
    CoordinatedTurn,
}

/// Kinematic target driven by a random-walk turn rate and observed by RSS
/// and bearing sensors. State order is `(x, ẋ, y, ẏ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingConfig {
    pub dt: f64,
    pub steps: usize,
    pub x0: [f64; 4],
    pub omega0: f64,
    pub sensor: RssBearingSensor,
    pub meas_noise_cov: DMatrix<f64>,
    /// Covariance of `u`; its dimension is the column count of `noise_input`.
    pub u_cov: DMatrix<f64>,
    pub v_var: f64,
    /// `M`, mapping `u` into the state.
    pub noise_input: DMatrix<f64>,
    pub turn_model: TurnModel,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            dt: 1.0,
            steps: 500,
            x0: [100.0, 0.0, 100.0, 0.0],
            omega0: 0.05,
            sensor: RssBearingSensor::default(),
            meas_noise_cov: dmatrix![1.0, 0.0; 0.0, 0.1],
            u_cov: DMatrix::identity(4, 4) * 0.1,
            v_var: 0.1,
            noise_input: DMatrix::identity(4, 4),
            turn_model: TurnModel::default(),
        }
    }
}

impl TrackingConfig {
    pub fn validate(&self) -> Result<(), SystemsError> {
        let bad = |msg: &str| Err(SystemsError::InvalidConfig(msg.to_string()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.dt >= 0.0) {
            return bad("sampling period must be nonnegative");
        }
        if self.meas_noise_cov.shape() != (2, 2) {
            return bad("measurement noise covariance must be 2x2");
        }
        if self.noise_input.nrows() != 4 || self.noise_input.ncols() != self.u_cov.nrows() {
            return bad("noise input matrix must be 4xk with k matching u_cov");
        }
        if !(self.v_var >= 0.0) {
            return bad("turn-rate noise variance must be nonnegative");
        }
        Ok(())
    }

    pub fn transition_matrix(&self, omega: f64) -> DMatrix<f64> {
        match self.turn_model {
            TurnModel::Verbatim => ct_matrix(omega, self.dt),
            TurnModel::CoordinatedTurn => coordinated_turn_matrix(omega, self.dt),
        }
    }
}

/// Constant-velocity matrix `F`.
pub fn cv_matrix(dt: f64) -> DMatrix<f64> {
    dmatrix![
        1.0, dt, 0.0, 0.0;
        0.0, 1.0, 0.0, 0.0;
        0.0, 0.0, 1.0, dt;
        0.0, 0.0, 0.0, 1.0
    ]
}

/// `((1 − cos ωT)/ω, sin(ωT)/ω)` with the small-`ω` limits `(ωT²/2, T)`.
fn turn_terms(omega: f64, dt: f64) -> (f64, f64) {
    if omega.abs() < SMALL_TURN_RATE {
        (omega * dt * dt / 2.0, dt)
    } else {
        let wt = omega * dt;
        // 1 − cos ωT written as 2 sin²(ωT/2) to avoid cancellation.
        let half = (0.5 * wt).sin();
        (2.0 * half * half / omega, wt.sin() / omega)
    }
}

/// Sinusoidal term `G(Ω)`, including `sin(ΩT)/T` in row 1.
pub fn turn_matrix(omega: f64, dt: f64) -> DMatrix<f64> {
    let wt = omega * dt;
    let (c, s) = (wt.cos(), wt.sin());
    let (a, b) = turn_terms(omega, dt);
    let r1 = if dt == 0.0 { omega } else { s / dt };
    dmatrix![
        0.0, r1, 0.0, -a;
        0.0, c, 0.0, -s;
        0.0, a, 0.0, b;
        0.0, s, 0.0, c
    ]
}

/// `F + G(Ω)`.
pub fn ct_matrix(omega: f64, dt: f64) -> DMatrix<f64> {
    cv_matrix(dt) + turn_matrix(omega, dt)
}

/// Coordinated-turn transition: constant speed, heading rotating at `Ω`.
pub fn coordinated_turn_matrix(omega: f64, dt: f64) -> DMatrix<f64> {
    let wt = omega * dt;
    let (c, s) = (wt.cos(), wt.sin());
    let (a, b) = turn_terms(omega, dt);
    dmatrix![
        1.0, b, 0.0, -a;
        0.0, c, 0.0, -s;
        0.0, a, 1.0, b;
        0.0, s, 0.0, c
    ]
}

pub fn tracking_simulate(cfg: &TrackingConfig, seed: u64) -> Result<SimTruth, SystemsError> {
    cfg.validate()?;
    let process = GaussianSampler::new(&cfg.u_cov)?;
    let meas_noise = GaussianSampler::new(&cfg.meas_noise_cov)?;
    let turn_noise = Normal::new(0.0, cfg.v_var.sqrt())
        .map_err(|e| SystemsError::InvalidConfig(e.to_string()))?;
    let mut proc_rng = rng_for(seed, STREAM_PROCESS);
    let mut meas_rng = rng_for(seed, STREAM_MEASUREMENT);

    let mut x = DVector::from_column_slice(&cfg.x0);
    let mut omega = cfg.omega0;
    let mut states = Vec::with_capacity(cfg.steps);
    let mut omegas = Vec::with_capacity(cfg.steps);
    let mut measurements = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let u = process.sample(&mut proc_rng);
        let v = turn_noise.sample(&mut proc_rng);
        x = cfg.transition_matrix(omega) * &x + &cfg.noise_input * u;
        omega += v;
        if x.iter().any(|c| !c.is_finite()) || !omega.is_finite() {
            return Err(SystemsError::NonFiniteState { step });
        }
        let clean = rss_bearing_measure([x[0], x[2]], &cfg.sensor)?;
        let n = meas_noise.sample(&mut meas_rng);
        measurements.push(DVector::from_vec(vec![
            clean[0] + n[0],
            wrap_angle(clean[1] + n[1]),
        ]));
        states.push(x.clone());
        omegas.push(omega);
    }
    Ok(SimTruth {
        states,
        omegas,
        measurements,
        seed,
    })
}

/// Constant-velocity filter model observed through the RSS/bearing sensor.
pub fn cv_model(
    dt: f64,
    process_noise: DMatrix<f64>,
    measurement_noise: DMatrix<f64>,
    sensor: RssBearingSensor,
) -> Result<StateSpaceModel, FilterError> {
    let f = cv_matrix(dt);
    StateSpaceModel::new(
        4,
        2,
        Arc::new(move |x: &DVector<f64>| &f * x),
        Arc::new(move |x: &DVector<f64>| {
            let range = (x[0] - sensor.position[0]).hypot(x[2] - sensor.position[1]);
            if range < MIN_RANGE {
                return DVector::from_element(2, f64::NAN);
            }
            let [rss, bearing] = sensor.measure_unchecked(x[0], x[2]);
            DVector::from_vec(vec![rss, bearing])
        }),
        process_noise,
        measurement_noise,
    )?
    .with_angle_rows(vec![false, true])
}
