//! Constant-velocity Kalman filter over `(cx, cy, aspect, height)` box state.
//!
//! The state is `[cx, cy, a, h, vcx, vcy, va, vh]` with velocities in units
//! per frame (dt = 1). Process and measurement noise scale with box height.
//! When NSA is enabled the measurement noise is scaled by `1 - confidence`.

use nalgebra::{Matrix4, SMatrix, SVector, Vector4};

use crate::error::{Error, Result};
use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Projection = SMatrix<f64, 4, 8>;

/// Noise parameters. Standard deviations are `weight * height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    pub nsa_enabled: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            nsa_enabled: false,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("std_weight_position", self.std_weight_position),
            ("std_weight_velocity", self.std_weight_velocity),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn measurement_std(&self, h: f64) -> [f64; 4] {
        let p = self.std_weight_position * h;
        [p, p, 1e-1, p]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn cx(&self) -> f64 {
        self.mean[0]
    }

    pub fn cy(&self) -> f64 {
        self.mean[1]
    }

    pub fn aspect(&self) -> f64 {
        self.mean[2]
    }

    pub fn height(&self) -> f64 {
        self.mean[3]
    }

    /// Current box estimate. `None` if the state drifted to a non-positive size.
    pub fn bbox(&self) -> Option<BBox> {
        BBox::from_xyah(self.mean[0], self.mean[1], self.mean[2], self.mean[3]).ok()
    }

    /// Mean and covariance of the predicted measurement, without NSA scaling.
    pub fn project(&self, cfg: &NoiseConfig) -> (Vector4<f64>, Matrix4<f64>) {
        let r = Matrix4::from_diagonal(&Vector4::from(
            cfg.measurement_std(self.mean[3]).map(|s| s * s),
        ));
        let h = projection();
        (h * self.mean, h * self.covariance * h.transpose() + r)
    }
}

fn projection() -> Projection {
    let mut h = Projection::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

fn transition() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn symmetrize(p: &mut StateCovariance) {
    *p = (*p + p.transpose()) * 0.5;
}

/// Starts a track at the measured box with zero velocity.
pub fn initiate(measurement: &BBox, cfg: &NoiseConfig) -> KalmanState {
    let z = measurement.to_xyah();
    let h = z[3];
    let pos = cfg.std_weight_position * h;
    let vel = cfg.std_weight_velocity * h;
    let std = [
        2.0 * pos,
        2.0 * pos,
        1e-2,
        2.0 * pos,
        10.0 * vel,
        10.0 * vel,
        1e-5,
        10.0 * vel,
    ];
    let mut mean = StateVector::zeros();
    mean.fixed_rows_mut::<4>(0).copy_from(&Vector4::from(z));
    KalmanState {
        mean,
        covariance: StateCovariance::from_diagonal(&StateVector::from(std.map(|s| s * s))),
    }
}

/// Advances the state by one frame.
pub fn predict(state: &KalmanState, cfg: &NoiseConfig) -> KalmanState {
    let h = state.mean[3];
    let pos = cfg.std_weight_position * h;
    let vel = cfg.std_weight_velocity * h;
    let std = [pos, pos, 1e-2, pos, vel, vel, 1e-5, vel];
    let q = StateCovariance::from_diagonal(&StateVector::from(std.map(|s| s * s)));
    let f = transition();
    let mut covariance = f * state.covariance * f.transpose() + q;
    symmetrize(&mut covariance);
    KalmanState {
        mean: f * state.mean,
        covariance,
    }
}

/// Measurement update. With NSA enabled the measurement noise becomes
/// `(1 - confidence) * R`, so a confidence of 1 pins the posterior to the
/// measurement and a confidence of 0 gives the standard update.
pub fn update(
    state: &KalmanState,
    z: &BBox,
    confidence: f64,
    cfg: &NoiseConfig,
) -> Result<KalmanState> {
    let zv = Vector4::from(z.to_xyah());
    if !zv.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteMeasurement);
    }
    if !(0.0..=1.0).contains(&confidence) {
        return Err(Error::InvalidDetection(format!(
            "confidence {confidence} outside [0, 1]"
        )));
    }
    let scale = if cfg.nsa_enabled { 1.0 - confidence } else { 1.0 };
    let r = Matrix4::from_diagonal(&Vector4::from(
        cfg.measurement_std(state.mean[3]).map(|s| s * s * scale),
    ));
    let h = projection();
    let pht = state.covariance * h.transpose();
    let s = h * pht + r;
    let chol = s.cholesky().ok_or(Error::SingularCovariance)?;
    // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
    let gain = chol.solve(&pht.transpose()).transpose();
    let innovation = zv - h * state.mean;
    let mean = state.mean + gain * innovation;
    let mut covariance = state.covariance - gain * s * gain.transpose();
    symmetrize(&mut covariance);
    Ok(KalmanState { mean, covariance })
}

/// Squared Mahalanobis distance of an innovation under a 4x4 covariance.
pub fn mahalanobis_sq(innovation: &Vector4<f64>, covariance: &Matrix4<f64>) -> Result<f64> {
    let chol = covariance.cholesky().ok_or(Error::SingularCovariance)?;
    let solved = chol.solve(innovation);
    Ok(innovation.dot(&solved).max(0.0))
}

/// Squared Mahalanobis distance of a measured box from the state's predicted measurement.
pub fn gating_distance(state: &KalmanState, z: &BBox, cfg: &NoiseConfig) -> Result<f64> {
    let (mean, cov) = state.project(cfg);
    mahalanobis_sq(&(Vector4::from(z.to_xyah()) - mean), &cov)
}
