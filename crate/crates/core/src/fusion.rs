//! Planar EKF over (x, y, yaw) fusing odometry increments with visual fixes.
//!
//! Odometry increments are already expressed in the world-aligned odometry
//! frame, so the motion model is additive and its Jacobian is the identity.
//! Visual fixes observe the full state directly.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::Pose;
use crate::math;
use crate::world::{OdometryIncrement, OdometryNoiseModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FusionError {
    #[error("forward axis is (nearly) vertical")]
    DegenerateOrientation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EkfState {
    /// (x, y, yaw).
    pub mean: Vector3<f64>,
    pub covariance: Matrix3<f64>,
}

impl EkfState {
    pub fn new(mean: Vector3<f64>, covariance: Matrix3<f64>) -> Self {
        Self { mean: Vector3::new(mean.x, mean.y, math::wrap_angle(mean.z)), covariance }
    }

    pub fn is_valid(&self) -> bool {
        let p = &self.covariance;
        if (p - p.transpose()).abs().max() > 1e-9 {
            return false;
        }
        p.symmetric_eigen().eigenvalues.min() >= -1e-12
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct FusionConfig {
    /// Added to the covariance at every predict step.
    pub process_noise: Matrix3<f64>,
    pub measurement_noise: Matrix3<f64>,
    /// Planar distance beyond which a fix is discarded, meters.
    pub outlier_gate: f64,
    /// Covariance after (re)initialization.
    pub initial_covariance: Matrix3<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            process_noise: Matrix3::from_diagonal(&Vector3::new(2e-3, 2e-3, 1e-5)),
            measurement_noise: Matrix3::from_diagonal(&Vector3::new(0.25, 0.25, sq(math::deg_to_rad(2.0)))),
            outlier_gate: 20.0,
            initial_covariance: Matrix3::from_diagonal(&Vector3::new(0.01, 0.01, sq(math::deg_to_rad(1.0)))),
        }
    }
}

impl FusionConfig {
    /// Process noise for one odometry sample of `step_length` meters.
    ///
    /// The white share enters as is; the bias share is spread as if its
    /// error over `correlation_length` meters were independent per step, which
    /// keeps the filter from trusting odometry more than its actual drift.
    pub fn from_odometry(model: &OdometryNoiseModel, step_length: f64, correlation_length: f64) -> Self {
        let scale = if model.step_length > 0.0 { step_length / model.step_length } else { 0.0 };
        let n = (correlation_length / step_length).max(1.0);
        let pos = sq(model.step_sigma_position) * scale + sq(model.bias_position * step_length) * 0.5 * n;
        let yaw = sq(model.step_sigma_yaw) * scale + sq(model.bias_yaw * step_length) * n;
        Self { process_noise: Matrix3::from_diagonal(&Vector3::new(pos, pos, yaw)), ..Self::default() }
    }
}

fn sq(x: f64) -> f64 {
    x * x
}

fn symmetrize(p: &Matrix3<f64>) -> Matrix3<f64> {
    (p + p.transpose()) * 0.5
}

pub fn ekf_predict(state: &EkfState, odom: &OdometryIncrement, config: &FusionConfig) -> EkfState {
    let mean = Vector3::new(
        state.mean.x + odom.delta_translation.x,
        state.mean.y + odom.delta_translation.y,
        math::wrap_angle(state.mean.z + odom.delta_yaw),
    );
    let out = EkfState { mean, covariance: symmetrize(&(state.covariance + config.process_noise)) };
    debug_assert!(out.is_valid(), "covariance lost symmetry or PSD in predict");
    out
}

/// Fuses a planar fix `(x, y, yaw)`. Fixes further than the gate from the
/// current mean leave the state untouched and report `false`.
pub fn ekf_update(state: &EkfState, measurement: &Vector3<f64>, config: &FusionConfig) -> (EkfState, bool) {
    let dx = measurement.x - state.mean.x;
    let dy = measurement.y - state.mean.y;
    if !(libm::hypot(dx, dy) <= config.outlier_gate) {
        return (*state, false);
    }
    let innovation = Vector3::new(dx, dy, math::wrap_angle(measurement.z - state.mean.z));
    let p = &state.covariance;
    let s = p + config.measurement_noise;
    let Some(s_inv) = s.try_inverse() else { return (*state, false) };
    let k = p * s_inv;
    let upd = state.mean + k * innovation;
    let mean = Vector3::new(upd.x, upd.y, math::wrap_angle(upd.z));
    let ik = Matrix3::identity() - k;
    let covariance = symmetrize(&(ik * p * ik.transpose() + k * config.measurement_noise * k.transpose()));
    let out = EkfState { mean, covariance };
    debug_assert!(out.is_valid(), "covariance lost symmetry or PSD in update");
    (out, true)
}

/// Ground-plane position and heading of a 6-DoF pose whose local x axis is
/// the forward direction.
pub fn project_pose_to_plane(pose: &Pose) -> Result<Vector3<f64>, FusionError> {
    let f = pose.rotation * Vector3::x();
    if libm::hypot(f.x, f.y) < 1e-6 {
        return Err(FusionError::DegenerateOrientation);
    }
    Ok(Vector3::new(pose.translation.x, pose.translation.y, math::atan2(f.y, f.x)))
}
