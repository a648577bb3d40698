//! Wheel odometry with distance-proportional drift.
//!
//! Increments are reported in the world-aligned odometry frame. The error has
//! two parts: a per-segment bias (a fixed error per meter in a random body-frame
//! direction, and a fixed yaw rate per meter of random sign) drawn whenever the
//! odometry is (re)initialized, and a white random-walk share. At the 100 m
//! reference the white share carries `white_fraction` of the error's second
//! moment. The bias magnitude is fixed, so every run drifts at close to the
//! nominal rate rather than at a randomly scaled one.

use nalgebra::{Rotation2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::VehicleState;
use crate::math;

/// Distance at which drift rates are matched, meters.
pub const REFERENCE_DISTANCE: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OdometryNoiseModel {
    /// Mean position error per meter traveled.
    pub position_drift_rate: f64,
    /// Mean absolute heading error, degrees per meter.
    pub rotation_drift_rate: f64,
    /// Distance per odometry sample the white sigmas refer to, meters.
    pub step_length: f64,
    pub white_fraction: f64,
    /// Bias magnitude, meters of error per meter traveled.
    pub bias_position: f64,
    /// Heading bias magnitude, radians per meter.
    pub bias_yaw: f64,
    /// Per-axis white sigma per step, meters.
    pub step_sigma_position: f64,
    /// White heading sigma per step, radians.
    pub step_sigma_yaw: f64,
}

impl OdometryNoiseModel {
    pub fn perfect() -> Self {
        calibrate_odometry(0.0, 0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OdometryBias {
    /// Body frame (forward, left) error per meter traveled.
    pub position: Vector2<f64>,
    /// Radians per meter.
    pub yaw: f64,
}

impl OdometryBias {
    pub fn sample<R: Rng + ?Sized>(model: &OdometryNoiseModel, rng: &mut R) -> Self {
        let dir = rng.random_range(-core::f64::consts::PI..core::f64::consts::PI);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        Self {
            position: Vector2::new(math::cos(dir), math::sin(dir)) * model.bias_position,
            yaw: sign * model.bias_yaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OdometryIncrement {
    /// World-aligned odometry frame, meters.
    pub delta_translation: Vector2<f64>,
    pub delta_yaw: f64,
}

pub const DEFAULT_WHITE_FRACTION: f64 = 0.01;

/// Bias and white sigmas such that the mean dead-reckoning error after
/// [`REFERENCE_DISTANCE`] equals the target rates.
///
/// With target error `E`, the white share has total variance `f·E²` (split over
/// the axes for position) and the bias contributes `ν = b·D`. The mean norm of
/// a bias offset plus small Gaussian noise is about `ν + σ²/(2ν)` (2D) or `ν`
/// (1D), which sets `ν`.
pub fn calibrate_odometry(target_position_rate: f64, target_rotation_rate: f64, step_length: f64) -> OdometryNoiseModel {
    calibrate_odometry_with(target_position_rate, target_rotation_rate, step_length, DEFAULT_WHITE_FRACTION)
}

pub fn calibrate_odometry_with(
    target_position_rate: f64,
    target_rotation_rate: f64,
    step_length: f64,
    white_fraction: f64,
) -> OdometryNoiseModel {
    let d = REFERENCE_DISTANCE;
    let f = white_fraction.clamp(0.0, 1.0);
    let ep = target_position_rate.max(0.0) * d;
    let ey = math::deg_to_rad(target_rotation_rate.max(0.0)) * d;
    // ν + f·E²/(4ν) = E  ⇒  ν = E·(1 + √(1 − f)) / 2
    let nu_p = ep * (1.0 + libm::sqrt(1.0 - f)) / 2.0;
    let walk = libm::sqrt(f * step_length / d);
    OdometryNoiseModel {
        position_drift_rate: target_position_rate,
        rotation_drift_rate: target_rotation_rate,
        step_length,
        white_fraction: f,
        bias_position: nu_p / d,
        bias_yaw: ey / d,
        step_sigma_position: ep * walk / libm::sqrt(2.0),
        step_sigma_yaw: ey * walk,
    }
}

/// True increment plus bias and white noise scaled to the distance covered.
pub fn sample_odometry<R: Rng + ?Sized>(
    truth_prev: &VehicleState,
    truth_curr: &VehicleState,
    model: &OdometryNoiseModel,
    bias: &OdometryBias,
    rng: &mut R,
) -> OdometryIncrement {
    let dp = Vector2::new(truth_curr.x - truth_prev.x, truth_curr.y - truth_prev.y);
    let dyaw = math::wrap_angle(truth_curr.yaw - truth_prev.yaw);
    let ds = dp.norm();
    let scale = if model.step_length > 0.0 { libm::sqrt(ds / model.step_length) } else { 0.0 };
    let n: [f64; 3] = core::array::from_fn(|_| StandardNormal.sample(rng));
    let biased = Rotation2::new(truth_prev.yaw) * bias.position * ds;
    OdometryIncrement {
        delta_translation: dp + biased + Vector2::new(n[0], n[1]) * (model.step_sigma_position * scale),
        delta_yaw: dyaw + bias.yaw * ds + n[2] * model.step_sigma_yaw * scale,
    }
}
