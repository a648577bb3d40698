//! Synthetic landmark world, vehicle, and the two sensors.

mod generate;
mod mount;
mod observe;
mod odometry;
mod route;
mod vehicle;

pub use generate::{generate_world, WorldSpec};
#[cfg(test)]
pub(crate) use generate::random_unit;
pub use mount::{body_pose, mounted_camera_pose, vehicle_pose_from_camera, CameraMount};
pub use observe::{detection_probability, observe, Detection, QueryObservation};
pub use odometry::{
    calibrate_odometry, calibrate_odometry_with, sample_odometry, OdometryBias, OdometryIncrement, OdometryNoiseModel,
    DEFAULT_WHITE_FRACTION, REFERENCE_DISTANCE,
};
pub use route::{Leg, Route, RouteProjection, RoutePoint, RouteShape};
pub use vehicle::{step_vehicle, VehicleControl, VehicleParams, VehicleState};

use alloc::vec::Vec;
use nalgebra::{DVector, Vector3};
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::geometry::LandmarkId;

pub type Descriptor = DVector<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("invalid world spec: {0}")]
    InvalidSpec(&'static str),
    #[error("invalid environment condition: {0}")]
    InvalidCondition(&'static str),
}

/// `base · 0.5^k`: each illumination step halves the previous value.
pub fn condition_value(base_value: f64, k: u32) -> f64 {
    base_value * libm::pow(0.5, k as f64)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Landmark {
    pub id: LandmarkId,
    pub position: Vector3<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::math::serde_dvector"))]
    pub canonical_descriptor: Descriptor,
    /// Unit surface normal.
    pub facing: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct WorldMap {
    pub landmarks: Vec<Landmark>,
    pub route: Route,
    pub seed: u64,
    /// Landmarks further than this from the camera are never seen. Stands in
    /// for occlusion by buildings, which the landmark world does not model.
    #[cfg_attr(feature = "serde", serde(default = "default_view_range"))]
    pub view_range: f64,
}

#[cfg(feature = "serde")]
fn default_view_range() -> f64 {
    DEFAULT_VIEW_RANGE
}

pub const DEFAULT_VIEW_RANGE: f64 = 50.0;

impl WorldMap {
    pub fn landmark(&self, id: LandmarkId) -> Option<&Landmark> {
        // Generated ids are dense and ordered; fall back to a scan otherwise.
        match self.landmarks.get(id.0 as usize) {
            Some(l) if l.id == id => Some(l),
            _ => self.landmarks.iter().find(|l| l.id == id),
        }
    }

    pub fn descriptor_dim(&self) -> usize {
        self.landmarks.first().map_or(0, |l| l.canonical_descriptor.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct EnvironmentCondition {
    /// Illumination level, 0..=10.
    pub illumination_k: u32,
    /// Fog visual range in meters; `None` is clear air.
    pub visual_range_v: Option<f64>,
    /// Meters added to the camera height.
    pub camera_offset_z: f64,
    /// Degrees of downward pitch.
    pub camera_pitch_theta: f64,
    pub rain: bool,
}

impl Default for EnvironmentCondition {
    fn default() -> Self {
        Self::pristine()
    }
}

impl EnvironmentCondition {
    pub const MAX_ILLUMINATION_K: u32 = 10;

    pub fn pristine() -> Self {
        Self {
            illumination_k: 0,
            visual_range_v: None,
            camera_offset_z: 0.0,
            camera_pitch_theta: 0.0,
            rain: false,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.illumination_k > Self::MAX_ILLUMINATION_K {
            return Err(WorldError::InvalidCondition("illumination_k must be in 0..=10"));
        }
        if let Some(v) = self.visual_range_v {
            if !(v > 0.0) {
                return Err(WorldError::InvalidCondition("visual_range_v must be positive"));
            }
        }
        if !(0.0..90.0).contains(&self.camera_pitch_theta) {
            return Err(WorldError::InvalidCondition("camera_pitch_theta must be in [0, 90)"));
        }
        if !self.camera_offset_z.is_finite() {
            return Err(WorldError::InvalidCondition("camera_offset_z must be finite"));
        }
        Ok(())
    }
}

/// How the query appearance departs from the gallery capture.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct DegradationModel {
    /// Fraction of detections lost at full darkness.
    pub dropout_max: f64,
    /// Descriptor noise norm at full darkness.
    pub descriptor_sigma_max: f64,
    pub pixel_sigma: f64,
    /// Fog starts thinning detections at this fraction of the visual range.
    pub fog_falloff_fraction: f64,
    /// Descriptor noise norm per radian of obliqueness.
    pub view_angle_sigma_scale: f64,
    /// Extra pixel noise when raining.
    pub rain_pixel_sigma: f64,
}

impl Default for DegradationModel {
    fn default() -> Self {
        Self {
            dropout_max: 1.0,
            descriptor_sigma_max: 1.2,
            pixel_sigma: 0.5,
            fog_falloff_fraction: 0.6,
            view_angle_sigma_scale: 0.15,
            rain_pixel_sigma: 0.5,
        }
    }
}

impl DegradationModel {
    /// No degradation at all: queries reproduce the gallery capture exactly.
    pub fn none() -> Self {
        Self {
            dropout_max: 0.0,
            descriptor_sigma_max: 0.0,
            pixel_sigma: 0.0,
            fog_falloff_fraction: 0.6,
            view_angle_sigma_scale: 0.0,
            rain_pixel_sigma: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let vals = [
            self.dropout_max,
            self.descriptor_sigma_max,
            self.pixel_sigma,
            self.view_angle_sigma_scale,
            self.rain_pixel_sigma,
        ];
        if vals.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(WorldError::InvalidCondition("degradation parameters must be non-negative"));
        }
        if self.dropout_max > 1.0 {
            return Err(WorldError::InvalidCondition("dropout_max must be at most 1"));
        }
        if !(self.fog_falloff_fraction > 0.0 && self.fog_falloff_fraction <= 1.0) {
            return Err(WorldError::InvalidCondition("fog_falloff_fraction must be in (0, 1]"));
        }
        Ok(())
    }

    /// Probability that a visible landmark survives illumination level `k`.
    pub fn illumination_survival(&self, k: u32) -> f64 {
        1.0 - self.dropout_max * (1.0 - condition_value(1.0, k))
    }

    /// Descriptor noise norm at level `k` for a view `angle` radians off the facing.
    pub fn descriptor_sigma(&self, k: u32, angle: f64) -> f64 {
        self.descriptor_sigma_max * (1.0 - condition_value(1.0, k)) + self.view_angle_sigma_scale * angle
    }
}
