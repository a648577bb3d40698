//! Poses, pinhole projection, triangulation and PnP.

mod p3p;
mod pose;
mod ransac;
mod triangulate;

pub use p3p::solve_p3p;
pub use pose::{yaw_rotation, Pose};
pub use ransac::{ransac_pnp, refine_pose, PnpSolution, RansacParams};
pub use triangulate::triangulate;

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
pub struct LandmarkId(pub u32);

impl core::fmt::Display for LandmarkId {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeometryError {
    #[error("at least 2 observations are required, got {0}")]
    InsufficientObservations(usize),
    #[error("degenerate geometry")]
    DegenerateGeometry,
    #[error("at least 4 correspondences are required, got {0}")]
    InsufficientCorrespondences(usize),
    #[error("no model reached the minimum inlier count")]
    NoConsensus,
    #[error("invalid camera intrinsics")]
    InvalidIntrinsics,
    #[error("pixel outside the image bounds")]
    PixelOutOfBounds,
}

/// Pinhole intrinsics; no distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CameraIntrinsics {
    pub focal_x: f64,
    pub focal_y: f64,
    pub principal_x: f64,
    pub principal_y: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// 800×600 with a 90° horizontal field of view.
    fn default() -> Self {
        Self {
            focal_x: 400.0,
            focal_y: 400.0,
            principal_x: 400.0,
            principal_y: 300.0,
            width: 800,
            height: 600,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        focal_x: f64,
        focal_y: f64,
        principal_x: f64,
        principal_y: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            focal_x,
            focal_y,
            principal_x,
            principal_y,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.focal_x > 0.0
            && self.focal_y > 0.0
            && self.focal_x.is_finite()
            && self.focal_y.is_finite()
            && self.contains(&Vector2::new(self.principal_x, self.principal_y));
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics)
        }
    }

    pub fn contains(&self, px: &Vector2<f64>) -> bool {
        px.x >= 0.0 && px.y >= 0.0 && px.x < self.width as f64 && px.y < self.height as f64
    }

    /// Projects a camera-frame point, ignoring bounds. `None` for non-positive depth.
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.focal_x * p.x / p.z + self.principal_x,
            self.focal_y * p.y / p.z + self.principal_y,
        ))
    }

    /// Unit ray in the camera frame through a pixel.
    pub fn bearing(&self, px: &Vector2<f64>) -> Vector3<f64> {
        Vector3::new(
            (px.x - self.principal_x) / self.focal_x,
            (px.y - self.principal_y) / self.focal_y,
            1.0,
        )
        .normalize()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Correspondence2D3D {
    pub pixel: Vector2<f64>,
    pub point: Vector3<f64>,
    pub landmark_id: LandmarkId,
}

impl Correspondence2D3D {
    pub fn new(
        pixel: Vector2<f64>,
        point: Vector3<f64>,
        landmark_id: LandmarkId,
        intrinsics: &CameraIntrinsics,
    ) -> Result<Self, GeometryError> {
        if !intrinsics.contains(&pixel) {
            return Err(GeometryError::PixelOutOfBounds);
        }
        Ok(Self {
            pixel,
            point,
            landmark_id,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoseError {
    /// Meters.
    pub translation_error: f64,
    /// Degrees, in [0, 180].
    pub rotation_error: f64,
}

impl PoseError {
    pub fn within(&self, max_translation: f64, max_rotation_deg: f64) -> bool {
        self.translation_error < max_translation && self.rotation_error < max_rotation_deg
    }
}

/// Projects a world point through a camera-to-world pose.
pub fn project(
    camera_pose: &Pose,
    intrinsics: &CameraIntrinsics,
    point: &Vector3<f64>,
) -> Option<Vector2<f64>> {
    let pc = camera_pose.inverse_transform_point(point);
    intrinsics
        .project_camera_point(&pc)
        .filter(|px| intrinsics.contains(px))
}

/// Reprojection error in pixels, `None` if the point is behind the camera.
pub fn reprojection_error(
    camera_pose: &Pose,
    intrinsics: &CameraIntrinsics,
    c: &Correspondence2D3D,
) -> Option<f64> {
    let pc = camera_pose.inverse_transform_point(&c.point);
    intrinsics
        .project_camera_point(&pc)
        .map(|px| (px - c.pixel).norm())
}

pub fn pose_error(estimate: &Pose, truth: &Pose) -> PoseError {
    PoseError {
        translation_error: (estimate.translation - truth.translation).norm(),
        rotation_error: math::rad_to_deg(truth.angle_to(estimate)),
    }
}
