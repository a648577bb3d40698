use nalgebra::{Matrix3, Vector3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{EnvironmentCondition, VehicleState};
use crate::geometry::{yaw_rotation, Pose};
use crate::math;

/// Side-looking camera: optical axis perpendicular to the right of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct CameraMount {
    /// Base height above the ground, meters.
    pub height: f64,
    pub offset_z: f64,
    /// Downward pitch, degrees.
    pub pitch_theta: f64,
}

impl Default for CameraMount {
    fn default() -> Self {
        Self { height: 1.5, offset_z: 0.0, pitch_theta: 0.0 }
    }
}

impl CameraMount {
    pub fn with_condition(self, condition: &EnvironmentCondition) -> Self {
        Self { offset_z: condition.camera_offset_z, pitch_theta: condition.camera_pitch_theta, ..self }
    }

    /// Camera pose in the vehicle body frame (x forward, y left, z up).
    pub fn body_to_camera(&self) -> Pose {
        let th = math::deg_to_rad(self.pitch_theta);
        let (s, c) = (math::sin(th), math::cos(th));
        // Columns: camera x (image right), y (image down), z (optical axis).
        let r = Matrix3::new(
            -1.0, 0.0, 0.0, //
            0.0, s, -c, //
            0.0, -c, -s,
        );
        Pose::from_rotation_matrix(Vector3::new(0.0, 0.0, self.height + self.offset_z), &r)
    }
}

pub fn body_pose(vehicle: &VehicleState) -> Pose {
    Pose::new(Vector3::new(vehicle.x, vehicle.y, 0.0), yaw_rotation(vehicle.yaw))
}

pub fn mounted_camera_pose(vehicle: &VehicleState, mount: &CameraMount) -> Pose {
    body_pose(vehicle).compose(&mount.body_to_camera())
}

/// Inverts the mount: the body pose that places the camera at `camera`.
pub fn vehicle_pose_from_camera(camera: &Pose, mount: &CameraMount) -> Pose {
    camera.compose(&mount.body_to_camera().inverse())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_mount_looks_right_horizontally() {
        let v = VehicleState::default();
        let cam = mounted_camera_pose(&v, &CameraMount::default());
        assert!((cam.translation - Vector3::new(0.0, 0.0, 1.5)).norm() < 1e-12);
        let axis = cam.rotation * Vector3::z();
        assert!((axis - Vector3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        let down = cam.rotation * Vector3::y();
        assert!((down - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn raised_and_pitched_mount() {
        let v = VehicleState::default();
        let m = CameraMount { offset_z: 7.0, pitch_theta: 35.0, ..Default::default() };
        let cam = mounted_camera_pose(&v, &m);
        assert!((cam.translation.z - 8.5).abs() < 1e-12);
        let axis = cam.rotation * Vector3::z();
        let below = math::rad_to_deg(libm::asin(-axis.z));
        assert!((below - 35.0).abs() < 1e-9);
        assert!(axis.x.abs() < 1e-12 && axis.y < 0.0);
    }

    #[test]
    fn yaw_equivariance() {
        let m = CameraMount { offset_z: 2.0, pitch_theta: 10.0, ..Default::default() };
        let a = VehicleState { x: 3.0, y: -1.0, yaw: 0.2, speed: 0.0 };
        let alpha = 0.9;
        let b = VehicleState { yaw: a.yaw + alpha, ..a };
        let pa = mounted_camera_pose(&a, &m);
        let pb = mounted_camera_pose(&b, &m);
        let rel = pa.rotation.inverse() * pb.rotation;
        let expect = pa.rotation.inverse() * yaw_rotation(alpha) * pa.rotation;
        assert!(rel.angle_to(&expect) < 1e-12);
        assert!((pa.translation - pb.translation).norm() < 1e-12);
    }

    #[test]
    fn body_pose_round_trip() {
        let m = CameraMount { offset_z: 5.0, pitch_theta: 27.5, ..Default::default() };
        let v = VehicleState { x: 10.0, y: 4.0, yaw: -2.0, speed: 1.0 };
        let back = vehicle_pose_from_camera(&mounted_camera_pose(&v, &m), &m);
        let want = body_pose(&v);
        assert!((back.translation - want.translation).norm() < 1e-12);
        assert!(back.angle_to(&want) < 1e-12);
    }
}
