use nalgebra::{Matrix3, Vector2, Vector3};

use super::{CameraIntrinsics, GeometryError, Pose};

/// Relative tolerance on the smallest eigenvalue of the normal matrix of the
/// midpoint system; ~1e-4 rad of total ray spread.
const MIN_EIGENVALUE_PER_VIEW: f64 = 1e-8;
const MIN_BASELINE: f64 = 1e-9;
const REFINE_ITERATIONS: usize = 10;

/// Least-squares point from views with known camera-to-world poses.
///
/// The closed-form midpoint solution seeds a Gauss–Newton refinement of the
/// reprojection residuals.
pub fn triangulate(
    observations: &[(Pose, Vector2<f64>)],
    intrinsics: &CameraIntrinsics,
) -> Result<Vector3<f64>, GeometryError> {
    let n = observations.len();
    if n < 2 {
        return Err(GeometryError::InsufficientObservations(n));
    }
    let c0 = observations[0].0.translation;
    let spread = observations
        .iter()
        .map(|(p, _)| (p.translation - c0).norm())
        .fold(0.0, f64::max);
    if spread < MIN_BASELINE {
        return Err(GeometryError::DegenerateGeometry);
    }

    let mut a = Matrix3::zeros();
    let mut b = Vector3::zeros();
    for (pose, px) in observations {
        let r = pose.rotation * intrinsics.bearing(px);
        let m = Matrix3::identity() - r * r.transpose();
        a += m;
        b += m * pose.translation;
    }
    let eig = a.symmetric_eigen();
    if eig.eigenvalues.min() < MIN_EIGENVALUE_PER_VIEW * n as f64 {
        return Err(GeometryError::DegenerateGeometry);
    }
    let mut x = a
        .cholesky()
        .ok_or(GeometryError::DegenerateGeometry)?
        .solve(&b);

    for _ in 0..REFINE_ITERATIONS {
        let mut h = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for (pose, px) in observations {
            let rt = pose.rotation.inverse().to_rotation_matrix().into_inner();
            let pc = rt * (x - pose.translation);
            if pc.z <= 0.0 {
                return Err(GeometryError::DegenerateGeometry);
            }
            let (iz, iz2) = (1.0 / pc.z, 1.0 / (pc.z * pc.z));
            let res = Vector2::new(
                intrinsics.focal_x * pc.x * iz + intrinsics.principal_x - px.x,
                intrinsics.focal_y * pc.y * iz + intrinsics.principal_y - px.y,
            );
            let dproj = nalgebra::Matrix2x3::new(
                intrinsics.focal_x * iz,
                0.0,
                -intrinsics.focal_x * pc.x * iz2,
                0.0,
                intrinsics.focal_y * iz,
                -intrinsics.focal_y * pc.y * iz2,
            );
            let j = dproj * rt;
            h += j.transpose() * j;
            g += j.transpose() * res;
        }
        let Some(chol) = h.cholesky() else { break };
        let step = chol.solve(&g);
        x -= step;
        if step.norm() < 1e-12 * (1.0 + x.norm()) {
            break;
        }
    }
    for (pose, _) in observations {
        if pose.inverse_transform_point(&x).z <= 0.0 {
            return Err(GeometryError::DegenerateGeometry);
        }
    }
    Ok(x)
}
