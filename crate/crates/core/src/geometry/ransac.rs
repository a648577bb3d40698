use alloc::vec::Vec;
use nalgebra::{Matrix2x3, Matrix3, Matrix6, UnitQuaternion, Vector3, Vector6};
use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{reprojection_error, solve_p3p, CameraIntrinsics, Correspondence2D3D, GeometryError, Pose};
use crate::math;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct RansacParams {
    pub inlier_threshold_px: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub min_inliers: usize,
    pub refine_iterations: usize,
    pub refine_step_tolerance: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self {
            inlier_threshold_px: 4.0,
            max_iterations: 1000,
            confidence: 0.99,
            min_inliers: 4,
            refine_iterations: 20,
            refine_step_tolerance: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PnpSolution {
    /// Camera-to-world pose.
    pub pose: Pose,
    /// Indices into the input correspondences, ascending.
    pub inliers: Vec<usize>,
}

const SAMPLE: usize = 4;

fn inliers_of(pose: &Pose, k: &CameraIntrinsics, cs: &[Correspondence2D3D], thr: f64) -> Vec<usize> {
    cs.iter()
        .enumerate()
        .filter(|(_, c)| reprojection_error(pose, k, c).is_some_and(|e| e < thr))
        .map(|(i, _)| i)
        .collect()
}

fn required_iterations(inlier_ratio: f64, confidence: f64, max: usize) -> usize {
    let w = libm::pow(inlier_ratio, SAMPLE as f64);
    if w >= 1.0 - 1e-12 {
        return 1;
    }
    if w <= 0.0 {
        return max;
    }
    let n = math::ln(1.0 - confidence) / math::ln(1.0 - w);
    if !n.is_finite() || n > max as f64 {
        max
    } else {
        libm::ceil(n).max(1.0) as usize
    }
}

fn sample_indices<R: Rng>(rng: &mut R, n: usize) -> [usize; SAMPLE] {
    let mut out = [0usize; SAMPLE];
    let mut k = 0;
    while k < SAMPLE {
        let i = rng.random_range(0..n);
        if !out[..k].contains(&i) {
            out[k] = i;
            k += 1;
        }
    }
    out
}

/// Robust PnP: P3P on three sampled correspondences, a fourth picks among the
/// P3P solutions, adaptive iteration count, then Gauss–Newton refinement on
/// the consensus set.
///
/// Every index in the returned inlier set reprojects within
/// `params.inlier_threshold_px` under the returned pose.
pub fn ransac_pnp(
    correspondences: &[Correspondence2D3D],
    intrinsics: &CameraIntrinsics,
    params: &RansacParams,
) -> Result<PnpSolution, GeometryError> {
    let n = correspondences.len();
    if n < SAMPLE {
        return Err(GeometryError::InsufficientCorrespondences(n));
    }
    let thr = params.inlier_threshold_px;
    let min_inliers = params.min_inliers.max(SAMPLE);
    let mut rng = stream(params.seed, Purpose::Ransac, 0, n as u64);

    let mut best: Option<(Pose, Vec<usize>)> = None;
    let mut needed = params.max_iterations;
    let mut iter = 0;
    while iter < needed.min(params.max_iterations) {
        iter += 1;
        let idx = sample_indices(&mut rng, n);
        let triple = [correspondences[idx[0]], correspondences[idx[1]], correspondences[idx[2]]];
        let Ok(cands) = solve_p3p(&triple, intrinsics) else { continue };
        let check = &correspondences[idx[3]];
        let Some(model) = cands
            .into_iter()
            .filter_map(|p| reprojection_error(&p, intrinsics, check).map(|e| (p, e)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(p, _)| p)
        else {
            continue;
        };
        let inl = inliers_of(&model, intrinsics, correspondences, thr);
        if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
            needed = required_iterations(inl.len() as f64 / n as f64, params.confidence, params.max_iterations);
            best = Some((model, inl));
        }
    }

    let Some((mut pose, mut inliers)) = best else {
        return Err(GeometryError::NoConsensus);
    };
    if inliers.len() < min_inliers {
        return Err(GeometryError::NoConsensus);
    }

    // Refine, re-score, and repeat while the consensus set keeps growing.
    for _ in 0..3 {
        let subset: Vec<Correspondence2D3D> = inliers.iter().map(|&i| correspondences[i]).collect();
        let refined = refine_pose(&pose, &subset, intrinsics, params.refine_iterations, params.refine_step_tolerance);
        let refined_inliers = inliers_of(&refined, intrinsics, correspondences, thr);
        if refined_inliers.len() < inliers.len() {
            break;
        }
        let grew = refined_inliers.len() > inliers.len();
        pose = refined;
        inliers = refined_inliers;
        if !grew {
            break;
        }
    }

    debug_assert!(inliers
        .iter()
        .all(|&i| reprojection_error(&pose, intrinsics, &correspondences[i]).is_some_and(|e| e < thr)));
    Ok(PnpSolution { pose, inliers })
}

fn sq_cost(pose_cw: (&Matrix3<f64>, &Vector3<f64>), cs: &[Correspondence2D3D], k: &CameraIntrinsics) -> f64 {
    let (r, t) = pose_cw;
    cs.iter()
        .map(|c| {
            let pc = r * c.point + t;
            match k.project_camera_point(&pc) {
                Some(px) => (px - c.pixel).norm_squared(),
                None => f64::INFINITY,
            }
        })
        .sum()
}

/// Gauss–Newton on the summed squared reprojection error. Steps that would
/// increase the cost stop the iteration.
pub fn refine_pose(
    initial: &Pose,
    correspondences: &[Correspondence2D3D],
    intrinsics: &CameraIntrinsics,
    max_iterations: usize,
    step_tolerance: f64,
) -> Pose {
    // Work in world-to-camera form: p_c = R p_w + t.
    let inv = initial.inverse();
    let mut q = inv.rotation;
    let mut t = inv.translation;
    let mut r = q.to_rotation_matrix().into_inner();
    let mut cost = sq_cost((&r, &t), correspondences, intrinsics);
    if !cost.is_finite() {
        return *initial;
    }
    for _ in 0..max_iterations {
        let mut h = Matrix6::<f64>::zeros();
        let mut g = Vector6::<f64>::zeros();
        for c in correspondences {
            let pc = r * c.point + t;
            let (iz, iz2) = (1.0 / pc.z, 1.0 / (pc.z * pc.z));
            let res = nalgebra::Vector2::new(
                intrinsics.focal_x * pc.x * iz + intrinsics.principal_x - c.pixel.x,
                intrinsics.focal_y * pc.y * iz + intrinsics.principal_y - c.pixel.y,
            );
            let dproj = Matrix2x3::new(
                intrinsics.focal_x * iz,
                0.0,
                -intrinsics.focal_x * pc.x * iz2,
                0.0,
                intrinsics.focal_y * iz,
                -intrinsics.focal_y * pc.y * iz2,
            );
            // d(pc)/d(omega) = -[pc]x, d(pc)/d(tau) = I
            let dw = dproj * (-pc.cross_matrix());
            let mut j = nalgebra::Matrix2x6::<f64>::zeros();
            j.fixed_view_mut::<2, 3>(0, 0).copy_from(&dw);
            j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
            h += j.transpose() * j;
            g += j.transpose() * res;
        }
        let Some(chol) = h.cholesky() else { break };
        let delta = -chol.solve(&g);
        let dq = UnitQuaternion::from_scaled_axis(Vector3::new(delta[0], delta[1], delta[2]));
        let tau = Vector3::new(delta[3], delta[4], delta[5]);
        let q_new = dq * q;
        let t_new = dq * t + tau;
        let r_new = q_new.to_rotation_matrix().into_inner();
        let cost_new = sq_cost((&r_new, &t_new), correspondences, intrinsics);
        if !(cost_new <= cost) {
            break;
        }
        q = q_new;
        t = t_new;
        r = r_new;
        cost = cost_new;
        if delta.norm() < step_tolerance {
            break;
        }
    }
    Pose::new(t, q).inverse()
}
