use alloc::collections::BTreeSet;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{covis_cluster, global_descriptor, match_nn_ratio, retrieve, GalleryMap, KeyframeId};
use crate::geometry::{ransac_pnp, Correspondence2D3D, LandmarkId, Pose, RansacParams};
use crate::rng::{mix_key, Purpose};
use crate::world::{Descriptor, QueryObservation};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct LocalizeParams {
    pub top_k: usize,
    pub ratio: f64,
    pub ransac: RansacParams,
    /// Seconds between capture and availability of the estimate.
    pub latency: f64,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self { top_k: 5, ratio: 0.8, ransac: RansacParams::default(), latency: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PoseEstimate {
    /// Camera-to-world.
    pub pose: Pose,
    pub num_inliers: usize,
    /// Index of the winning cluster in retrieval-cluster order.
    pub cluster_id: usize,
    pub query_timestamp: f64,
    pub latency: f64,
    /// Pixel / point pairs supporting the pose.
    pub inliers: Vec<Correspondence2D3D>,
}

/// Estimates the camera pose of `observation` against the gallery.
///
/// Retrieval picks `top_k` keyframes, which are split into co-visibility
/// clusters. Each cluster matches the query descriptors against the
/// descriptors of the 3D points its keyframes observe and runs RANSAC PnP on
/// the resulting 2D–3D matches. The pose with the most inliers wins; clusters
/// come ordered by size then id, so ties go to the larger, earlier cluster.
pub fn localize(gallery: &GalleryMap, observation: &QueryObservation, params: &LocalizeParams) -> Option<PoseEstimate> {
    if observation.detections.is_empty() || gallery.keyframes.is_empty() {
        return None;
    }
    let query_global = global_descriptor(&gallery.projector, &observation.detections);
    let retrieved = retrieve(gallery, &query_global, params.top_k.max(1));
    let clusters = covis_cluster(gallery, &retrieved);
    let query_desc: Vec<Descriptor> = observation.detections.iter().map(|d| d.descriptor.clone()).collect();

    let mut best: Option<PoseEstimate> = None;
    for (ci, cluster) in clusters.iter().enumerate() {
        let ids = cluster_points(gallery, cluster);
        let gallery_desc: Vec<Descriptor> = ids.iter().map(|id| gallery.points3d[id].descriptor.clone()).collect();
        let matches = match_nn_ratio(&query_desc, &gallery_desc, params.ratio);
        let correspondences: Vec<Correspondence2D3D> = matches
            .iter()
            .map(|&(qi, gi)| Correspondence2D3D {
                pixel: observation.detections[qi].pixel,
                point: gallery.points3d[&ids[gi]].position,
                landmark_id: ids[gi],
            })
            .collect();
        let ransac = RansacParams { seed: mix_key(params.ransac.seed, Purpose::Ransac, ci as u64, 0), ..params.ransac };
        let Ok(sol) = ransac_pnp(&correspondences, &gallery.intrinsics, &ransac) else { continue };
        if best.as_ref().is_none_or(|b| sol.inliers.len() > b.num_inliers) {
            best = Some(PoseEstimate {
                pose: sol.pose,
                num_inliers: sol.inliers.len(),
                cluster_id: ci,
                query_timestamp: observation.timestamp,
                latency: params.latency,
                inliers: sol.inliers.iter().map(|&i| correspondences[i]).collect(),
            });
        }
    }
    best
}

/// Triangulated points observed by any keyframe of the cluster, ascending id.
fn cluster_points(gallery: &GalleryMap, cluster: &[KeyframeId]) -> Vec<LandmarkId> {
    let mut ids = BTreeSet::new();
    for k in cluster {
        let Some(kf) = gallery.keyframe(*k) else { continue };
        for d in &kf.detections {
            if gallery.points3d.contains_key(&d.debug_landmark_id) {
                ids.insert(d.debug_landmark_id);
            }
        }
    }
    ids.into_iter().collect()
}
