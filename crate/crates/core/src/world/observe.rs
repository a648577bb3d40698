use alloc::vec::Vec;
use nalgebra::{DVector, Vector2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{DegradationModel, Descriptor, EnvironmentCondition, Landmark, WorldMap};
use crate::geometry::{CameraIntrinsics, LandmarkId, Pose};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Detection {
    pub pixel: Vector2<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::math::serde_dvector"))]
    pub descriptor: Descriptor,
    /// Ground truth for tests and gallery bookkeeping only; localization never reads it.
    pub debug_landmark_id: LandmarkId,
}

/// The synthetic stand-in for a camera image.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct QueryObservation {
    pub timestamp: f64,
    pub detections: Vec<Detection>,
    /// Evaluation only.
    pub camera_pose_truth: Pose,
}

struct Visible {
    pixel: Vector2<f64>,
    distance: f64,
    /// Angle between the viewing ray and the facing, radians.
    obliqueness: f64,
}

fn visible(l: &Landmark, camera: &Pose, k: &CameraIntrinsics, range: f64) -> Option<Visible> {
    let to_camera = camera.translation - l.position;
    let distance = to_camera.norm();
    if distance <= 0.0 || distance > range {
        return None;
    }
    let cos = l.facing.dot(&to_camera) / distance;
    if cos <= 0.0 {
        return None;
    }
    let pc = camera.inverse_transform_point(&l.position);
    let pixel = k.project_camera_point(&pc).filter(|px| k.contains(px))?;
    Some(Visible { pixel, distance, obliqueness: math::acos(cos.min(1.0)) })
}

fn fog_survival(distance: f64, condition: &EnvironmentCondition, d: &DegradationModel) -> f64 {
    let Some(v) = condition.visual_range_v else { return 1.0 };
    let start = d.fog_falloff_fraction * v;
    if distance < start {
        1.0
    } else if distance >= v {
        0.0
    } else {
        (v - distance) / (v - start)
    }
}

/// Probability that `landmark` appears in a query taken from `camera`, with
/// the world's `view_range`.
pub fn detection_probability(
    landmark: &Landmark,
    view_range: f64,
    camera: &Pose,
    intrinsics: &CameraIntrinsics,
    condition: &EnvironmentCondition,
    degradation: &DegradationModel,
) -> f64 {
    visible(landmark, camera, intrinsics, view_range).map_or(0.0, |vis| {
        fog_survival(vis.distance, condition, degradation) * degradation.illumination_survival(condition.illumination_k)
    })
}

/// Detects landmarks from `camera_pose` under `condition`.
///
/// Landmarks are visited in map order and each visible one consumes a fixed
/// pattern of draws, so the output is a pure function of the rng state.
/// Zero noise terms skip their draws and leave pixels and descriptors exact.
pub fn observe<R: Rng + ?Sized>(
    world: &WorldMap,
    camera_pose: &Pose,
    intrinsics: &CameraIntrinsics,
    condition: &EnvironmentCondition,
    degradation: &DegradationModel,
    timestamp: f64,
    rng: &mut R,
) -> QueryObservation {
    let k = condition.illumination_k;
    let illum = degradation.illumination_survival(k);
    let pixel_sigma = degradation.pixel_sigma + if condition.rain { degradation.rain_pixel_sigma } else { 0.0 };
    let mut detections = Vec::new();

    for l in &world.landmarks {
        let Some(vis) = visible(l, camera_pose, intrinsics, world.view_range) else { continue };
        let p = fog_survival(vis.distance, condition, degradation) * illum;
        if p <= 0.0 {
            continue;
        }
        if p < 1.0 && rng.random::<f64>() >= p {
            continue;
        }
        let mut pixel = vis.pixel;
        if pixel_sigma > 0.0 {
            let n: [f64; 2] = core::array::from_fn(|_| StandardNormal.sample(rng));
            pixel += Vector2::new(n[0], n[1]) * pixel_sigma;
        }
        let sigma = degradation.descriptor_sigma(k, vis.obliqueness);
        let descriptor = if sigma > 0.0 {
            let dim = l.canonical_descriptor.len();
            let per = sigma / libm::sqrt(dim as f64);
            let noise = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
            let d = &l.canonical_descriptor + noise * per;
            let n = d.norm();
            if n > 1e-12 { d / n } else { l.canonical_descriptor.clone() }
        } else {
            l.canonical_descriptor.clone()
        };
        if !intrinsics.contains(&pixel) {
            continue;
        }
        detections.push(Detection { pixel, descriptor, debug_landmark_id: l.id });
    }
    QueryObservation { timestamp, detections, camera_pose_truth: *camera_pose }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;
    use crate::rng::{stream, Purpose};
    use crate::world::{generate_world, mounted_camera_pose, CameraMount, RouteShape, VehicleState, WorldSpec};
    use nalgebra::Vector3;

    fn world() -> WorldMap {
        generate_world(&WorldSpec { route: RouteShape::Straight { length: 200.0 }, seed: 3, ..Default::default() }).unwrap()
    }

    fn camera_at(x: f64) -> Pose {
        mounted_camera_pose(&VehicleState { x, ..Default::default() }, &CameraMount::default())
    }

    #[test]
    fn pristine_is_exact_projection() {
        let w = world();
        let k = CameraIntrinsics::default();
        let cam = camera_at(100.0);
        let cond = EnvironmentCondition::pristine();
        let deg = DegradationModel { pixel_sigma: 0.0, ..DegradationModel::none() };
        let a = observe(&w, &cam, &k, &cond, &deg, 0.0, &mut stream(1, Purpose::Test, 0, 0));
        let b = observe(&w, &cam, &k, &cond, &deg, 0.0, &mut stream(2, Purpose::Test, 0, 0));
        assert_eq!(a, b);
        assert!(a.detections.len() > 10);
        let expected: Vec<LandmarkId> = w
            .landmarks
            .iter()
            .filter(|l| detection_probability(l, w.view_range, &cam, &k, &cond, &deg) > 0.0)
            .map(|l| l.id)
            .collect();
        let got: Vec<LandmarkId> = a.detections.iter().map(|d| d.debug_landmark_id).collect();
        assert_eq!(got, expected);
        for d in &a.detections {
            let l = w.landmark(d.debug_landmark_id).unwrap();
            assert_eq!(Some(d.pixel), project(&cam, &k, &l.position));
            assert_eq!(d.descriptor, l.canonical_descriptor);
            assert!(l.facing.dot(&(cam.translation - l.position)) > 0.0);
        }
    }

    #[test]
    fn fog_cuts_off_beyond_visual_range() {
        let k = CameraIntrinsics::default();
        let cam = Pose::identity();
        let facing = Vector3::new(0.0, 0.0, -1.0);
        let far = Landmark { id: LandmarkId(0), position: Vector3::new(0.0, 0.0, 50.0), canonical_descriptor: DVector::from_element(4, 0.5), facing };
        let cond = EnvironmentCondition { visual_range_v: Some(10.0), ..Default::default() };
        let deg = DegradationModel::none();
        assert_eq!(detection_probability(&far, f64::INFINITY, &cam, &k, &cond, &deg), 0.0);
        let w = WorldMap { landmarks: alloc::vec![far.clone()], route: crate::world::Route::straight(1.0).unwrap(), seed: 0, view_range: f64::INFINITY };
        for i in 0..100 {
            let o = observe(&w, &cam, &k, &cond, &deg, 0.0, &mut stream(i, Purpose::Test, 0, 0));
            assert!(o.detections.is_empty());
        }
        // Linear band between 0.6 v and v.
        let mid = Landmark { position: Vector3::new(0.0, 0.0, 8.0), ..far };
        assert!((detection_probability(&mid, f64::INFINITY, &cam, &k, &cond, &deg) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn illumination_dropout_rate() {
        let w = world();
        let k = CameraIntrinsics::default();
        let cam = camera_at(100.0);
        let deg = DegradationModel { dropout_max: 0.9, ..DegradationModel::none() };
        let base = observe(&w, &cam, &k, &EnvironmentCondition::pristine(), &deg, 0.0, &mut stream(0, Purpose::Test, 0, 0))
            .detections
            .len() as f64;
        let dark = EnvironmentCondition { illumination_k: 10, ..Default::default() };
        let mut total = 0.0;
        for i in 0..1000 {
            total += observe(&w, &cam, &k, &dark, &deg, 0.0, &mut stream(i, Purpose::Test, 1, 0)).detections.len() as f64;
        }
        let frac = total / 1000.0 / base;
        let want = 1.0 - 0.9 * (1.0 - 1.0 / 1024.0);
        assert!((frac - want).abs() < 0.02, "{frac} vs {want}");
    }

    #[test]
    fn detection_probability_monotone_in_k_and_v() {
        let w = world();
        let k = CameraIntrinsics::default();
        let cam = camera_at(80.0);
        let deg = DegradationModel::default();
        for l in &w.landmarks {
            let mut prev = f64::INFINITY;
            for ik in 0..=10 {
                let c = EnvironmentCondition { illumination_k: ik, visual_range_v: Some(30.0), ..Default::default() };
                let p = detection_probability(l, w.view_range, &cam, &k, &c, &deg);
                assert!(p <= prev + 1e-15);
                prev = p;
            }
            let mut prev = -1.0;
            for v in [10.0, 30.0, 60.0, 90.0] {
                let c = EnvironmentCondition { visual_range_v: Some(v), ..Default::default() };
                let p = detection_probability(l, w.view_range, &cam, &k, &c, &deg);
                assert!(p >= prev - 1e-15);
                prev = p;
            }
        }
    }

    #[test]
    fn detection_counts_monotone_statistically() {
        let w = world();
        let k = CameraIntrinsics::default();
        let cam = camera_at(120.0);
        let deg = DegradationModel::default();
        let mean = |c: EnvironmentCondition, tag: u64| {
            let n = 1000;
            let xs: Vec<f64> = (0..n)
                .map(|i| observe(&w, &cam, &k, &c, &deg, 0.0, &mut stream(i, Purpose::Test, tag, 0)).detections.len() as f64)
                .collect();
            let m = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
            (m, libm::sqrt(var / n as f64))
        };
        let (m1, s1) = mean(EnvironmentCondition { illumination_k: 1, ..Default::default() }, 10);
        let (m4, s4) = mean(EnvironmentCondition { illumination_k: 4, ..Default::default() }, 11);
        assert!(m4 <= m1 + 3.0 * libm::hypot(s1, s4));
        let (f10, a) = mean(EnvironmentCondition { visual_range_v: Some(10.0), ..Default::default() }, 12);
        let (f30, b) = mean(EnvironmentCondition { visual_range_v: Some(30.0), ..Default::default() }, 13);
        assert!(f30 >= f10 - 3.0 * libm::hypot(a, b));
    }
}
