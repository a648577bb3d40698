use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, Vector2, Vector3};
use rand_distr::{Distribution, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{KeyframeId, VlocError};
use crate::geometry::{triangulate, CameraIntrinsics, LandmarkId, Pose};
use crate::rng::{stream, Purpose};
use crate::world::{
    mounted_camera_pose, observe, CameraMount, DegradationModel, Descriptor, Detection, EnvironmentCondition,
    VehicleState, WorldMap,
};

/// Fixed Gaussian random projection from local to global descriptor space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "ProjectorRepr", into = "ProjectorRepr"))]
pub struct GlobalProjector {
    seed: u64,
    matrix: DMatrix<f64>,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct ProjectorRepr {
    seed: u64,
    local_dim: usize,
    global_dim: usize,
}

#[cfg(feature = "serde")]
impl TryFrom<ProjectorRepr> for GlobalProjector {
    type Error = VlocError;
    fn try_from(r: ProjectorRepr) -> Result<Self, VlocError> {
        if r.local_dim == 0 || r.global_dim == 0 {
            return Err(VlocError::InvalidParams("projector dimensions must be positive"));
        }
        Ok(GlobalProjector::new(r.seed, r.local_dim, r.global_dim))
    }
}

#[cfg(feature = "serde")]
impl From<GlobalProjector> for ProjectorRepr {
    fn from(p: GlobalProjector) -> Self {
        ProjectorRepr { seed: p.seed, local_dim: p.matrix.ncols(), global_dim: p.matrix.nrows() }
    }
}

impl GlobalProjector {
    pub fn new(seed: u64, local_dim: usize, global_dim: usize) -> Self {
        let mut rng = stream(seed, Purpose::GlobalProjection, 0, 0);
        let scale = 1.0 / libm::sqrt(global_dim as f64);
        let matrix = DMatrix::from_fn(global_dim, local_dim, |_, _| {
            let x: f64 = StandardNormal.sample(&mut rng);
            x * scale
        });
        Self { seed, matrix }
    }

    pub fn local_dim(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn global_dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// `normalize(M · Σ dᵢ)`; the first basis vector when there is nothing to sum.
pub fn global_descriptor(projector: &GlobalProjector, detections: &[Detection]) -> DVector<f64> {
    let mut sum = DVector::zeros(projector.local_dim());
    for d in detections {
        sum += &d.descriptor;
    }
    let g = &projector.matrix * sum;
    let n = g.norm();
    if n > 1e-12 {
        g / n
    } else {
        let mut e0 = DVector::zeros(projector.global_dim());
        e0[0] = 1.0;
        e0
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Keyframe {
    pub id: KeyframeId,
    /// Camera-to-world.
    pub pose: Pose,
    pub detections: Vec<Detection>,
    #[cfg_attr(feature = "serde", serde(with = "crate::math::serde_dvector"))]
    pub global_descriptor: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GalleryPoint {
    pub position: Vector3<f64>,
    pub observers: BTreeSet<KeyframeId>,
    /// Normalized mean of the observing detections' descriptors.
    #[cfg_attr(feature = "serde", serde(with = "crate::math::serde_dvector"))]
    pub descriptor: Descriptor,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct GalleryParams {
    /// Meters of route between keyframes.
    pub spacing: f64,
    pub global_dim: usize,
    pub projector_seed: u64,
    pub mount: CameraMount,
    pub intrinsics: CameraIntrinsics,
}

impl Default for GalleryParams {
    fn default() -> Self {
        Self {
            spacing: 2.0,
            global_dim: 256,
            projector_seed: 0x5EED,
            mount: CameraMount::default(),
            intrinsics: CameraIntrinsics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GalleryMap {
    /// Indexed by keyframe id.
    pub keyframes: Vec<Keyframe>,
    pub points3d: BTreeMap<LandmarkId, GalleryPoint>,
    pub covisibility: BTreeMap<KeyframeId, BTreeSet<KeyframeId>>,
    pub projector: GlobalProjector,
    pub intrinsics: CameraIntrinsics,
    pub mount: CameraMount,
}

impl GalleryMap {
    pub fn keyframe(&self, id: KeyframeId) -> Option<&Keyframe> {
        self.keyframes.get(id.0 as usize).filter(|k| k.id == id)
    }

    pub fn neighbors(&self, id: KeyframeId) -> impl Iterator<Item = KeyframeId> + '_ {
        self.covisibility.get(&id).into_iter().flatten().copied()
    }

    /// Checks the structural invariants.
    pub fn validate(&self) -> Result<(), VlocError> {
        if self.keyframes.is_empty() {
            return Err(VlocError::EmptyGallery);
        }
        for (i, k) in self.keyframes.iter().enumerate() {
            if k.id != KeyframeId(i as u32) {
                return Err(VlocError::Inconsistent("keyframe ids must be dense and ordered"));
            }
            if (k.global_descriptor.norm() - 1.0).abs() > 1e-9 {
                return Err(VlocError::Inconsistent("global descriptor not unit norm"));
            }
        }
        let mut edges: BTreeSet<(KeyframeId, KeyframeId)> = BTreeSet::new();
        for p in self.points3d.values() {
            if p.observers.len() < 2 {
                return Err(VlocError::Inconsistent("point observed by fewer than two keyframes"));
            }
            for a in &p.observers {
                if self.keyframe(*a).is_none() {
                    return Err(VlocError::Inconsistent("point observer is not a keyframe"));
                }
                for b in &p.observers {
                    if a != b {
                        edges.insert((*a, *b));
                    }
                }
            }
        }
        let stored: BTreeSet<(KeyframeId, KeyframeId)> = self
            .covisibility
            .iter()
            .flat_map(|(a, ns)| ns.iter().map(move |b| (*a, *b)))
            .collect();
        if stored != edges {
            return Err(VlocError::Inconsistent("covisibility does not match shared points"));
        }
        Ok(())
    }
}

fn covisibility_of(points: &BTreeMap<LandmarkId, GalleryPoint>) -> BTreeMap<KeyframeId, BTreeSet<KeyframeId>> {
    let mut g: BTreeMap<KeyframeId, BTreeSet<KeyframeId>> = BTreeMap::new();
    for p in points.values() {
        for a in &p.observers {
            for b in &p.observers {
                if a != b {
                    g.entry(*a).or_default().insert(*b);
                }
            }
        }
    }
    g
}

/// One gallery detection of a landmark: keyframe, its pose, pixel, descriptor.
type Sighting<'a> = (KeyframeId, Pose, Vector2<f64>, &'a Descriptor);

/// Captures keyframes every `spacing` meters under pristine conditions and
/// triangulates every landmark seen from at least two of them.
///
/// The gallery knows which detections belong to the same landmark (the
/// feature tracks of a mapping run); the query side never does.
pub fn build_gallery(world: &WorldMap, params: &GalleryParams) -> Result<GalleryMap, VlocError> {
    if !(params.spacing > 0.0) {
        return Err(VlocError::InvalidParams("spacing must be positive"));
    }
    if params.global_dim == 0 {
        return Err(VlocError::InvalidParams("global_dim must be positive"));
    }
    params.intrinsics.validate().map_err(|_| VlocError::InvalidParams("intrinsics"))?;
    let route = &world.route;
    let length = route.total_length();
    let count = libm::floor(length / params.spacing + 1e-9) as usize + 1;
    if world.landmarks.is_empty() || count == 0 {
        return Err(VlocError::EmptyGallery);
    }
    let projector = GlobalProjector::new(params.projector_seed, world.descriptor_dim(), params.global_dim);
    let condition = EnvironmentCondition::pristine();
    let degradation = DegradationModel::none();

    let mut keyframes = Vec::with_capacity(count);
    for i in 0..count {
        let at = route.point_at(i as f64 * params.spacing);
        let vehicle = VehicleState { x: at.position.x, y: at.position.y, yaw: at.heading, speed: 0.0 };
        let pose = mounted_camera_pose(&vehicle, &params.mount);
        let mut rng = stream(world.seed, Purpose::GalleryCapture, 0, i as u64);
        let obs = observe(world, &pose, &params.intrinsics, &condition, &degradation, 0.0, &mut rng);
        let global_descriptor = global_descriptor(&projector, &obs.detections);
        keyframes.push(Keyframe { id: KeyframeId(i as u32), pose, detections: obs.detections, global_descriptor });
    }

    let mut tracks: BTreeMap<LandmarkId, Vec<Sighting>> = BTreeMap::new();
    for kf in &keyframes {
        for d in &kf.detections {
            tracks.entry(d.debug_landmark_id).or_default().push((kf.id, kf.pose, d.pixel, &d.descriptor));
        }
    }
    let mut points3d = BTreeMap::new();
    for (id, track) in tracks {
        if track.len() < 2 {
            continue;
        }
        let views: Vec<(Pose, Vector2<f64>)> = track.iter().map(|(_, p, px, _)| (*p, *px)).collect();
        let Ok(position) = triangulate(&views, &params.intrinsics) else { continue };
        let mut mean = DVector::zeros(projector.local_dim());
        for (_, _, _, d) in &track {
            mean += *d;
        }
        let n = mean.norm();
        if n <= 1e-12 {
            continue;
        }
        points3d.insert(
            id,
            GalleryPoint { position, observers: track.iter().map(|t| t.0).collect(), descriptor: mean / n },
        );
    }
    let covisibility = covisibility_of(&points3d);
    Ok(GalleryMap { keyframes, points3d, covisibility, projector, intrinsics: params.intrinsics, mount: params.mount })
}
