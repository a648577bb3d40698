use alloc::vec::Vec;
use nalgebra::{DVector, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{Descriptor, Landmark, RouteShape, WorldError, WorldMap};
use crate::geometry::LandmarkId;
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct WorldSpec {
    pub route: RouteShape,
    /// Expected landmarks per meter of route, both sides together.
    pub landmark_density: f64,
    pub seed: u64,
    pub corner_radius: f64,
    /// Maximum spacing of the route polyline vertices.
    pub route_step: f64,
    pub lateral_offset_min: f64,
    pub lateral_offset_max: f64,
    pub height_min: f64,
    pub height_max: f64,
    /// Landmarks closer than this to any part of the route are redrawn.
    pub min_clearance: f64,
    pub descriptor_dim: usize,
    /// Number of shared texture prototypes; 0 makes every descriptor independent.
    pub texture_prototypes: usize,
    /// Variance share of the prototype in each canonical descriptor.
    pub texture_share: f64,
    pub view_range: f64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            route: RouteShape::Town01,
            landmark_density: 12.0,
            seed: 0,
            corner_radius: 12.0,
            route_step: 1.0,
            lateral_offset_min: 8.0,
            lateral_offset_max: 14.0,
            height_min: 0.5,
            height_max: 12.0,
            min_clearance: 5.0,
            descriptor_dim: 64,
            texture_prototypes: 0,
            texture_share: 0.0,
            view_range: super::DEFAULT_VIEW_RANGE,
        }
    }
}

impl WorldSpec {
    fn validate(&self) -> Result<(), WorldError> {
        if !(self.landmark_density > 0.0) || !self.landmark_density.is_finite() {
            return Err(WorldError::InvalidSpec("landmark_density must be positive"));
        }
        if !(self.lateral_offset_min > 0.0 && self.lateral_offset_max >= self.lateral_offset_min) {
            return Err(WorldError::InvalidSpec("lateral offset range"));
        }
        if !(self.height_max >= self.height_min) {
            return Err(WorldError::InvalidSpec("height range"));
        }
        if !(self.min_clearance >= 0.0 && self.min_clearance <= self.lateral_offset_max) {
            return Err(WorldError::InvalidSpec("min_clearance must be within the lateral offset range"));
        }
        if !(self.view_range > 0.0) {
            return Err(WorldError::InvalidSpec("view_range must be positive"));
        }
        if self.descriptor_dim == 0 {
            return Err(WorldError::InvalidSpec("descriptor_dim must be positive"));
        }
        if !(0.0..=1.0).contains(&self.texture_share) {
            return Err(WorldError::InvalidSpec("texture_share must be in [0, 1]"));
        }
        Ok(())
    }
}

pub(crate) fn random_unit<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Descriptor {
    loop {
        let v = DVector::<f64>::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

const MAX_PLACEMENT_TRIES: usize = 1000;

/// Landmarks on facades flanking the route, facing the road.
///
/// The count is Poisson with mean `density · length`; a placement that lands
/// too close to another stretch of the route (inside corners) is redrawn.
pub fn generate_world(spec: &WorldSpec) -> Result<WorldMap, WorldError> {
    spec.validate()?;
    let route = spec.route.build(spec.corner_radius, spec.route_step)?;
    let length = route.total_length();

    let mut layout = stream(spec.seed, Purpose::WorldLayout, 0, 0);
    let mut texture = stream(spec.seed, Purpose::WorldDescriptors, 0, 0);

    let poisson = Poisson::new(spec.landmark_density * length)
        .map_err(|_| WorldError::InvalidSpec("landmark count distribution"))?;
    let count = poisson.sample(&mut layout) as usize;

    let prototypes: Vec<Descriptor> = (0..spec.texture_prototypes)
        .map(|_| random_unit(&mut texture, spec.descriptor_dim))
        .collect();
    let share = libm::sqrt(spec.texture_share);
    let own = libm::sqrt(1.0 - spec.texture_share);

    let mut landmarks = Vec::with_capacity(count);
    for _ in 0..count {
        let mut placed = None;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let s = layout.random_range(0.0..length);
            let side = if layout.random_bool(0.5) { 1.0 } else { -1.0 };
            let offset = layout.random_range(spec.lateral_offset_min..=spec.lateral_offset_max);
            let height = layout.random_range(spec.height_min..=spec.height_max);
            let at = route.point_at(s);
            let normal = Vector2::new(-libm::sin(at.heading), libm::cos(at.heading));
            let xy = at.position + normal * (side * offset);
            let proj = route.project(&xy);
            if proj.lateral.abs() >= spec.min_clearance {
                let toward = proj.point - xy;
                let facing = Vector3::new(toward.x, toward.y, 0.0).normalize();
                placed = Some((Vector3::new(xy.x, xy.y, height), facing));
                break;
            }
        }
        let Some((position, facing)) = placed else {
            return Err(WorldError::InvalidSpec("could not place landmarks with the given clearance"));
        };
        let fresh = random_unit(&mut texture, spec.descriptor_dim);
        let canonical_descriptor = if prototypes.is_empty() {
            fresh
        } else {
            let j = texture.random_range(0..prototypes.len());
            (&prototypes[j] * share + fresh * own).normalize()
        };
        landmarks.push(Landmark {
            id: LandmarkId(landmarks.len() as u32),
            position,
            canonical_descriptor,
            facing,
        });
    }
    Ok(WorldMap { landmarks, route, seed: spec.seed, view_range: spec.view_range })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let spec = WorldSpec { route: RouteShape::Town10, seed: 5, ..Default::default() };
        let a = generate_world(&spec).unwrap();
        let b = generate_world(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_world(&WorldSpec { seed: 6, ..spec }).unwrap();
        assert_ne!(a.landmarks.len(), 0);
        assert_ne!(a, c);
    }

    #[test]
    fn landmark_count_matches_density() {
        for seed in 0..5 {
            let spec = WorldSpec {
                route: RouteShape::Straight { length: 500.0 },
                landmark_density: 2.0,
                seed,
                ..Default::default()
            };
            let w = generate_world(&spec).unwrap();
            // Poisson(1000): 4 standard deviations.
            assert!((w.landmarks.len() as f64 - 1000.0).abs() < 4.0 * libm::sqrt(1000.0));
        }
    }

    #[test]
    fn invariants_hold() {
        let spec = WorldSpec { texture_prototypes: 8, texture_share: 0.3, ..Default::default() };
        let w = generate_world(&spec).unwrap();
        assert!((w.route.total_length() - 1200.0).abs() < 12.0);
        for (i, l) in w.landmarks.iter().enumerate() {
            assert_eq!(l.id, LandmarkId(i as u32));
            assert!((l.canonical_descriptor.norm() - 1.0).abs() < 1e-9);
            assert!((l.facing.norm() - 1.0).abs() < 1e-9);
            assert!(w.route.distance(&l.position.xy()) >= spec.min_clearance - 1e-9);
            // Facing points back toward the road.
            let proj = w.route.project(&l.position.xy());
            assert!(l.facing.xy().dot(&(proj.point - l.position.xy())) > 0.0);
        }
    }

    #[test]
    fn rejects_non_positive_density() {
        let spec = WorldSpec { landmark_density: 0.0, ..Default::default() };
        assert!(matches!(generate_world(&spec), Err(WorldError::InvalidSpec(_))));
    }
}
