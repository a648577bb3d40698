use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use nalgebra::Vector2;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RoutePoint {
    pub position: Vector2<f64>,
    /// Radians, direction of travel.
    pub heading: f64,
}

/// One leg of a route: turn by `turn_deg` (left positive) at the start of the
/// leg, then drive `length` meters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Leg {
    pub turn_deg: f64,
    pub length: f64,
}

impl Leg {
    pub const fn new(turn_deg: f64, length: f64) -> Self {
        Self { turn_deg, length }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case", tag = "kind"))]
pub enum RouteShape {
    Straight { length: f64 },
    /// ~1.2 km urban loop with five 90° turns.
    Town01,
    /// ~0.5 km downtown route with six 90° turns.
    Town10,
    Legs {
        legs: Vec<Leg>,
        /// Stretch the final leg so the rounded polyline has exactly this length.
        target_length: Option<f64>,
    },
}

impl RouteShape {
    fn legs(&self) -> (Vec<Leg>, Option<f64>) {
        match self {
            RouteShape::Straight { length } => (alloc::vec![Leg::new(0.0, *length)], None),
            RouteShape::Town01 => (
                alloc::vec![
                    Leg::new(0.0, 300.0),
                    Leg::new(90.0, 200.0),
                    Leg::new(90.0, 200.0),
                    Leg::new(-90.0, 150.0),
                    Leg::new(-90.0, 150.0),
                    Leg::new(90.0, 200.0),
                ],
                Some(1200.0),
            ),
            RouteShape::Town10 => (
                alloc::vec![
                    Leg::new(0.0, 80.0),
                    Leg::new(90.0, 70.0),
                    Leg::new(-90.0, 60.0),
                    Leg::new(-90.0, 70.0),
                    Leg::new(90.0, 80.0),
                    Leg::new(90.0, 70.0),
                    Leg::new(-90.0, 70.0),
                ],
                Some(500.0),
            ),
            RouteShape::Legs { legs, target_length } => (legs.clone(), *target_length),
        }
    }

    /// Builds the polyline with circular-arc corners of `corner_radius`,
    /// sampled no coarser than `max_step` meters.
    pub fn build(&self, corner_radius: f64, max_step: f64) -> Result<Route, WorldError> {
        let (mut legs, target) = self.legs();
        if legs.is_empty() || legs.iter().any(|l| !(l.length > 0.0)) {
            return Err(WorldError::InvalidSpec("route legs must have positive length"));
        }
        if !(max_step > 0.0) || !(corner_radius >= 0.0) {
            return Err(WorldError::InvalidSpec("route sampling parameters"));
        }
        let route = trace(&legs, corner_radius, max_step)?;
        let Some(target) = target else { return Ok(route) };
        if !(target > 0.0) {
            return Err(WorldError::InvalidSpec("target length must be positive"));
        }
        let last = legs.len() - 1;
        legs[last].length += target - route.total_length;
        if !(legs[last].length > 0.0) {
            return Err(WorldError::InvalidSpec("target length too short for the legs"));
        }
        trace(&legs, corner_radius, max_step)
    }
}

fn push_segment(pts: &mut Vec<RoutePoint>, to: Vector2<f64>, heading: f64, max_step: f64) {
    let from = pts.last().unwrap().position;
    let len = (to - from).norm();
    if len < 1e-9 {
        return;
    }
    let n = libm::ceil(len / max_step).max(1.0) as usize;
    for i in 1..=n {
        let p = from + (to - from) * (i as f64 / n as f64);
        pts.push(RoutePoint { position: p, heading });
    }
}

fn trace(legs: &[Leg], radius: f64, max_step: f64) -> Result<Route, WorldError> {
    let mut heading = 0.0f64;
    let mut pts = alloc::vec![RoutePoint { position: Vector2::zeros(), heading }];
    for (i, leg) in legs.iter().enumerate() {
        let turn = if i == 0 { 0.0 } else { math::deg_to_rad(leg.turn_deg) };
        if turn.abs() >= core::f64::consts::PI {
            return Err(WorldError::InvalidSpec("turn angles must be below 180 degrees"));
        }
        let trim_in = if i == 0 { 0.0 } else { radius * math::tan(turn.abs() / 2.0) };
        let next_turn = legs.get(i + 1).map_or(0.0, |l| math::deg_to_rad(l.turn_deg));
        let trim_out = radius * math::tan(next_turn.abs() / 2.0);
        if trim_in + trim_out >= leg.length {
            return Err(WorldError::InvalidSpec("legs too short for the corner radius"));
        }

        if turn != 0.0 {
            // Arc from the current heading to heading + turn.
            let left = turn > 0.0;
            let start = pts.last().unwrap().position;
            let normal = Vector2::new(-math::sin(heading), math::cos(heading));
            let center = if left { start + normal * radius } else { start - normal * radius };
            let arc_len = radius * turn.abs();
            let n = libm::ceil(arc_len / max_step).max(1.0) as usize;
            for k in 1..=n {
                let h = heading + turn * k as f64 / n as f64;
                let offset = if left {
                    Vector2::new(math::cos(h - FRAC_PI_2), math::sin(h - FRAC_PI_2))
                } else {
                    Vector2::new(math::cos(h + FRAC_PI_2), math::sin(h + FRAC_PI_2))
                };
                pts.push(RoutePoint { position: center + offset * radius, heading: math::wrap_angle(h) });
            }
            heading = math::wrap_angle(heading + turn);
        }
        let dir = Vector2::new(math::cos(heading), math::sin(heading));
        let end = pts.last().unwrap().position + dir * (leg.length - trim_in - trim_out);
        push_segment(&mut pts, end, heading, max_step);
    }
    Route::new(pts)
}

/// Closest point on the route to a query position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteProjection {
    /// Arc length of the closest point.
    pub s: f64,
    /// Signed distance, left of the direction of travel positive.
    pub lateral: f64,
    pub segment: usize,
    pub point: Vector2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "RouteRepr", into = "RouteRepr"))]
pub struct Route {
    waypoints: Vec<RoutePoint>,
    cumulative: Vec<f64>,
    total_length: f64,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct RouteRepr {
    waypoints: Vec<RoutePoint>,
    total_length: f64,
}

#[cfg(feature = "serde")]
impl TryFrom<RouteRepr> for Route {
    type Error = WorldError;
    fn try_from(r: RouteRepr) -> Result<Self, WorldError> {
        let route = Route::new(r.waypoints)?;
        if (route.total_length - r.total_length).abs() > 1e-6 {
            return Err(WorldError::InvalidSpec("route total_length does not match its polyline"));
        }
        Ok(route)
    }
}

#[cfg(feature = "serde")]
impl From<Route> for RouteRepr {
    fn from(r: Route) -> Self {
        RouteRepr { total_length: r.total_length, waypoints: r.waypoints }
    }
}

impl Route {
    pub fn new(waypoints: Vec<RoutePoint>) -> Result<Self, WorldError> {
        if waypoints.len() < 2 {
            return Err(WorldError::InvalidSpec("route needs at least two waypoints"));
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in waypoints.windows(2) {
            let d = (w[1].position - w[0].position).norm();
            if !(d > 0.0) {
                return Err(WorldError::InvalidSpec("consecutive route waypoints must be distinct"));
            }
            acc += d;
            cumulative.push(acc);
        }
        Ok(Self { waypoints, cumulative, total_length: acc })
    }

    /// Straight segment from the origin heading east.
    pub fn straight(length: f64) -> Result<Self, WorldError> {
        RouteShape::Straight { length }.build(0.0, length.max(1e-3))
    }

    pub fn waypoints(&self) -> &[RoutePoint] {
        &self.waypoints
    }

    pub fn total_length(&self) -> f64 {
        self.total_length
    }

    /// Arc length at each waypoint.
    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn start(&self) -> RoutePoint {
        self.waypoints[0]
    }

    pub fn goal(&self) -> RoutePoint {
        *self.waypoints.last().unwrap()
    }

    fn segment_at(&self, s: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= s);
        i.saturating_sub(1).min(self.waypoints.len() - 2)
    }

    /// Position and tangent heading at arc length `s` (clamped to the route).
    pub fn point_at(&self, s: f64) -> RoutePoint {
        let s = s.clamp(0.0, self.total_length);
        let i = self.segment_at(s);
        let (a, b) = (self.waypoints[i].position, self.waypoints[i + 1].position);
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = ((s - self.cumulative[i]) / seg).clamp(0.0, 1.0);
        let d = b - a;
        RoutePoint { position: a + d * t, heading: math::atan2(d.y, d.x) }
    }

    fn project_segment(&self, i: usize, p: &Vector2<f64>) -> RouteProjection {
        let (a, b) = (self.waypoints[i].position, self.waypoints[i + 1].position);
        let d = b - a;
        let len2 = d.norm_squared();
        let t = ((p - a).dot(&d) / len2).clamp(0.0, 1.0);
        let q = a + d * t;
        let cross = d.x * (p.y - a.y) - d.y * (p.x - a.x);
        let dist = (p - q).norm();
        RouteProjection {
            s: self.cumulative[i] + t * libm::sqrt(len2),
            lateral: if cross >= 0.0 { dist } else { -dist },
            segment: i,
            point: q,
        }
    }

    fn project_range(&self, p: &Vector2<f64>, lo: usize, hi: usize) -> RouteProjection {
        let mut best = self.project_segment(lo, p);
        for i in lo + 1..hi {
            let c = self.project_segment(i, p);
            if c.lateral.abs() < best.lateral.abs() {
                best = c;
            }
        }
        best
    }

    /// Closest point over the whole route; ties go to the earlier segment.
    pub fn project(&self, p: &Vector2<f64>) -> RouteProjection {
        self.project_range(p, 0, self.waypoints.len() - 1)
    }

    /// Closest point among segments within `window` meters of arc length
    /// around `s_hint`. Cheap tracking for a vehicle that moves continuously.
    pub fn project_near(&self, p: &Vector2<f64>, s_hint: f64, window: f64) -> RouteProjection {
        let lo = self.segment_at((s_hint - window).max(0.0));
        let hi = (self.segment_at(s_hint + window) + 1).min(self.waypoints.len() - 1);
        self.project_range(p, lo, hi.max(lo + 1))
    }

    /// Unsigned distance from `p` to the polyline.
    pub fn distance(&self, p: &Vector2<f64>) -> f64 {
        self.project(p).lateral.abs()
    }
}
