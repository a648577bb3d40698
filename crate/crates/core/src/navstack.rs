//! Global waypoint planning, lookahead subgoal selection and the lateral /
//! longitudinal PID controllers.

use alloc::vec::Vec;
use nalgebra::{Vector2, Vector3};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math;
use crate::world::{Route, VehicleControl};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Waypoint {
    pub position: Vector2<f64>,
    /// Arc length along the route.
    pub s: f64,
}

/// Waypoints at uniform arc length, first at the start and last at the goal.
///
/// The spacing is shrunk so the route divides evenly; `spacing` must be > 0.
pub fn plan_global(route: &Route, spacing: f64) -> Vec<Waypoint> {
    debug_assert!(spacing > 0.0);
    let total = route.total_length();
    let n = libm::ceil(total / spacing - 1e-9).max(1.0) as usize;
    let step = total / n as f64;
    (0..=n)
        .map(|i| {
            let s = if i == n { total } else { i as f64 * step };
            Waypoint { position: route.point_at(s).position, s }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Subgoal {
    pub index: usize,
    pub position: Vector2<f64>,
    pub goal_reached: bool,
}

/// Tracks progress along the waypoint list so subgoals never move backwards.
#[derive(Debug, Clone)]
pub struct LocalPlanner {
    waypoints: Vec<Waypoint>,
    lookahead: f64,
    /// Segment the vehicle was last projected onto.
    progress: usize,
    subgoal: usize,
}

/// Segments searched ahead of the current progress when projecting.
const SEARCH_AHEAD: usize = 25;

impl LocalPlanner {
    pub fn new(waypoints: Vec<Waypoint>, lookahead: f64) -> Self {
        assert!(!waypoints.is_empty(), "planner needs at least one waypoint");
        Self { waypoints, lookahead, progress: 0, subgoal: 0 }
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn subgoal_index(&self) -> usize {
        self.subgoal
    }

    /// Restarts tracking from waypoint `index`, e.g. after re-initialization.
    pub fn reset_to(&mut self, index: usize) {
        let i = index.min(self.waypoints.len() - 1);
        self.progress = i.min(self.waypoints.len().saturating_sub(2));
        self.subgoal = i;
    }

    /// Closest point on the waypoint polyline at or after the current progress.
    fn project(&mut self, p: &Vector2<f64>) -> f64 {
        let w = &self.waypoints;
        if w.len() == 1 {
            return 0.0;
        }
        let hi = (self.progress + SEARCH_AHEAD).min(w.len() - 1);
        let mut best = (f64::INFINITY, self.progress, w[self.progress].s);
        for i in self.progress..hi {
            let (a, b) = (w[i].position, w[i + 1].position);
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (p - (a + d * t)).norm();
            if dist < best.0 {
                best = (dist, i, w[i].s + t * (w[i + 1].s - w[i].s));
            }
        }
        self.progress = best.1;
        best.2
    }

    /// First waypoint at least `lookahead` ahead of the pose's route
    /// projection; `goal_reached` once the final waypoint is within lookahead.
    pub fn next_subgoal(&mut self, pose: &Vector3<f64>) -> Subgoal {
        let p = Vector2::new(pose.x, pose.y);
        let s = self.project(&p);
        let last = self.waypoints.len() - 1;
        let target = s + self.lookahead;
        let ahead = self.waypoints.partition_point(|w| w.s < target).min(last);
        self.subgoal = self.subgoal.max(ahead);
        let goal = self.waypoints[last].position;
        Subgoal {
            index: self.subgoal,
            position: self.waypoints[self.subgoal].position,
            goal_reached: self.subgoal == last && (goal - p).norm() <= self.lookahead,
        }
    }
}

/// Stateless wrapper: subgoal for a single pose with no tracking history.
pub fn next_subgoal(waypoints: &[Waypoint], pose: &Vector3<f64>, lookahead: f64) -> Subgoal {
    let mut planner = LocalPlanner::new(waypoints.to_vec(), lookahead);
    // Without history, search the whole list.
    let w = waypoints;
    if w.len() > 1 {
        let p = Vector2::new(pose.x, pose.y);
        let mut best = (f64::INFINITY, 0);
        for i in 0..w.len() - 1 {
            let (a, b) = (w[i].position, w[i + 1].position);
            let d = b - a;
            let t = ((p - a).dot(&d) / d.norm_squared()).clamp(0.0, 1.0);
            let dist = (p - (a + d * t)).norm();
            if dist < best.0 {
                best = (dist, i);
            }
        }
        planner.progress = best.1;
    }
    planner.next_subgoal(pose)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub integral_limit: f64,
    pub output_limit: f64,
    /// Time constant of the first-order filter on the derivative term, seconds.
    /// Subgoal switches and visual fixes make the error jump; unfiltered, a
    /// single 20 ms step would turn that into a full-scale kick.
    pub derivative_tau: f64,
}

impl PidGains {
    pub fn lateral() -> Self {
        Self { kp: 1.2, ki: 0.05, kd: 0.3, integral_limit: 1.0, output_limit: 0.6, derivative_tau: 0.2 }
    }

    pub fn longitudinal() -> Self {
        Self { kp: 0.8, ki: 0.1, kd: 0.0, integral_limit: 2.0, output_limit: 1.0, derivative_tau: 0.2 }
    }
}

impl Default for PidGains {
    fn default() -> Self {
        Self::lateral()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    integral: f64,
    derivative: f64,
    prev_error: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, integral: 0.0, derivative: 0.0, prev_error: None }
    }

    pub fn reset(&mut self) {
        *self = Self::new(self.gains);
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn update(&mut self, error: f64, dt: f64) -> f64 {
        debug_assert!(dt > 0.0);
        let g = &self.gains;
        self.integral = (self.integral + error * dt).clamp(-g.integral_limit, g.integral_limit);
        if let Some(prev) = self.prev_error {
            let raw = (error - prev) / dt;
            let alpha = dt / (g.derivative_tau.max(0.0) + dt);
            self.derivative += alpha * (raw - self.derivative);
        }
        self.prev_error = Some(error);
        (g.kp * error + g.ki * self.integral + g.kd * self.derivative).clamp(-g.output_limit, g.output_limit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ControlCommand {
    /// Radians, left positive.
    pub steer: f64,
    /// Normalized to [-1, 1].
    pub throttle: f64,
}

impl From<ControlCommand> for VehicleControl {
    fn from(c: ControlCommand) -> Self {
        VehicleControl { steer: c.steer, throttle: c.throttle }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controllers {
    pub lateral: Pid,
    pub longitudinal: Pid,
}

impl Controllers {
    pub fn new(lateral: PidGains, longitudinal: PidGains) -> Self {
        Self { lateral: Pid::new(lateral), longitudinal: Pid::new(longitudinal) }
    }

    pub fn reset(&mut self) {
        self.lateral.reset();
        self.longitudinal.reset();
    }
}

impl Default for Controllers {
    fn default() -> Self {
        Self::new(PidGains::lateral(), PidGains::longitudinal())
    }
}

/// Signed bearing of `target` relative to the heading in `pose`, left positive.
pub fn bearing_error(pose: &Vector3<f64>, target: &Vector2<f64>) -> f64 {
    let dx = target.x - pose.x;
    let dy = target.y - pose.y;
    if dx == 0.0 && dy == 0.0 {
        return 0.0;
    }
    math::wrap_angle(math::atan2(dy, dx) - pose.z)
}

pub fn pid_control(
    controllers: &mut Controllers,
    pose: &Vector3<f64>,
    speed: f64,
    subgoal: &Vector2<f64>,
    target_speed: f64,
    dt: f64,
) -> ControlCommand {
    ControlCommand {
        steer: controllers.lateral.update(bearing_error(pose, subgoal), dt),
        throttle: controllers.longitudinal.update(target_speed - speed, dt),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight(len: f64) -> Route {
        Route::straight(len).unwrap()
    }

    #[test]
    fn fence_post_count() {
        let w = plan_global(&straight(100.0), 10.0);
        assert_eq!(w.len(), 11);
        assert!((w[10].position.x - 100.0).abs() < 1e-12);
        let w = plan_global(&straight(100.0), 150.0);
        assert_eq!(w.len(), 2);
        assert_eq!(w[0].position, Vector2::zeros());
        assert!((w[1].position.x - 100.0).abs() < 1e-12);
    }

    #[test]
    fn resampled_length_matches_route() {
        use crate::world::RouteShape;
        for shape in [RouteShape::Town01, RouteShape::Town10] {
            let route = shape.build(12.0, 1.0).unwrap();
            let w = plan_global(&route, 2.0);
            let len: f64 = w.windows(2).map(|p| (p[1].position - p[0].position).norm()).sum();
            assert!((len / route.total_length() - 1.0).abs() < 1e-3);
            assert_eq!(w.first().unwrap().position, route.start().position);
            assert!((w.last().unwrap().position - route.goal().position).norm() < 1e-9);
        }
    }

    #[test]
    fn lookahead_from_start() {
        let w = plan_global(&straight(100.0), 1.0);
        let g = next_subgoal(&w, &Vector3::zeros(), 5.0);
        assert!((g.position.x - 5.0).abs() < 1e-9);
        assert!(!g.goal_reached);
        let g = next_subgoal(&w, &Vector3::new(97.0, 0.0, 0.0), 5.0);
        assert!(g.goal_reached);
    }

    proptest! {
        #[test]
        fn lateral_offset_keeps_subgoal(x in 0.0f64..95.0, off in -1.0f64..1.0, yaw in -3.0f64..3.0) {
            let w = plan_global(&straight(100.0), 2.0);
            let a = next_subgoal(&w, &Vector3::new(x, off, yaw), 4.0);
            let b = next_subgoal(&w, &Vector3::new(x, 0.0, 0.0), 4.0);
            prop_assert_eq!(a.index, b.index);
        }

        #[test]
        fn subgoal_index_is_monotone(steps in proptest::collection::vec((-0.5f64..2.0, -1.0f64..1.0), 1..200)) {
            let mut planner = LocalPlanner::new(plan_global(&straight(100.0), 2.0), 4.0);
            let mut x = 0.0;
            let mut last = 0;
            for (dx, y) in steps {
                x += dx;
                let g = planner.next_subgoal(&Vector3::new(x, y, 0.0));
                prop_assert!(g.index >= last);
                last = g.index;
            }
        }

        #[test]
        fn pid_output_bounded(errors in proptest::collection::vec(-1e3f64..1e3, 1..500)) {
            let mut pid = Pid::new(PidGains::lateral());
            for e in errors {
                let u = pid.update(e, 0.02);
                prop_assert!(u.abs() <= pid.gains.output_limit);
                prop_assert!(pid.integral().abs() <= pid.gains.integral_limit);
            }
        }
    }

    #[test]
    fn aligned_at_speed_is_neutral() {
        let mut c = Controllers::default();
        let cmd = pid_control(&mut c, &Vector3::zeros(), 4.0, &Vector2::new(5.0, 0.0), 4.0, 0.02);
        assert_eq!(cmd, ControlCommand { steer: 0.0, throttle: 0.0 });
    }

    #[test]
    fn sign_conventions() {
        let mut c = Controllers::default();
        let cmd = pid_control(&mut c, &Vector3::zeros(), 2.0, &Vector2::new(5.0, 1.0), 4.0, 0.02);
        assert!(cmd.steer > 0.0);
        assert!(cmd.throttle > 0.0);
        let mut c = Controllers::default();
        let cmd = pid_control(&mut c, &Vector3::zeros(), 6.0, &Vector2::new(5.0, -1.0), 4.0, 0.02);
        assert!(cmd.steer < 0.0);
        assert!(cmd.throttle < 0.0);
    }

    #[test]
    fn pid_hand_computed() {
        let g = PidGains { kp: 2.0, ki: 0.5, kd: 1.0, integral_limit: 10.0, output_limit: 100.0, derivative_tau: 0.0 };
        let mut pid = Pid::new(g);
        // First call: no derivative. 2·1 + 0.5·0.1 = 2.05
        assert!((pid.update(1.0, 0.1) - 2.05).abs() < 1e-12);
        // Second: integral 0.4, derivative (3-1)/0.1 = 20. 6 + 0.2 + 20 = 26.2
        assert!((pid.update(3.0, 0.1) - 26.2).abs() < 1e-12);
    }
}
