use nalgebra::Vector3;
use vlocnav_core::navstack::{pid_control, plan_global, Controllers, LocalPlanner};
use vlocnav_core::world::{step_vehicle, RouteShape, VehicleParams, VehicleState};

/// Drives the route with ground-truth pose; returns (max |cross-track|, time).
fn drive(shape: RouteShape) -> (f64, f64) {
    let route = shape.build(12.0, 1.0).unwrap();
    let mut planner = LocalPlanner::new(plan_global(&route, 2.0), 4.0);
    let mut ctl = Controllers::default();
    let params = VehicleParams::default();
    let start = route.start();
    let mut v = VehicleState { x: start.position.x, y: start.position.y, yaw: start.heading, speed: 0.0 };
    let dt = 0.02;
    let mut t = 0.0;
    let mut s_hint = 0.0;
    let mut worst: f64 = 0.0;
    loop {
        let pose = Vector3::new(v.x, v.y, v.yaw);
        let g = planner.next_subgoal(&pose);
        if g.goal_reached {
            break;
        }
        let cmd = pid_control(&mut ctl, &pose, v.speed, &g.position, 4.0, dt);
        v = step_vehicle(&v, &cmd.into(), &params, dt);
        t += dt;
        let proj = route.project_near(&nalgebra::Vector2::new(v.x, v.y), s_hint, 20.0);
        s_hint = proj.s;
        worst = worst.max(proj.lateral.abs());
        assert!(t < 2.0 * route.total_length() / 4.0 + 30.0, "did not finish");
    }
    (worst, t)
}

#[test]
fn ground_truth_loop_tracks_both_routes() {
    for shape in [RouteShape::Town01, RouteShape::Town10] {
        let (worst, t) = drive(shape.clone());
        println!("{shape:?}: max cross-track {worst:.3} m, {t:.1} s");
        assert!(worst < 0.5, "{shape:?}: {worst}");
    }
}
