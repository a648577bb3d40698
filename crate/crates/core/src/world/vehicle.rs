#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Never negative.
    pub speed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VehicleControl {
    /// Front-wheel angle, radians, left positive.
    pub steer: f64,
    /// Normalized to [-1, 1].
    pub throttle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct VehicleParams {
    pub wheelbase: f64,
    /// Acceleration at full throttle, m/s².
    pub max_accel: f64,
    pub max_steer: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self { wheelbase: 2.5, max_accel: 3.0, max_steer: 0.6 }
    }
}

/// Explicit-Euler kinematic bicycle step.
pub fn step_vehicle(state: &VehicleState, control: &VehicleControl, params: &VehicleParams, dt: f64) -> VehicleState {
    debug_assert!(dt > 0.0);
    let steer = control.steer.clamp(-params.max_steer, params.max_steer);
    let throttle = control.throttle.clamp(-1.0, 1.0);
    let v = state.speed;
    VehicleState {
        x: state.x + v * math::cos(state.yaw) * dt,
        y: state.y + v * math::sin(state.yaw) * dt,
        yaw: math::wrap_angle(state.yaw + v * math::tan(steer) / params.wheelbase * dt),
        speed: (v + throttle * params.max_accel * dt).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn straight_constant_speed() {
        let s = VehicleState { x: 1.0, y: 2.0, yaw: 0.0, speed: 4.0 };
        let n = step_vehicle(&s, &VehicleControl::default(), &VehicleParams::default(), 0.5);
        assert!((n.x - 3.0).abs() < 1e-15);
        assert_eq!(n.y, 2.0);
        assert_eq!(n.yaw, 0.0);
        assert_eq!(n.speed, 4.0);
    }

    #[test]
    fn stationary_vehicle_does_not_move() {
        let s = VehicleState { x: 1.0, y: 2.0, yaw: 0.7, speed: 0.0 };
        let c = VehicleControl { steer: 0.5, throttle: 0.0 };
        let n = step_vehicle(&s, &c, &VehicleParams::default(), 0.1);
        assert_eq!((n.x, n.y, n.yaw), (s.x, s.y, s.yaw));
    }

    #[test]
    fn yaw_rate_closed_form() {
        let s = VehicleState { speed: 4.0, ..Default::default() };
        let c = VehicleControl { steer: 0.1, throttle: 0.0 };
        let n = step_vehicle(&s, &c, &VehicleParams::default(), 0.1);
        let want = 4.0 * libm::tan(0.1) / 2.5 * 0.1;
        assert!((n.yaw - want).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn speed_never_negative(speed in 0.0f64..10.0, throttle in -1.0f64..1.0, dt in 0.001f64..1.0) {
            let s = VehicleState { speed, ..Default::default() };
            let n = step_vehicle(&s, &VehicleControl { steer: 0.0, throttle }, &VehicleParams::default(), dt);
            prop_assert!(n.speed >= 0.0);
        }
    }
}
