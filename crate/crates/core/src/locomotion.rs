//! Skid-steer command mixing and the velocity/acceleration governor.
//!
//! The rover is driven as a differential-drive vehicle: a body twist
//! `(v, ω)` maps to left/right wheel-bank speeds through the wheel track `b`
//!
//! ```text
//! V_l = v - ω·b/2
//! V_r = v + ω·b/2
//! ```
//!
//! and back through `v = (V_l + V_r)/2`, `ω = (V_r - V_l)/b`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::RoverParams;

/// Body-frame velocity command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    /// Forward velocity, m/s.
    pub v: f64,
    /// Rotation velocity, rad/s (counterclockwise positive).
    pub omega: f64,
}

impl Twist {
    pub const ZERO: Twist = Twist { v: 0.0, omega: 0.0 };

    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.omega.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.v == 0.0 && self.omega == 0.0
    }
}

/// Left and right wheel-bank ground speeds, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub v_left: f64,
    pub v_right: f64,
}

impl WheelSpeeds {
    pub const fn new(v_left: f64, v_right: f64) -> Self {
        Self { v_left, v_right }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum LocomotionError {
    #[error("wheel track must be positive, got {0} m")]
    NonPositiveTrack(f64),
}

fn check_track(b: f64) -> Result<(), LocomotionError> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(LocomotionError::NonPositiveTrack(b))
    }
}

/// Mixes a body twist into wheel-bank speeds.
pub fn twist_to_wheels(cmd: Twist, b: f64) -> Result<WheelSpeeds, LocomotionError> {
    check_track(b)?;
    let half = cmd.omega * b / 2.0;
    Ok(WheelSpeeds::new(cmd.v - half, cmd.v + half))
}

/// Recovers the body twist from wheel-bank speeds.
pub fn wheels_to_twist(ws: WheelSpeeds, b: f64) -> Result<Twist, LocomotionError> {
    check_track(b)?;
    Ok(Twist::new(
        (ws.v_left + ws.v_right) / 2.0,
        (ws.v_right - ws.v_left) / b,
    ))
}

/// Clamps a command to the rover's speed limits and slew-limits the forward
/// velocity against the previously applied command.
///
/// A non-positive `dt` leaves the forward velocity at `prev.v`.
pub fn limit_twist(prev: Twist, cmd: Twist, dt: f64, params: &RoverParams) -> Twist {
    let v = cmd.v.clamp(-params.v_max, params.v_max);
    let omega = cmd.omega.clamp(-params.omega_max, params.omega_max);
    let max_dv = params.a_max * dt.max(0.0);
    let v = v.clamp(prev.v - max_dv, prev.v + max_dv);
    Twist::new(v, omega)
}

/// Fraction of lever travel ignored around neutral.
pub const LEVER_DEADZONE: f64 = 0.05;

/// Applies the neutral deadzone to a lever reading and rescales the remaining
/// travel so full deflection still maps to ±1.
pub fn shape_lever(lever: f64) -> f64 {
    if !lever.is_finite() {
        return 0.0;
    }
    let l = lever.clamp(-1.0, 1.0);
    if l.abs() < LEVER_DEADZONE {
        0.0
    } else {
        l.signum() * (l.abs() - LEVER_DEADZONE) / (1.0 - LEVER_DEADZONE)
    }
}

/// Proportional joystick mapping: forward lever scales `v_max`, rotation lever
/// scales `omega_max`.
pub fn levers_to_twist(lever_fwd: f64, lever_rot: f64, params: &RoverParams) -> Twist {
    Twist::new(
        shape_lever(lever_fwd) * params.v_max,
        shape_lever(lever_rot) * params.omega_max,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    const B: f64 = 0.8;

    #[test]
    fn mixing_analytic_cases() {
        assert_eq!(
            twist_to_wheels(Twist::new(0.1, 0.0), B).unwrap(),
            WheelSpeeds::new(0.1, 0.1)
        );
        assert_eq!(
            twist_to_wheels(Twist::new(0.0, 0.25), B).unwrap(),
            WheelSpeeds::new(-0.1, 0.1)
        );
        let ws = twist_to_wheels(Twist::new(0.1, 0.25), B).unwrap();
        assert!(ws.v_left.abs() < 1e-12);
        assert!((ws.v_right - 0.2).abs() < 1e-12);
    }

    #[test]
    fn inverse_analytic_cases() {
        let t = wheels_to_twist(WheelSpeeds::new(0.1, 0.1), B).unwrap();
        assert_eq!(t, Twist::new(0.1, 0.0));
        let t = wheels_to_twist(WheelSpeeds::new(-0.1, 0.1), B).unwrap();
        assert_eq!(t.v, 0.0);
        assert!((t.omega - 0.25).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_track() {
        assert!(twist_to_wheels(Twist::ZERO, 0.0).is_err());
        assert!(wheels_to_twist(WheelSpeeds::default(), -1.0).is_err());
        assert!(twist_to_wheels(Twist::ZERO, f64::NAN).is_err());
    }

    #[test]
    fn slew_limited_from_rest() {
        let p = RoverParams::default();
        let out = limit_twist(Twist::ZERO, Twist::new(0.1, 0.0), 0.1, &p);
        assert!((out.v - 0.03).abs() < 1e-12);
    }

    #[test]
    fn sustained_overspeed_converges_to_vmax() {
        let p = RoverParams::default();
        let mut prev = Twist::ZERO;
        for _ in 0..100 {
            prev = limit_twist(prev, Twist::new(0.5, 0.0), 0.1, &p);
            assert!(prev.v <= p.v_max);
        }
        assert_eq!(prev.v, 0.1);
        let held = limit_twist(prev, Twist::new(0.5, 0.0), 0.1, &p);
        assert_eq!(held, prev);
    }

    #[test]
    fn feasible_command_unchanged() {
        let p = RoverParams::default();
        let prev = Twist::new(0.05, 0.1);
        let cmd = Twist::new(0.07, -0.2);
        assert_eq!(limit_twist(prev, cmd, 0.1, &p), cmd);
    }

    #[test]
    fn omega_clamped() {
        let p = RoverParams::default();
        let out = limit_twist(Twist::ZERO, Twist::new(0.0, 5.0), 0.1, &p);
        assert_eq!(out.omega, p.omega_max);
    }

    #[test]
    fn levers() {
        let p = RoverParams::default();
        assert_eq!(levers_to_twist(1.0, 0.0, &p), Twist::new(0.1, 0.0));
        assert_eq!(levers_to_twist(0.0, 0.0, &p), Twist::ZERO);
        assert_eq!(levers_to_twist(0.04, -0.049, &p), Twist::ZERO);
        assert_eq!(levers_to_twist(-3.0, 1.0, &p), Twist::new(-0.1, 0.3));
        let half = shape_lever(0.525);
        assert!((half - 0.5).abs() < 1e-12);
    }
}
