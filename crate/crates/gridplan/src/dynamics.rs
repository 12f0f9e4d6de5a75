//! Kinematic bicycle model, actuation/jerk limiting, and control rollouts.

use serde::{Deserialize, Serialize};

use crate::geom::{normalize_angle, Point2, Pose2};

/// Continuous vehicle state. Heading is normalized to (-pi, pi] and speed is
/// clamped at zero (no reverse). `accel`/`steer` store the last applied
/// controls so that jerk limiting can chain across steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    #[serde(default)]
    pub accel: f64,
    #[serde(default)]
    pub steer: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, heading: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            heading: normalize_angle(heading),
            speed: speed.max(0.0),
            accel: 0.0,
            steer: 0.0,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn pose(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.heading)
    }

    pub fn control(&self) -> Control {
        Control {
            accel: self.accel,
            steer: self.steer,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub accel: f64,
    pub steer: f64,
}

impl Control {
    pub fn new(accel: f64, steer: f64) -> Self {
        Self { accel, steer }
    }

    pub const ZERO: Control = Control { accel: 0.0, steer: 0.0 };
}

/// Vehicle geometry and actuation limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub length: f64,
    pub width: f64,
    pub accel_min: f64,
    pub accel_max: f64,
    pub steer_max: f64,
    pub jerk_max: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            wheelbase: 3.0,
            length: 4.8,
            width: 2.0,
            accel_min: -4.0,
            accel_max: 3.0,
            steer_max: 0.55,
            jerk_max: 6.0,
        }
    }
}

impl VehicleParams {
    pub fn dims(&self) -> (f64, f64) {
        (self.length, self.width)
    }
}

/// A timestamped state sequence; state `i` is at time `i * dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<VehicleState>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.states.len().saturating_sub(1)) as f64 * self.dt
    }
}

/// One explicit-Euler step of the rear-axle kinematic bicycle model.
/// The returned state stores the applied control.
pub fn bicycle_step(state: &VehicleState, control: Control, params: &VehicleParams, dt: f64) -> VehicleState {
    debug_assert!(dt > 0.0);
    let v = state.speed;
    let x = state.x + v * state.heading.cos() * dt;
    let y = state.y + v * state.heading.sin() * dt;
    let heading = normalize_angle(state.heading + v * control.steer.tan() / params.wheelbase * dt);
    let speed = (v + control.accel * dt).max(0.0);
    VehicleState {
        x,
        y,
        heading,
        speed,
        accel: control.accel,
        steer: control.steer,
    }
}

/// Clamp a raw control to actuation limits and to the jerk window around the
/// previously applied acceleration. Idempotent for a fixed `prev`.
pub fn clip_control(raw: Control, prev: Control, params: &VehicleParams, dt: f64) -> Control {
    debug_assert!(dt > 0.0);
    let jerk_window = params.jerk_max * dt;
    let accel = raw
        .accel
        .clamp(params.accel_min, params.accel_max)
        .clamp(prev.accel - jerk_window, prev.accel + jerk_window);
    let steer = raw.steer.clamp(-params.steer_max, params.steer_max);
    Control { accel, steer }
}

/// Roll a control sequence forward from `state`; each control is clipped
/// against its predecessor before propagation. Returns `controls.len() + 1`
/// states with index `i` at time `i * dt`.
pub fn rollout_controls(
    state: &VehicleState,
    controls: &[Control],
    params: &VehicleParams,
    dt: f64,
) -> Trajectory {
    assert!(!controls.is_empty(), "rollout needs at least one control");
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(*state);
    let mut prev = state.control();
    for &raw in controls {
        let c = clip_control(raw, prev, params, dt);
        let next = bicycle_step(states.last().unwrap(), c, params, dt);
        states.push(next);
        prev = c;
    }
    Trajectory { states, dt }
}
