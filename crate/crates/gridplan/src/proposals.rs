//! Multimodal ego trajectory proposals: a pure-pursuit route-following
//! sampler, a loader for externally computed proposal files, and per-timestep
//! deviation maps used by the planner cost.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    bicycle_step, clip_control, rollout_controls, Control, Trajectory, VehicleParams, VehicleState,
};
use crate::geom::{normalize_angle, Point2};
use crate::map::{project_to_route, Route};
use crate::raster::{footprint_cells, distance_field_window, Grid, GridSpec, Semantics};
use crate::{T_FUTURE, TICK_DT};

/// Deviation saturation distance in meters; maps are divided by this so they
/// live in [0, 1].
pub const D_MAX: f64 = 10.0;

/// Maximum per-state position error allowed when reconstructing a proposal
/// through the clipped bicycle model.
pub const FEASIBILITY_TOLERANCE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum ProposalError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("proposal file format error: {0}")]
    Format(String),
    #[error("route has no waypoints")]
    EmptyRoute,
    #[error("mode {mode} starts {dist:.2} m / {heading:.2} rad from the current ego state")]
    StartMismatch { mode: usize, dist: f64, heading: f64 },
    #[error("mode {mode} is not bicycle-feasible: worst per-state deviation {worst:.3} m")]
    Infeasible { mode: usize, worst: f64 },
    #[error("proposal footprint leaves the grid at step {step}")]
    FootprintOffGrid { step: usize },
}

/// K candidate ego futures with normalized scores. Mode trajectories have
/// `T_FUTURE + 1` states at 10 Hz; state 0 is the current ego state.
#[derive(Debug, Clone)]
pub struct ProposalSet {
    pub modes: Vec<Trajectory>,
    pub scores: Vec<f64>,
}

impl ProposalSet {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }
}

/// One normalized distance grid per future timestep; `maps[t]` is distance to
/// the proposal footprint at tick `t + 1`, saturated at [`D_MAX`] and divided
/// by it.
#[derive(Debug, Clone)]
pub struct DeviationMaps {
    pub maps: Vec<Grid>,
}

/// Position on the route polyline at arc length `s` (clamped to the ends).
fn route_point_at(route: &Route, s: f64) -> Point2 {
    let pts = &route.waypoints;
    if s <= 0.0 {
        return Point2::new(pts[0].x, pts[0].y);
    }
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let a = Point2::new(w[0].x, w[0].y);
        let b = Point2::new(w[1].x, w[1].y);
        let seg = a.dist(b);
        if acc + seg >= s {
            let t = if seg > 0.0 { (s - acc) / seg } else { 0.0 };
            return a.add(b.sub(a).scale(t));
        }
        acc += seg;
    }
    let last = pts.last().unwrap();
    Point2::new(last.x, last.y)
}

/// Pure-pursuit steering toward the route point one lookahead ahead of the
/// current projection. Lookahead = max(5 m, 1.0 * v).
fn pure_pursuit_steer(state: &VehicleState, route: &Route, params: &VehicleParams) -> f64 {
    let lookahead = state.speed.max(5.0);
    let (arc, _) = project_to_route(state.position(), route);
    let target = route_point_at(route, arc + lookahead);
    let to_target = target.sub(state.position());
    let dist = to_target.norm();
    if dist < 1e-9 {
        return 0.0;
    }
    let alpha = normalize_angle(to_target.y.atan2(to_target.x) - state.heading);
    (2.0 * params.wheelbase * alpha.sin() / dist).atan()
}

// Speed profiles for the sampler modes.
enum SpeedProfile {
    Hold(f64),
    ConstAccel(f64),
    AccelToLimit { accel: f64, limit: f64 },
}

impl SpeedProfile {
    fn accel(&self, v: f64) -> f64 {
        match *self {
            SpeedProfile::Hold(target) => ((target - v) / TICK_DT).clamp(-1.0, 1.0),
            SpeedProfile::ConstAccel(a) => a,
            SpeedProfile::AccelToLimit { accel, limit } => {
                if v < limit {
                    accel.min((limit - v) / TICK_DT)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Generate `k` route-following modes under distinct target-speed profiles:
/// hold current speed, decelerate at -1.5 m/s^2, accelerate at +1.0 m/s^2
/// toward the route speed limit. Additional modes (k > 3) use intermediate
/// constant accelerations. Scores are uniform. Every mode is rolled through
/// the clipped bicycle model, so feasibility holds by construction.
pub fn sample_centerline_proposals(
    state: &VehicleState,
    route: &Route,
    params: &VehicleParams,
    k: usize,
) -> Result<ProposalSet, ProposalError> {
    assert!(k >= 1, "need at least one mode");
    if route.waypoints.is_empty() {
        return Err(ProposalError::EmptyRoute);
    }
    let limit = route.speed_limit.unwrap_or(13.9);
    let mut profiles = vec![
        SpeedProfile::Hold(state.speed),
        SpeedProfile::ConstAccel(-1.5),
        SpeedProfile::AccelToLimit { accel: 1.0, limit },
    ];
    for i in 3..k {
        let frac = (i - 2) as f64 / (k - 2) as f64;
        profiles.push(SpeedProfile::ConstAccel(-1.5 + 2.5 * frac));
    }
    profiles.truncate(k);

    let modes = profiles
        .iter()
        .map(|profile| {
            let mut states = Vec::with_capacity(T_FUTURE + 1);
            states.push(*state);
            let mut prev = state.control();
            for _ in 0..T_FUTURE {
                let current = *states.last().unwrap();
                let raw = Control::new(
                    profile.accel(current.speed),
                    pure_pursuit_steer(&current, route, params),
                );
                let c = clip_control(raw, prev, params, TICK_DT);
                states.push(bicycle_step(&current, c, params, TICK_DT));
                prev = c;
            }
            Trajectory { states, dt: TICK_DT }
        })
        .collect();

    Ok(ProposalSet {
        modes,
        scores: vec![1.0 / k as f64; k],
    })
}

/// Per-tick reference controls recovered from consecutive trajectory states
/// by inverting the bicycle update (exact for model-generated trajectories).
pub fn control_trace(traj: &Trajectory, wheelbase: f64) -> Vec<Control> {
    traj.states
        .windows(2)
        .map(|w| {
            let accel = (w[1].speed - w[0].speed) / traj.dt;
            let dtheta = normalize_angle(w[1].heading - w[0].heading);
            let steer = if w[0].speed > 1e-6 {
                (dtheta * wheelbase / (w[0].speed * traj.dt)).atan()
            } else {
                0.0
            };
            Control::new(accel, steer)
        })
        .collect()
}

/// Worst per-state position error when replaying the trajectory's recovered
/// control trace through the clipped bicycle model.
pub fn reconstruction_error(traj: &Trajectory, params: &VehicleParams) -> f64 {
    let controls = control_trace(traj, params.wheelbase);
    if controls.is_empty() {
        return 0.0;
    }
    let replay = rollout_controls(&traj.states[0], &controls, params, traj.dt);
    traj.states
        .iter()
        .zip(&replay.states)
        .map(|(a, b)| a.position().dist(b.position()))
        .fold(0.0, f64::max)
}

#[derive(Serialize, Deserialize)]
struct ProposalFile {
    version: u32,
    dt: f64,
    modes: Vec<ProposalFileMode>,
}

#[derive(Serialize, Deserialize)]
struct ProposalFileMode {
    score: f64,
    /// Rows of `[x, y, theta, v]` at 10 Hz; row 0 is the current state.
    states: Vec<[f64; 4]>,
}

/// Load proposals from a versioned JSON file, validating start-state match
/// (0.5 m, 0.1 rad), bicycle feasibility, and score normalization.
pub fn load_proposals(
    path: &std::path::Path,
    state: &VehicleState,
    params: &VehicleParams,
) -> Result<ProposalSet, ProposalError> {
    let text = std::fs::read_to_string(path)?;
    let file: ProposalFile =
        serde_json::from_str(&text).map_err(|e| ProposalError::Format(e.to_string()))?;
    if file.version != 1 {
        return Err(ProposalError::Format(format!(
            "unsupported proposal file version {}",
            file.version
        )));
    }
    if (file.dt - TICK_DT).abs() > 1e-9 {
        return Err(ProposalError::Format(format!(
            "proposal dt {} does not match tick dt {TICK_DT}",
            file.dt
        )));
    }
    if file.modes.is_empty() {
        return Err(ProposalError::Format("no modes in proposal file".into()));
    }

    let mut modes = Vec::with_capacity(file.modes.len());
    let mut scores = Vec::with_capacity(file.modes.len());
    for (i, mode) in file.modes.iter().enumerate() {
        if mode.states.len() != T_FUTURE + 1 {
            return Err(ProposalError::Format(format!(
                "mode {i} has {} states, expected {}",
                mode.states.len(),
                T_FUTURE + 1
            )));
        }
        if !(mode.score >= 0.0) {
            return Err(ProposalError::Format(format!(
                "mode {i} has negative or non-finite score {}",
                mode.score
            )));
        }
        let states: Vec<VehicleState> = mode
            .states
            .iter()
            .map(|&[x, y, theta, v]| VehicleState::new(x, y, theta, v))
            .collect();
        let dist = states[0].position().dist(state.position());
        let heading = normalize_angle(states[0].heading - state.heading).abs();
        if dist > 0.5 || heading > 0.1 {
            return Err(ProposalError::StartMismatch { mode: i, dist, heading });
        }
        let traj = Trajectory {
            states,
            dt: TICK_DT,
        };
        let worst = reconstruction_error(&traj, params);
        if worst > FEASIBILITY_TOLERANCE {
            return Err(ProposalError::Infeasible { mode: i, worst });
        }
        modes.push(traj);
        scores.push(mode.score);
    }

    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return Err(ProposalError::Format("mode scores sum to zero".into()));
    }
    for s in &mut scores {
        *s /= total;
    }
    Ok(ProposalSet { modes, scores })
}

/// Write a proposal set in the format [`load_proposals`] reads.
pub fn save_proposals(path: &std::path::Path, set: &ProposalSet) -> Result<(), ProposalError> {
    let file = ProposalFile {
        version: 1,
        dt: TICK_DT,
        modes: set
            .modes
            .iter()
            .zip(&set.scores)
            .map(|(traj, &score)| ProposalFileMode {
                score,
                states: traj
                    .states
                    .iter()
                    .map(|s| [s.x, s.y, s.heading, s.speed])
                    .collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| ProposalError::Format(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Normalized distance-to-proposal grids, one per future tick. Each map is
/// exact: the transform is windowed to the footprint bounding box plus the
/// saturation radius, and everything farther saturates to 1.
pub fn build_deviation_maps(
    mode: &Trajectory,
    ego_dims: (f64, f64),
    spec: &GridSpec,
) -> Result<DeviationMaps, ProposalError> {
    assert_eq!(mode.states.len(), T_FUTURE + 1, "mode must cover the full horizon");
    let margin = (D_MAX / spec.resolution).ceil() as usize;
    let maps = (0..T_FUTURE)
        .into_par_iter()
        .map(|t| {
            let pose = mode.states[t + 1].pose();
            let fc = footprint_cells(pose, ego_dims, spec);
            if fc.cells.is_empty() {
                return Err(ProposalError::FootprintOffGrid { step: t });
            }
            // Outside the window the distance exceeds the saturation radius,
            // so those cells stay at 1.0.
            let (r0, c0, wh, ww, field) =
                distance_field_window(&fc.cells, spec.height, spec.width, Some(margin));
            let res = spec.resolution as f64;
            let mut values = vec![1.0f32; spec.cells()];
            for r in 0..wh {
                for c in 0..ww {
                    let d = field[r * ww + c] as f64 * res;
                    values[(r + r0) * spec.width + (c + c0)] = (d.min(D_MAX) / D_MAX) as f32;
                }
            }
            Ok(Grid {
                spec: *spec,
                semantics: Semantics::Distance,
                values,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DeviationMaps { maps })
}
