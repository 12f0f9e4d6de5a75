//! Spatio-temporal occupancy prediction for non-ego agents: a constant
//! velocity baseline, an analytic ego-conditioned yielding predictor, and a
//! loader for precomputed occupancy files. The ego itself is never part of
//! the output; the planner cost penalizes ego-vs-others overlap.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::Trajectory;
use crate::geom::{Point2, Pose2};
use crate::grid_io::{read_grid_stack, GridIoError};
use crate::raster::{footprint_cells, for_each_rect_cell, Grid, GridSpec, Semantics};
use crate::{TICK_DT, T_FUTURE};

#[derive(Debug, Error)]
pub enum OccError {
    #[error("length mismatch: expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("grid spec mismatch: {0}")]
    SpecMismatch(String),
    #[error("occupancy file error: {0}")]
    Format(#[from] GridIoError),
}

/// One observed traffic participant: history poses at 10 Hz plus the current
/// speed estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentTrack {
    pub id: String,
    /// (length, width) meters
    pub dims: (f64, f64),
    pub poses: Vec<Pose2>,
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<String>,
}

impl AgentTrack {
    pub fn current_pose(&self) -> Pose2 {
        *self.poses.last().expect("agent track has no poses")
    }

    /// Velocity vector from the last two observed poses; agents with fewer
    /// than two frames (or no net motion) are treated as static.
    pub fn velocity(&self) -> Point2 {
        if self.poses.len() < 2 {
            return Point2::new(0.0, 0.0);
        }
        let n = self.poses.len();
        let d = self.poses[n - 1].position().sub(self.poses[n - 2].position());
        if d.norm() < 1e-9 {
            return Point2::new(0.0, 0.0);
        }
        d.scale(1.0 / TICK_DT)
    }
}

/// Per-timestep occupancy probability grids over the planning horizon.
#[derive(Debug, Clone)]
pub struct OccupancySequence {
    pub grids: Vec<Grid>,
    pub horizon: f64,
}

impl OccupancySequence {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            grids: (0..T_FUTURE).map(|_| Grid::zeros(spec, Semantics::Probability)).collect(),
            horizon: T_FUTURE as f64 * TICK_DT,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    /// Gaussian blur at t=0, cells.
    pub sigma0_cells: f64,
    /// Blur growth rate, cells per second of prediction.
    pub sigma_rate_cells_per_s: f64,
    /// Conflict window tau_c, seconds.
    pub conflict_window_s: f64,
    /// Reaction lead tau_react, seconds.
    pub reaction_lead_s: f64,
    /// Yield deceleration, m/s^2 (negative).
    pub yield_decel: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            sigma0_cells: 0.5,
            sigma_rate_cells_per_s: 1.0,
            conflict_window_s: 0.5,
            reaction_lead_s: 0.3,
            yield_decel: -3.0,
        }
    }
}

/// Constant-velocity extrapolation with linearly growing Gaussian blur.
/// Probabilities are composited across agents with per-cell max.
pub fn predict_constant_velocity(
    agents: &[AgentTrack],
    spec: &GridSpec,
    cfg: &PredictorConfig,
) -> OccupancySequence {
    let mut seq = OccupancySequence::zeros(*spec);
    for agent in agents {
        let vel = agent.velocity();
        let pose = agent.current_pose();
        for t in 1..=T_FUTURE {
            let dt = t as f64 * TICK_DT;
            let center = pose.position().add(vel.scale(dt));
            let sigma = cfg.sigma0_cells + cfg.sigma_rate_cells_per_s * dt;
            stamp_blurred_footprint(
                &mut seq.grids[t - 1],
                Pose2::new(center.x, center.y, pose.heading),
                agent.dims,
                sigma,
            );
        }
    }
    seq
}

/// Constant-velocity prediction modulated by a deterministic yielding rule:
/// when an agent's extrapolated path conflicts with the ego proposal and the
/// ego reaches the conflict cells strictly earlier, the agent decelerates
/// starting `reaction_lead_s` after the prediction frame and keeps braking
/// until its forward extrapolation no longer conflicts. Agents never
/// accelerate, so conditioning only ever removes occupancy from the ego's
/// path.
pub fn predict_ego_conditioned_yield(
    agents: &[AgentTrack],
    ego_proposal: &Trajectory,
    ego_dims: (f64, f64),
    spec: &GridSpec,
    cfg: &PredictorConfig,
) -> Result<OccupancySequence, OccError> {
    if ego_proposal.states.len() != T_FUTURE + 1 {
        return Err(OccError::LengthMismatch {
            what: "ego proposal states",
            expected: T_FUTURE + 1,
            got: ego_proposal.states.len(),
        });
    }

    // Ego footprint cells for each future tick (1..=T_FUTURE).
    let ego_cells: Vec<CellSet> = ego_proposal.states[1..]
        .iter()
        .map(|s| CellSet::from_cells(&footprint_cells(s.pose(), ego_dims, spec).cells, spec))
        .collect();

    let window = (cfg.conflict_window_s / TICK_DT).round() as i64;
    let react = (cfg.reaction_lead_s / TICK_DT).round() as usize;

    let mut seq = OccupancySequence::zeros(*spec);
    for agent in agents {
        let vel = agent.velocity();
        let pose = agent.current_pose();
        let speed = vel.norm();
        let dir = if speed > 0.0 { vel.scale(1.0 / speed) } else { Point2::new(0.0, 0.0) };

        let cv_center = |t: usize| pose.position().add(vel.scale(t as f64 * TICK_DT));
        let agent_cells = |center: Point2| -> Vec<(usize, usize)> {
            footprint_cells(Pose2::new(center.x, center.y, pose.heading), agent.dims, spec).cells
        };

        // First conflict under constant-velocity extrapolation.
        let mut conflict: Option<(usize, Vec<(usize, usize)>)> = None;
        'outer: for t_a in 1..=T_FUTURE {
            let cells = agent_cells(cv_center(t_a));
            for t_e in window_range(t_a, window) {
                let shared: Vec<(usize, usize)> =
                    cells.iter().copied().filter(|c| ego_cells[t_e - 1].contains(c)).collect();
                if !shared.is_empty() {
                    conflict = Some((t_a, shared));
                    break 'outer;
                }
            }
        }

        let yields = match &conflict {
            Some((t_conflict, shared)) if speed > 0.0 => {
                let ego_first = shared
                    .iter()
                    .filter_map(|c| first_tick_occupying(&ego_cells, c))
                    .min();
                let agent_first = *t_conflict;
                ego_first.is_some_and(|e| e < agent_first)
            }
            _ => false,
        };

        // Continuing from arc position `s` at tick `t` with constant speed
        // `v`, would the agent still reach an ego-occupied cell in time?
        let conflicts_ahead = |s: f64, v: f64, t: usize| -> bool {
            let mut s_future = s;
            for t_future in t..=T_FUTURE {
                if t_future > t {
                    s_future += v * TICK_DT;
                }
                let cells = agent_cells(pose.position().add(dir.scale(s_future)));
                let hit = window_range(t_future, window)
                    .any(|t_e| cells.iter().any(|c| ego_cells[t_e - 1].contains(c)));
                if hit {
                    return true;
                }
            }
            false
        };

        // Longitudinal profile along the agent's straight-line path.
        let mut centers = Vec::with_capacity(T_FUTURE);
        if yields {
            let (t_conflict, _) = conflict.as_ref().unwrap();
            let brake_tick = react.max(1).min(*t_conflict);
            let mut s = 0.0;
            let mut v = speed;
            let mut braking = true;
            for t in 1..=T_FUTURE {
                s += v * TICK_DT;
                let center = pose.position().add(dir.scale(s));
                if t >= brake_tick && braking {
                    if conflicts_ahead(s, v, t) {
                        v = (v + cfg.yield_decel * TICK_DT).max(0.0);
                    } else {
                        braking = false;
                    }
                }
                centers.push(center);
            }
        } else {
            for t in 1..=T_FUTURE {
                centers.push(cv_center(t));
            }
        }

        for (i, &center) in centers.iter().enumerate() {
            let dt = (i + 1) as f64 * TICK_DT;
            let sigma = cfg.sigma0_cells + cfg.sigma_rate_cells_per_s * dt;
            stamp_blurred_footprint(
                &mut seq.grids[i],
                Pose2::new(center.x, center.y, pose.heading),
                agent.dims,
                sigma,
            );
        }
    }
    Ok(seq)
}

fn window_range(t: usize, window: i64) -> impl Iterator<Item = usize> {
    let lo = ((t as i64 - window).max(1)) as usize;
    let hi = ((t as i64 + window).min(T_FUTURE as i64)) as usize;
    lo..=hi
}

// Flat bitset over grid cells; conflict search probes it heavily.
struct CellSet {
    words: Vec<u64>,
    width: usize,
}

impl CellSet {
    fn from_cells(cells: &[(usize, usize)], spec: &GridSpec) -> Self {
        let bits = spec.height * spec.width;
        let mut words = vec![0u64; bits.div_ceil(64)];
        for &(r, c) in cells {
            let i = r * spec.width + c;
            words[i / 64] |= 1 << (i % 64);
        }
        Self { words, width: spec.width }
    }

    fn contains(&self, cell: &(usize, usize)) -> bool {
        let i = cell.0 * self.width + cell.1;
        self.words[i / 64] & (1 << (i % 64)) != 0
    }
}

fn first_tick_occupying(ego_cells: &[CellSet], cell: &(usize, usize)) -> Option<usize> {
    ego_cells.iter().position(|set| set.contains(cell)).map(|i| i + 1)
}

/// Rasterize an oriented box into a local patch, blur it with an isotropic
/// Gaussian, and max-composite the patch into the grid. The kernel is
/// normalized, so a binary input stays within [0, 1].
fn stamp_blurred_footprint(grid: &mut Grid, pose: Pose2, dims: (f64, f64), sigma_cells: f64) {
    let spec = grid.spec;
    let radius = ((3.0 * sigma_cells).ceil() as i64).max(1);

    let (hl, hw) = (dims.0 * 0.5, dims.1 * 0.5);
    let (sin, cos) = pose.heading.sin_cos();
    let mut row_min = i64::MAX;
    let mut row_max = i64::MIN;
    let mut col_min = i64::MAX;
    let mut col_max = i64::MIN;
    for (su, sv) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        let corner = Point2::new(
            pose.x + su * hl * cos - sv * hw * sin,
            pose.y + su * hl * sin + sv * hw * cos,
        );
        let (r, c) = spec.world_to_cell_raw(corner);
        row_min = row_min.min(r - 1);
        row_max = row_max.max(r + 1);
        col_min = col_min.min(c - 1);
        col_max = col_max.max(c + 1);
    }
    row_min -= radius;
    row_max += radius;
    col_min -= radius;
    col_max += radius;

    // Entirely off-grid patches contribute nothing.
    if row_max < 0 || col_max < 0 || row_min >= spec.height as i64 || col_min >= spec.width as i64 {
        return;
    }

    let ph = (row_max - row_min + 1) as usize;
    let pw = (col_max - col_min + 1) as usize;
    let mut patch = vec![0.0f32; ph * pw];
    for_each_rect_cell(&spec, pose, dims, |r, c| {
        patch[(r - row_min) as usize * pw + (c - col_min) as usize] = 1.0;
    });

    // Separable Gaussian blur.
    let kernel: Vec<f32> = {
        let mut k: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i as f64).powi(2) / (2.0 * sigma_cells * sigma_cells)).exp())
            .collect();
        let sum: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= sum);
        k.iter().map(|&v| v as f32).collect()
    };
    let mut tmp = vec![0.0f32; ph * pw];
    for r in 0..ph {
        for c in 0..pw {
            let mut acc = 0.0f32;
            for (ki, &kv) in kernel.iter().enumerate() {
                let cc = c as i64 + ki as i64 - radius;
                if cc >= 0 && (cc as usize) < pw {
                    acc += kv * patch[r * pw + cc as usize];
                }
            }
            tmp[r * pw + c] = acc;
        }
    }
    for r in 0..ph {
        for c in 0..pw {
            let mut acc = 0.0f32;
            for (ki, &kv) in kernel.iter().enumerate() {
                let rr = r as i64 + ki as i64 - radius;
                if rr >= 0 && (rr as usize) < ph {
                    acc += kv * tmp[rr as usize * pw + c];
                }
            }
            let row = row_min + r as i64;
            let col = col_min + c as i64;
            if acc > 0.0 && spec.in_bounds(row, col) {
                let cur = grid.at(row as usize, col as usize);
                if acc > cur {
                    grid.set(row as usize, col as usize, acc);
                }
            }
        }
    }
}

/// Load a precomputed occupancy sequence from a HYPG grid stack.
/// Values outside [0, 1] are clamped with a warning.
pub fn load_occupancy(path: &Path, spec: &GridSpec) -> Result<OccupancySequence, OccError> {
    let stack = read_grid_stack(path)?;
    if stack.height as usize != spec.height || stack.width as usize != spec.width {
        return Err(OccError::SpecMismatch(format!(
            "file is {}x{}, spec is {}x{}",
            stack.height, stack.width, spec.height, spec.width
        )));
    }
    if (stack.resolution as f64 - spec.resolution).abs() > 1e-6 {
        return Err(OccError::SpecMismatch(format!(
            "file resolution {} != spec resolution {}",
            stack.resolution, spec.resolution
        )));
    }
    if stack.frames.len() != T_FUTURE {
        return Err(OccError::LengthMismatch {
            what: "occupancy frames",
            expected: T_FUTURE,
            got: stack.frames.len(),
        });
    }
    let mut clamped = 0usize;
    let grids = stack
        .frames
        .into_iter()
        .map(|frame| {
            let values = frame
                .into_iter()
                .map(|v| {
                    if !(0.0..=1.0).contains(&v) {
                        clamped += 1;
                        v.clamp(0.0, 1.0)
                    } else {
                        v
                    }
                })
                .collect();
            Grid {
                spec: *spec,
                semantics: Semantics::Probability,
                values,
            }
        })
        .collect();
    if clamped > 0 {
        log::warn!("clamped {clamped} occupancy values outside [0, 1] in {}", path.display());
    }
    Ok(OccupancySequence {
        grids,
        horizon: T_FUTURE as f64 * TICK_DT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::VehicleState;
    use crate::grid_io::{write_grid_stack, GridStack};
    use std::collections::HashSet;

    fn spec() -> GridSpec {
        GridSpec::ego_centric(Pose2::new(0.0, 0.0, 0.0))
    }

    fn straight_proposal(speed: f64) -> Trajectory {
        let states = (0..=T_FUTURE)
            .map(|i| VehicleState::new(i as f64 * speed * TICK_DT, 0.0, 0.0, speed))
            .collect();
        Trajectory { states, dt: TICK_DT }
    }

    fn agent(id: &str, x: f64, y: f64, heading: f64, speed: f64) -> AgentTrack {
        let cur = Pose2::new(x, y, heading);
        let prev = Pose2::new(
            x - speed * TICK_DT * heading.cos(),
            y - speed * TICK_DT * heading.sin(),
            heading,
        );
        AgentTrack {
            id: id.into(),
            dims: (4.8, 2.0),
            poses: vec![prev, cur],
            speed,
            lane: None,
        }
    }

    fn centroid(grid: &Grid) -> Point2 {
        let mut acc = Point2::new(0.0, 0.0);
        let mut mass = 0.0;
        for r in 0..grid.spec.height {
            for c in 0..grid.spec.width {
                let v = grid.at(r, c) as f64;
                if v > 0.0 {
                    acc = acc.add(grid.spec.cell_center_world(r as i64, c as i64).scale(v));
                    mass += v;
                }
            }
        }
        acc.scale(1.0 / mass)
    }

    #[test]
    fn no_agents_all_zero() {
        let seq = predict_constant_velocity(&[], &spec(), &PredictorConfig::default());
        assert_eq!(seq.grids.len(), T_FUTURE);
        assert!(seq.grids.iter().all(|g| g.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn static_agent_blob_stays_put() {
        let a = agent("a", 10.0, 0.0, 0.0, 0.0);
        let seq = predict_constant_velocity(&[a], &spec(), &PredictorConfig::default());
        let c0 = centroid(&seq.grids[0]);
        for g in &seq.grids {
            let c = centroid(g);
            assert!(c.dist(c0) < 0.1, "centroid drifted to {c:?}");
            assert!(g.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn moving_agent_advances_four_cells_per_tick() {
        let a = agent("a", 10.0, 0.0, 0.0, 10.0);
        let seq = predict_constant_velocity(&[a], &spec(), &PredictorConfig::default());
        for t in 1..T_FUTURE {
            if t + 1 >= 25 {
                break; // later steps start leaving the grid
            }
            let c_prev = centroid(&seq.grids[t - 1]);
            let c_next = centroid(&seq.grids[t]);
            let dx = c_next.x - c_prev.x;
            assert!((dx - 1.0).abs() < 0.05, "step {t}: moved {dx} m, expected 1.0");
        }
    }

    #[test]
    fn probabilities_in_unit_range() {
        let agents = vec![
            agent("a", 10.0, 0.0, 0.0, 10.0),
            agent("b", 10.0, 1.0, 0.0, 10.0), // overlapping blobs composite by max
        ];
        let seq = predict_constant_velocity(&agents, &spec(), &PredictorConfig::default());
        for g in &seq.grids {
            assert!(g.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    /// Merge geometry used by the conditioning tests: the ego drives +x at
    /// 10 m/s, the agent approaches the corridor from below-right at 45
    /// degrees at 6 m/s and would reach it well after the ego passes, with
    /// enough distance to stop short once it starts yielding.
    fn merge_agent() -> AgentTrack {
        agent("m", 3.69, -11.31, std::f64::consts::FRAC_PI_4, 6.0)
    }

    #[test]
    fn no_conflict_matches_unconditioned() {
        let a = agent("far", -20.0, 30.0, 0.0, 5.0);
        let cfg = PredictorConfig::default();
        let cv = predict_constant_velocity(std::slice::from_ref(&a), &spec(), &cfg);
        let cond = predict_ego_conditioned_yield(&[a], &straight_proposal(10.0), (4.8, 2.0), &spec(), &cfg)
            .unwrap();
        for (g1, g2) in cv.grids.iter().zip(&cond.grids) {
            assert_eq!(g1.values, g2.values);
        }
    }

    #[test]
    fn merge_agent_yields_when_ego_first() {
        let a = merge_agent();
        let cfg = PredictorConfig::default();
        let cv = predict_constant_velocity(std::slice::from_ref(&a), &spec(), &cfg);
        let cond = predict_ego_conditioned_yield(
            std::slice::from_ref(&a),
            &straight_proposal(10.0),
            (4.8, 2.0),
            &spec(),
            &cfg,
        )
        .unwrap();

        let l1: f64 = cv
            .grids
            .iter()
            .zip(&cond.grids)
            .map(|(a, b)| {
                a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs() as f64)
                    .sum::<f64>()
            })
            .sum();
        assert!(l1 > 0.0, "conditioning had no effect");

        // Blob centroid at t = 2 s lags the unconditioned position upstream.
        let t2 = 19; // grid index for t = 2.0 s
        let lag = centroid(&cv.grids[t2]).dist(centroid(&cond.grids[t2]));
        let lag_cells = lag / spec().resolution;
        assert!(lag_cells >= 2.0, "centroid lag {lag_cells} cells");
    }

    #[test]
    fn agent_arriving_first_is_unchanged() {
        let a = merge_agent();
        let cfg = PredictorConfig::default();
        // A slow ego proposal reaches the conflict area well after the agent.
        let cv = predict_constant_velocity(std::slice::from_ref(&a), &spec(), &cfg);
        let cond = predict_ego_conditioned_yield(
            std::slice::from_ref(&a),
            &straight_proposal(3.0),
            (4.8, 2.0),
            &spec(),
            &cfg,
        )
        .unwrap();
        for (g1, g2) in cv.grids.iter().zip(&cond.grids) {
            assert_eq!(g1.values, g2.values);
        }
    }

    #[test]
    fn conditioning_removes_mass_from_ego_path() {
        let a = merge_agent();
        let cfg = PredictorConfig::default();
        let proposal = straight_proposal(10.0);
        let cv = predict_constant_velocity(std::slice::from_ref(&a), &spec(), &cfg);
        let cond =
            predict_ego_conditioned_yield(std::slice::from_ref(&a), &proposal, (4.8, 2.0), &spec(), &cfg)
                .unwrap();

        let s = spec();
        let swept: HashSet<(usize, usize)> = proposal.states[1..]
            .iter()
            .flat_map(|st| footprint_cells(st.pose(), (4.8, 2.0), &s).cells)
            .collect();
        let mass = |seq: &OccupancySequence| -> f64 {
            seq.grids
                .iter()
                .map(|g| swept.iter().map(|&(r, c)| g.at(r, c) as f64).sum::<f64>())
                .sum()
        };
        assert!(mass(&cond) <= mass(&cv) + 1e-9);
    }

    #[test]
    fn different_proposals_differ() {
        let a = merge_agent();
        let cfg = PredictorConfig::default();
        let fast = predict_ego_conditioned_yield(
            std::slice::from_ref(&a),
            &straight_proposal(10.0),
            (4.8, 2.0),
            &spec(),
            &cfg,
        )
        .unwrap();
        let slow = predict_ego_conditioned_yield(
            std::slice::from_ref(&a),
            &straight_proposal(3.0),
            (4.8, 2.0),
            &spec(),
            &cfg,
        )
        .unwrap();
        let l1: f64 = fast
            .grids
            .iter()
            .zip(&slow.grids)
            .map(|(a, b)| {
                a.values
                    .iter()
                    .zip(&b.values)
                    .map(|(x, y)| (x - y).abs() as f64)
                    .sum::<f64>()
            })
            .sum();
        assert!(l1 > 0.0);
    }

    #[test]
    fn determinism() {
        let a = merge_agent();
        let cfg = PredictorConfig::default();
        let p = straight_proposal(10.0);
        let s1 =
            predict_ego_conditioned_yield(std::slice::from_ref(&a), &p, (4.8, 2.0), &spec(), &cfg).unwrap();
        let s2 =
            predict_ego_conditioned_yield(std::slice::from_ref(&a), &p, (4.8, 2.0), &spec(), &cfg).unwrap();
        for (g1, g2) in s1.grids.iter().zip(&s2.grids) {
            assert_eq!(g1.values, g2.values);
        }
    }

    #[test]
    fn load_round_trip_and_validation() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec();
        let a = agent("a", 10.0, 0.0, 0.0, 5.0);
        let seq = predict_constant_velocity(std::slice::from_ref(&a), &s, &PredictorConfig::default());
        let path = dir.path().join("occ.hypg");
        write_grid_stack(
            &path,
            &GridStack {
                height: s.height as u32,
                width: s.width as u32,
                resolution: s.resolution as f32,
                frames: seq.grids.iter().map(|g| g.values.clone()).collect(),
            },
        )
        .unwrap();
        let back = load_occupancy(&path, &s).unwrap();
        for (g1, g2) in seq.grids.iter().zip(&back.grids) {
            assert_eq!(g1.values, g2.values);
        }

        // Wrong dimensions are rejected.
        let small = GridSpec {
            height: 200,
            width: 200,
            ..s
        };
        assert!(matches!(load_occupancy(&path, &small), Err(OccError::SpecMismatch(_))));

        // Out-of-range values clamp.
        let path2 = dir.path().join("hot.hypg");
        let mut frames = vec![vec![0.0f32; s.cells()]; T_FUTURE];
        frames[0][0] = 1.5;
        write_grid_stack(
            &path2,
            &GridStack {
                height: s.height as u32,
                width: s.width as u32,
                resolution: s.resolution as f32,
                frames,
            },
        )
        .unwrap();
        let back = load_occupancy(&path2, &s).unwrap();
        assert_eq!(back.grids[0].values[0], 1.0);
    }
}
