//! Closed-loop scenario execution: non-reactive log-replay agents, reactive
//! IDM agents, collision/off-road/progress metrics, and the scenario file
//! format.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Trajectory, VehicleParams, VehicleState};
use crate::geom::{Point2, Pose2};
use crate::map::{
    extract_route, point_in_drivable, project_to_route, DrivableArea, LaneGraph, MapDoc, MapError,
    Route,
};
use crate::occupancy::{
    predict_constant_velocity, predict_ego_conditioned_yield, AgentTrack, OccError,
    OccupancySequence, PredictorConfig,
};
use crate::planner::{plan, PlannerConfig, PlannerError};
use crate::proposals::{
    build_deviation_maps, sample_centerline_proposals, ProposalError, ProposalSet,
};
use crate::raster::GridSpec;
use crate::{T_FUTURE, T_POSE, TICK_DT};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Proposal(#[from] ProposalError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Occupancy(#[from] OccError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    Nr,
    R,
}

/// Intelligent-driver-model parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Time headway, s.
    pub headway: f64,
    /// Standstill minimum gap, m.
    pub min_gap: f64,
    /// Maximum acceleration, m/s^2.
    pub accel_max: f64,
    /// Comfortable braking deceleration (positive), m/s^2.
    pub decel: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            v0: 13.9,
            headway: 1.5,
            min_gap: 2.0,
            accel_max: 1.5,
            decel: 2.0,
        }
    }
}

/// IDM car-following acceleration. `gap` may be `f64::INFINITY` when there is
/// no leader.
pub fn idm_accel(v: f64, gap: f64, v_lead: f64, p: &IdmParams) -> f64 {
    let s_star = p.min_gap + v * p.headway + v * (v - v_lead) / (2.0 * (p.accel_max * p.decel).sqrt());
    let interaction = if gap.is_finite() { (s_star / gap).powi(2) } else { 0.0 };
    p.accel_max * (1.0 - (v / p.v0).powi(4) - interaction)
}

// --- scenario file format (version 1) ---

#[derive(Debug, Serialize, Deserialize)]
pub struct ScenarioDoc {
    pub scenario_version: u32,
    pub name: String,
    pub mode: SimMode,
    /// Episode length, seconds; must be a multiple of the 0.1 s tick.
    pub duration: f64,
    pub map: MapDoc,
    pub ego: EgoDoc,
    pub agents: Vec<AgentDoc>,
    /// Optional reference ego trajectory `[x, y, theta, v]` at 10 Hz for the
    /// progress metric.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<[f64; 4]>>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EgoDoc {
    pub state: VehicleState,
    #[serde(default)]
    pub params: VehicleParams,
    pub route: RouteDoc,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RouteDoc {
    pub start_lane: String,
    pub goal_lane: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AgentDoc {
    pub id: String,
    /// (length, width) meters.
    pub dims: (f64, f64),
    /// Logged poses `[x, y, theta]` at 10 Hz starting at tick 0.
    pub poses: Vec<[f64; 3]>,
    /// Lane the agent follows in reactive mode; agents without a lane replay
    /// their log in both modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idm: Option<IdmParams>,
}

/// A parsed, validated scenario.
pub struct Scenario {
    pub name: String,
    pub mode: SimMode,
    pub duration: f64,
    pub n_ticks: usize,
    pub graph: LaneGraph,
    pub drivable: DrivableArea,
    pub ego_state: VehicleState,
    pub ego_params: VehicleParams,
    pub route: Route,
    pub agents: Vec<AgentDoc>,
    pub ground_truth: Option<Trajectory>,
}

impl Scenario {
    pub fn from_doc(doc: ScenarioDoc) -> Result<Self, SimError> {
        if doc.scenario_version != 1 {
            return Err(SimError::Invalid(format!(
                "unsupported scenario_version {}",
                doc.scenario_version
            )));
        }
        let n_ticks = (doc.duration / TICK_DT).round() as usize;
        if n_ticks == 0 || (n_ticks as f64 * TICK_DT - doc.duration).abs() > 1e-9 {
            return Err(SimError::Invalid(format!(
                "duration {} is not a positive multiple of {TICK_DT}",
                doc.duration
            )));
        }
        let (graph, drivable) = doc.map.into_parts()?;
        let route = extract_route(&graph, &doc.ego.route.start_lane, &doc.ego.route.goal_lane)?;
        for agent in &doc.agents {
            if agent.poses.is_empty() {
                return Err(SimError::Invalid(format!("agent `{}` has no poses", agent.id)));
            }
            if agent.dims.0 <= 0.0 || agent.dims.1 <= 0.0 {
                return Err(SimError::Invalid(format!("agent `{}` has non-positive dims", agent.id)));
            }
            let replays = doc.mode == SimMode::Nr || agent.lane.is_none();
            if replays && agent.poses.len() < n_ticks + 1 {
                return Err(SimError::Invalid(format!(
                    "agent `{}` log covers {} ticks, scenario needs {}",
                    agent.id,
                    agent.poses.len().saturating_sub(1),
                    n_ticks
                )));
            }
            if let Some(lane) = &agent.lane {
                graph.lane(lane)?;
            }
        }
        let ground_truth = doc.ground_truth.map(|rows| Trajectory {
            states: rows
                .iter()
                .map(|&[x, y, theta, v]| VehicleState::new(x, y, theta, v))
                .collect(),
            dt: TICK_DT,
        });
        Ok(Self {
            name: doc.name,
            mode: doc.mode,
            duration: doc.duration,
            n_ticks,
            graph,
            drivable,
            ego_state: doc.ego.state,
            ego_params: doc.ego.params,
            route,
            agents: doc.agents,
            ground_truth,
        })
    }
}

pub fn load_scenario_str(text: &str) -> Result<Scenario, SimError> {
    let doc: ScenarioDoc =
        serde_json::from_str(text).map_err(|e| SimError::Invalid(e.to_string()))?;
    Scenario::from_doc(doc)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimError> {
    load_scenario_str(&std::fs::read_to_string(path)?)
}

// --- collision / metrics ---

/// Oriented-rectangle intersection by the separating-axis test; touching
/// boxes count as colliding.
pub fn obb_intersect(a: Pose2, dims_a: (f64, f64), b: Pose2, dims_b: (f64, f64)) -> bool {
    let axes_a = axes(a.heading);
    let axes_b = axes(b.heading);
    let delta = b.position().sub(a.position());
    for axis in [axes_a.0, axes_a.1, axes_b.0, axes_b.1] {
        let dist = delta.dot(axis).abs();
        let ra = 0.5 * dims_a.0 * axes_a.0.dot(axis).abs() + 0.5 * dims_a.1 * axes_a.1.dot(axis).abs();
        let rb = 0.5 * dims_b.0 * axes_b.0.dot(axis).abs() + 0.5 * dims_b.1 * axes_b.1.dot(axis).abs();
        if dist > ra + rb {
            return false;
        }
    }
    true
}

fn axes(heading: f64) -> (Point2, Point2) {
    let (sin, cos) = heading.sin_cos();
    (Point2::new(cos, sin), Point2::new(-sin, cos))
}

/// Tick-aligned pose log of one non-ego participant.
#[derive(Debug, Clone, Serialize)]
pub struct AgentPathLog {
    pub id: String,
    pub dims: (f64, f64),
    pub poses: Vec<Pose2>,
}

/// Earliest tick at which the ego box intersects any agent box. Agents whose
/// log is shorter than the trajectory hold their last pose.
pub fn collision_check(
    ego: &Trajectory,
    ego_dims: (f64, f64),
    agents: &[AgentPathLog],
) -> Option<usize> {
    for (t, state) in ego.states.iter().enumerate() {
        for agent in agents {
            let pose = *agent.poses.get(t).or(agent.poses.last())?;
            if obb_intersect(state.pose(), ego_dims, pose, agent.dims) {
                return Some(t);
            }
        }
    }
    None
}

/// Fraction of trajectory states whose reference point is off the drivable
/// area.
pub fn offroad_fraction(traj: &Trajectory, area: &DrivableArea) -> f64 {
    if traj.states.is_empty() {
        return 0.0;
    }
    let outside = traj
        .states
        .iter()
        .filter(|s| !point_in_drivable(s.position(), area))
        .count();
    outside as f64 / traj.states.len() as f64
}

/// Route arc-length covered by `planned` divided by that of `reference`,
/// capped at 1.0. A near-stationary reference (< 0.5 m) counts as full
/// progress.
pub fn progress_ratio(planned: &Trajectory, reference: &Trajectory, route: &Route) -> f64 {
    let arc = |tr: &Trajectory| {
        let (start, _) = project_to_route(tr.states.first().unwrap().position(), route);
        let (end, _) = project_to_route(tr.states.last().unwrap().position(), route);
        end - start
    };
    let reference_arc = arc(reference);
    if reference_arc < 0.5 {
        return 1.0;
    }
    (arc(planned) / reference_arc).clamp(0.0, 1.0)
}

// --- closed-loop execution ---

/// Occupancy predictor wired into the closed loop.
#[derive(Debug, Clone)]
pub enum Predictor {
    ConstantVelocity,
    EgoConditioned,
    /// A fixed precomputed sequence reused at every tick (single-shot
    /// analysis plumbing; the grids are not re-centered on the moving ego).
    Precomputed(OccupancySequence),
}

/// Everything the closed loop needs besides the scenario itself.
pub struct StackConfig {
    pub modes: usize,
    pub predictor: Predictor,
    pub predictor_cfg: PredictorConfig,
    pub planner: PlannerConfig,
    /// Proposals to use at the first tick instead of the sampler (validated
    /// file input); later ticks always sample.
    pub initial_proposals: Option<ProposalSet>,
    /// Keep per-tick frame logs (ego, agents, chosen plan, proposal modes)
    /// for export.
    pub collect_frames: bool,
}

impl Default for StackConfig {
    fn default() -> Self {
        Self {
            modes: 3,
            predictor: Predictor::EgoConditioned,
            predictor_cfg: PredictorConfig::default(),
            planner: PlannerConfig::default(),
            initial_proposals: None,
            collect_frames: false,
        }
    }
}

/// One tick of exported state for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct FrameLog {
    pub tick: usize,
    pub ego: VehicleState,
    pub agents: Vec<FrameAgent>,
    /// The executed plan, `[x, y, theta, v]` per state.
    pub plan: Vec<[f64; 4]>,
    /// All proposal modes offered this tick, same row format.
    pub proposals: Vec<Vec<[f64; 4]>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameAgent {
    pub id: String,
    pub pose: Pose2,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CollisionEvent {
    pub tick: usize,
    pub time: f64,
    pub agent: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanTick {
    pub mode: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimResult {
    pub scenario: String,
    pub mode: SimMode,
    pub ticks_executed: usize,
    pub collision: Option<CollisionEvent>,
    pub offroad_fraction: f64,
    pub progress_ratio: f64,
    /// Set when a planner-stack error ended the episode early.
    pub aborted: Option<String>,
    pub executed: Trajectory,
    pub agent_logs: Vec<AgentPathLog>,
    pub plan_log: Vec<PlanTick>,
    /// Wall-clock planner latency per tick; reported separately from the
    /// deterministic metrics.
    #[serde(skip)]
    pub latencies_s: Vec<f64>,
    /// Per-tick frame logs, populated when `StackConfig::collect_frames`.
    #[serde(skip)]
    pub frames: Vec<FrameLog>,
}

// Runtime state of one scripted or reactive agent.
struct AgentRuntime<'a> {
    doc: &'a AgentDoc,
    history: Vec<Pose2>,
    /// Reactive-only: centerline path with cumulative arcs, current arc
    /// position, and current speed.
    reactive: Option<ReactiveState>,
}

struct ReactiveState {
    path: Vec<Point2>,
    cum: Vec<f64>,
    s: f64,
    v: f64,
    idm: IdmParams,
}

impl ReactiveState {
    fn pose_at(&self, s: f64) -> Pose2 {
        let total = *self.cum.last().unwrap();
        let s = s.clamp(0.0, total);
        let i = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.path.len() - 2),
            Err(i) => (i - 1).min(self.path.len() - 2),
        };
        let a = self.path[i];
        let b = self.path[i + 1];
        let seg = b.sub(a);
        let t = if self.cum[i + 1] > self.cum[i] {
            (s - self.cum[i]) / (self.cum[i + 1] - self.cum[i])
        } else {
            0.0
        };
        let p = a.add(seg.scale(t));
        Pose2::new(p.x, p.y, seg.y.atan2(seg.x))
    }

    /// Arc position of a world point on this path, or None when it is more
    /// than `lateral_max` off the path.
    fn project(&self, point: Point2, lateral_max: f64) -> Option<f64> {
        let mut best: Option<(f64, f64)> = None;
        for i in 0..self.path.len() - 1 {
            let a = self.path[i];
            let b = self.path[i + 1];
            let ab = b.sub(a);
            let len2 = ab.dot(ab);
            let t = if len2 > 0.0 {
                (point.sub(a).dot(ab) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let closest = a.add(ab.scale(t));
            let d = point.dist(closest);
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, self.cum[i] + ab.norm() * t));
            }
        }
        best.filter(|&(d, _)| d <= lateral_max).map(|(_, s)| s)
    }
}

/// Build the centerline path a reactive agent follows: its lane plus the
/// chain of successors (smallest id on branches) until `needed` meters are
/// available past the start.
fn reactive_path(graph: &LaneGraph, lane_id: &str, needed: f64) -> Result<Vec<Point2>, MapError> {
    let mut points: Vec<Point2> = vec![];
    let mut current = lane_id.to_string();
    let mut visited = std::collections::HashSet::new();
    let mut length = 0.0;
    loop {
        let lane = graph.lane(&current)?;
        for &p in &lane.centerline {
            if points.last().map_or(true, |&q| q.dist(p) > 1e-9) {
                if let Some(&q) = points.last() {
                    length += q.dist(p);
                }
                points.push(p);
            }
        }
        if length >= needed || !visited.insert(current.clone()) {
            break;
        }
        let mut succ: Vec<&String> = lane.successors.iter().collect();
        succ.sort();
        match succ.first() {
            Some(&next) if !visited.contains(next) => current = next.clone(),
            _ => break,
        }
    }
    Ok(points)
}

fn cumulative_arcs(path: &[Point2]) -> Vec<f64> {
    let mut cum = Vec::with_capacity(path.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in path.windows(2) {
        acc += w[0].dist(w[1]);
        cum.push(acc);
    }
    cum
}

/// Lateral window within which an entity on the path counts as a same-lane
/// leader.
const LEADER_LATERAL_M: f64 = 2.0;

/// Run the scenario closed-loop: replan every tick, execute the first tick of
/// the best rollout, advance agents (log replay or IDM), stop at the first
/// collision or the scenario duration.
pub fn step_closed_loop(scn: &Scenario, mode: SimMode, stack: &StackConfig) -> Result<SimResult, SimError> {
    let params = scn.ego_params;
    let mut ego = scn.ego_state;
    let mut executed = vec![ego];
    let mut plan_log = Vec::with_capacity(scn.n_ticks);
    let mut latencies = Vec::with_capacity(scn.n_ticks);
    let mut collision = None;
    let mut aborted = None;
    let mut frames = Vec::new();

    let mut agents: Vec<AgentRuntime> = scn
        .agents
        .iter()
        .map(|doc| {
            let first = Pose2::new(doc.poses[0][0], doc.poses[0][1], doc.poses[0][2]);
            let reactive = match (&doc.lane, mode) {
                (Some(lane_id), SimMode::R) => {
                    let lane = scn.graph.lane(lane_id)?;
                    let mut idm = doc.idm.unwrap_or_default();
                    if doc.idm.is_none() {
                        if let Some(limit) = lane.speed_limit {
                            idm.v0 = limit;
                        }
                    }
                    let v = if doc.poses.len() >= 2 {
                        let p0 = Point2::new(doc.poses[0][0], doc.poses[0][1]);
                        let p1 = Point2::new(doc.poses[1][0], doc.poses[1][1]);
                        p1.dist(p0) / TICK_DT
                    } else {
                        0.0
                    };
                    let needed = idm.v0.max(v) * scn.duration + 100.0;
                    let path = reactive_path(&scn.graph, lane_id, needed)?;
                    let cum = cumulative_arcs(&path);
                    let state = ReactiveState {
                        s: 0.0,
                        v,
                        idm,
                        path,
                        cum,
                    };
                    let mut state = state;
                    state.s = state
                        .project(first.position(), f64::INFINITY)
                        .unwrap_or(0.0);
                    Some(state)
                }
                _ => None,
            };
            Ok(AgentRuntime {
                doc,
                history: vec![first],
                reactive,
            })
        })
        .collect::<Result<_, SimError>>()?;

    for tick in 0..scn.n_ticks {
        // Plan from the current state.
        let step = plan_one_tick(scn, stack, &params, &ego, &agents, tick);
        let next_ego = match step {
            Ok(outcome) => {
                plan_log.push(PlanTick {
                    mode: outcome.mode,
                    cost: outcome.cost,
                });
                latencies.push(outcome.latency);
                if stack.collect_frames {
                    let row = |s: &VehicleState| [s.x, s.y, s.heading, s.speed];
                    frames.push(FrameLog {
                        tick,
                        ego,
                        agents: agents
                            .iter()
                            .map(|a| FrameAgent {
                                id: a.doc.id.clone(),
                                pose: *a.history.last().unwrap(),
                            })
                            .collect(),
                        plan: outcome.plan_states.iter().map(row).collect(),
                        proposals: outcome
                            .proposals
                            .modes
                            .iter()
                            .map(|m| m.states.iter().map(row).collect())
                            .collect(),
                    });
                }
                outcome.next_state
            }
            Err(e) => {
                aborted = Some(e.to_string());
                break;
            }
        };

        // Advance agents to the next tick.
        for i in 0..agents.len() {
            let next_pose = if agents[i].reactive.is_some() {
                advance_reactive(&mut agents, i, &ego, &params)
            } else {
                let log = &agents[i].doc.poses;
                let row = log.get(tick + 1).or(log.last()).unwrap();
                Pose2::new(row[0], row[1], row[2])
            };
            agents[i].history.push(next_pose);
        }

        ego = next_ego;
        executed.push(ego);

        // Collision ends the episode; the colliding tick is included.
        for (i, agent) in agents.iter().enumerate() {
            let pose = *agent.history.last().unwrap();
            if obb_intersect(ego.pose(), params.dims(), pose, agent.doc.dims) {
                collision = Some(CollisionEvent {
                    tick: tick + 1,
                    time: (tick + 1) as f64 * TICK_DT,
                    agent: i,
                });
                break;
            }
        }
        if collision.is_some() {
            break;
        }
    }

    let executed = Trajectory {
        states: executed,
        dt: TICK_DT,
    };
    let agent_logs: Vec<AgentPathLog> = agents
        .iter()
        .map(|a| AgentPathLog {
            id: a.doc.id.clone(),
            dims: a.doc.dims,
            poses: a.history.clone(),
        })
        .collect();

    let offroad = offroad_fraction(&executed, &scn.drivable);
    let progress = match &scn.ground_truth {
        Some(reference) => progress_ratio(&executed, reference, &scn.route),
        None => {
            // Without a reference log, compare against constant-speed route
            // following at the initial ego speed.
            let (s0, _) = project_to_route(scn.ego_state.position(), &scn.route);
            let target = (scn.ego_state.speed * scn.duration).min(scn.route.total_length - s0);
            if target < 0.5 {
                1.0
            } else {
                let (s0_exec, _) = project_to_route(executed.states[0].position(), &scn.route);
                let (s1_exec, _) =
                    project_to_route(executed.states.last().unwrap().position(), &scn.route);
                ((s1_exec - s0_exec) / target).clamp(0.0, 1.0)
            }
        }
    };

    Ok(SimResult {
        scenario: scn.name.clone(),
        mode,
        ticks_executed: executed.states.len() - 1,
        collision,
        offroad_fraction: offroad,
        progress_ratio: progress,
        aborted,
        executed,
        agent_logs,
        plan_log,
        latencies_s: latencies,
        frames,
    })
}

struct TickOutcome {
    next_state: VehicleState,
    mode: usize,
    cost: f64,
    latency: f64,
    plan_states: Vec<VehicleState>,
    proposals: ProposalSet,
}

fn plan_one_tick(
    scn: &Scenario,
    stack: &StackConfig,
    params: &VehicleParams,
    ego: &VehicleState,
    agents: &[AgentRuntime],
    tick: usize,
) -> Result<TickOutcome, SimError> {
    let spec = GridSpec::ego_centric(ego.pose());
    let proposals = match (&stack.initial_proposals, tick) {
        (Some(set), 0) => set.clone(),
        _ => sample_centerline_proposals(ego, &scn.route, params, stack.modes)?,
    };

    let tracks: Vec<AgentTrack> = agents
        .iter()
        .map(|a| {
            let n = a.history.len();
            let start = n.saturating_sub(T_POSE);
            let poses: Vec<Pose2> = a.history[start..].to_vec();
            let speed = match &a.reactive {
                Some(r) => r.v,
                None => {
                    if poses.len() >= 2 {
                        poses[poses.len() - 1].position().dist(poses[poses.len() - 2].position())
                            / TICK_DT
                    } else {
                        0.0
                    }
                }
            };
            AgentTrack {
                id: a.doc.id.clone(),
                dims: a.doc.dims,
                poses,
                speed,
                lane: a.doc.lane.clone(),
            }
        })
        .collect();

    let occ_per_mode: Vec<OccupancySequence> = match &stack.predictor {
        Predictor::ConstantVelocity => {
            let occ = predict_constant_velocity(&tracks, &spec, &stack.predictor_cfg);
            vec![occ; proposals.len()]
        }
        Predictor::EgoConditioned => proposals
            .modes
            .iter()
            .map(|m| {
                predict_ego_conditioned_yield(&tracks, m, params.dims(), &spec, &stack.predictor_cfg)
            })
            .collect::<Result<_, _>>()?,
        Predictor::Precomputed(seq) => vec![seq.clone(); proposals.len()],
    };

    let dev_per_mode = proposals
        .modes
        .iter()
        .map(|m| build_deviation_maps(m, params.dims(), &spec))
        .collect::<Result<Vec<_>, _>>()?;

    let start = Instant::now();
    let result = plan(ego, &proposals, &occ_per_mode, &dev_per_mode, params, &stack.planner)?;
    let latency = start.elapsed().as_secs_f64();

    debug_assert_eq!(result.trajectory.states.len(), T_FUTURE + 1);
    Ok(TickOutcome {
        next_state: result.trajectory.states[1],
        mode: result.mode,
        cost: result.cost,
        latency,
        plan_states: result.trajectory.states,
        proposals,
    })
}

/// One IDM tick for the reactive agent at `idx`: find the nearest leader on
/// its path (other agents or the ego), apply IDM, advance along the
/// centerline.
fn advance_reactive(
    agents: &mut [AgentRuntime],
    idx: usize,
    ego: &VehicleState,
    ego_params: &VehicleParams,
) -> Pose2 {
    // Collect candidate leaders before mutably borrowing the agent.
    let mut leaders: Vec<(Point2, f64, f64)> = Vec::with_capacity(agents.len());
    for (j, other) in agents.iter().enumerate() {
        if j == idx {
            continue;
        }
        let pose = *other.history.last().unwrap();
        let speed = match &other.reactive {
            Some(r) => r.v,
            None => {
                let h = &other.history;
                if h.len() >= 2 {
                    h[h.len() - 1].position().dist(h[h.len() - 2].position()) / TICK_DT
                } else {
                    0.0
                }
            }
        };
        leaders.push((pose.position(), speed, other.doc.dims.0));
    }
    leaders.push((ego.position(), ego.speed, ego_params.length));

    let own_len = agents[idx].doc.dims.0;
    let r = agents[idx].reactive.as_mut().unwrap();
    let mut gap = f64::INFINITY;
    let mut v_lead = 0.0;
    for (pos, speed, len) in leaders {
        if let Some(s_other) = r.project(pos, LEADER_LATERAL_M) {
            if s_other > r.s {
                let g = s_other - r.s - 0.5 * (own_len + len);
                if g < gap {
                    gap = g;
                    v_lead = speed;
                }
            }
        }
    }
    // Entities already overlapping bumper-to-bumper leave the IDM undefined;
    // treat as a tiny positive gap so the agent brakes hard.
    let gap = gap.max(0.1);
    let a = idm_accel(r.v, gap, v_lead, &r.idm);
    r.v = (r.v + a * TICK_DT).max(0.0);
    r.s += r.v * TICK_DT;
    r.pose_at(r.s)
}
