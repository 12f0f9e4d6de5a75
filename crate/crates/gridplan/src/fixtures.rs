//! Bundled desk-scale scenarios (empty road, stopped lead, crossing agent,
//! merge) plus the prediction fixture used by the conditioning checks. Ground
//! truth references are IDM-driven route followers, standing in for logged
//! human drives.

use std::path::Path;

use crate::dynamics::{rollout_controls, Control, Trajectory, VehicleParams, VehicleState};
use crate::geom::{Point2, Pose2};
use crate::map::{extract_route, Lane, LaneGraph, MapDoc, Route};
use crate::occupancy::AgentTrack;
use crate::raster::GridSpec;
use crate::sim::{idm_accel, AgentDoc, EgoDoc, IdmParams, RouteDoc, ScenarioDoc, SimMode};
use crate::{T_FUTURE, TICK_DT};

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
    vec![
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ]
}

fn lane(id: &str, pts: &[(f64, f64)], succ: &[&str], limit: f64) -> Lane {
    Lane {
        id: id.into(),
        centerline: pts.iter().map(|&(x, y)| Point2::new(x, y)).collect(),
        successors: succ.iter().map(|s| s.to_string()).collect(),
        left: None,
        right: None,
        speed_limit: Some(limit),
    }
}

fn straight_map() -> MapDoc {
    MapDoc {
        map_version: 1,
        lanes: vec![lane("main", &[(0.0, 0.0), (300.0, 0.0)], &[], 13.9)],
        drivable: vec![rect(-10.0, -4.0, 310.0, 4.0)],
    }
}

/// Pose on a waypoint polyline at arc length `s`.
fn pose_at_arc(route: &Route, s: f64) -> Pose2 {
    let pts = &route.waypoints;
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let a = w[0].position();
        let b = w[1].position();
        let seg = a.dist(b);
        if acc + seg >= s {
            let t = if seg > 0.0 {
                ((s - acc) / seg).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let p = a.add(b.sub(a).scale(t));
            let d = b.sub(a);
            return Pose2::new(p.x, p.y, d.y.atan2(d.x));
        }
        acc += seg;
    }
    *pts.last().unwrap()
}

/// Reference drive: an IDM follower along the ego route reacting to the
/// scripted agents, with the ego's starting speed as its desired speed.
fn idm_reference(
    graph: &LaneGraph,
    route_doc: &RouteDoc,
    ego: &VehicleState,
    ego_len: f64,
    agents: &[AgentDoc],
    n_ticks: usize,
) -> Vec<[f64; 4]> {
    let route = extract_route(graph, &route_doc.start_lane, &route_doc.goal_lane)
        .expect("fixture route must exist");
    let idm = IdmParams {
        v0: ego.speed.max(0.1),
        ..Default::default()
    };
    let (mut s, _) = crate::map::project_to_route(ego.position(), &route);
    let mut v = ego.speed;
    let mut rows = Vec::with_capacity(n_ticks + 1);
    for tick in 0..=n_ticks {
        let pose = pose_at_arc(&route, s);
        rows.push([pose.x, pose.y, pose.heading, v]);
        if tick == n_ticks {
            break;
        }
        let mut gap = f64::INFINITY;
        let mut v_lead = 0.0;
        for agent in agents {
            let row = agent.poses.get(tick).or(agent.poses.last()).unwrap();
            let p = Point2::new(row[0], row[1]);
            let (s_a, lateral) = crate::map::project_to_route(p, &route);
            if lateral.abs() <= 2.0 && s_a > s {
                let speed = agent
                    .poses
                    .get(tick + 1)
                    .map(|n| Point2::new(n[0], n[1]).dist(p) / TICK_DT)
                    .unwrap_or(0.0);
                let g = s_a - s - 0.5 * (ego_len + agent.dims.0);
                if g < gap {
                    gap = g;
                    v_lead = speed;
                }
            }
        }
        let a = idm_accel(v, gap.max(0.1), v_lead, &idm);
        v = (v + a * TICK_DT).max(0.0);
        s += v * TICK_DT;
    }
    rows
}

fn scenario(
    name: &str,
    map: MapDoc,
    ego_state: VehicleState,
    route: RouteDoc,
    agents: Vec<AgentDoc>,
    duration: f64,
) -> ScenarioDoc {
    let n_ticks = (duration / TICK_DT).round() as usize;
    let params = VehicleParams::default();
    let graph = LaneGraph::from_lanes(map.lanes.clone()).expect("fixture map must be valid");
    let ground_truth = idm_reference(&graph, &route, &ego_state, params.length, &agents, n_ticks);
    ScenarioDoc {
        scenario_version: 1,
        name: name.into(),
        mode: SimMode::Nr,
        duration,
        map,
        ego: EgoDoc {
            state: ego_state,
            params,
            route,
        },
        agents,
        ground_truth: Some(ground_truth),
    }
}

fn logged_line_agent(
    id: &str,
    start: (f64, f64),
    heading: f64,
    speed: f64,
    n_ticks: usize,
    lane: Option<&str>,
    idm_v0: Option<f64>,
) -> AgentDoc {
    let (sin, cos) = heading.sin_cos();
    AgentDoc {
        id: id.into(),
        dims: (4.8, 2.0),
        poses: (0..=n_ticks)
            .map(|t| {
                let d = speed * t as f64 * TICK_DT;
                [start.0 + d * cos, start.1 + d * sin, heading]
            })
            .collect(),
        lane: lane.map(|s| s.to_string()),
        idm: idm_v0.map(|v0| IdmParams {
            v0,
            ..Default::default()
        }),
    }
}

/// Free road, straight route.
pub fn empty_road() -> ScenarioDoc {
    scenario(
        "empty_road",
        straight_map(),
        VehicleState::new(5.0, 0.0, 0.0, 12.0),
        RouteDoc {
            start_lane: "main".into(),
            goal_lane: "main".into(),
        },
        vec![],
        5.0,
    )
}

/// A stationary vehicle in-lane 40 m ahead; the ego must stop behind it.
pub fn stopped_lead() -> ScenarioDoc {
    let agent = logged_line_agent("lead", (45.0, 0.0), 0.0, 0.0, 60, None, None);
    scenario(
        "stopped_lead",
        straight_map(),
        VehicleState::new(5.0, 0.0, 0.0, 10.0),
        RouteDoc {
            start_lane: "main".into(),
            goal_lane: "main".into(),
        },
        vec![agent],
        6.0,
    )
}

/// A perpendicular agent crosses the ego lane behind the ego's passage.
pub fn crossing_agent() -> ScenarioDoc {
    let map = MapDoc {
        map_version: 1,
        lanes: vec![
            lane("ew", &[(0.0, 0.0), (200.0, 0.0)], &[], 13.9),
            lane("ns", &[(40.0, -60.0), (40.0, 60.0)], &[], 13.9),
        ],
        drivable: vec![
            rect(-10.0, -4.0, 210.0, 4.0),
            rect(36.0, -60.0, 44.0, 60.0),
        ],
    };
    let agent = logged_line_agent(
        "crosser",
        (40.0, -44.0),
        std::f64::consts::FRAC_PI_2,
        8.0,
        60,
        Some("ns"),
        Some(8.0),
    );
    scenario(
        "crossing_agent",
        map,
        VehicleState::new(5.0, 0.0, 0.0, 10.0),
        RouteDoc {
            start_lane: "ew".into(),
            goal_lane: "ew".into(),
        },
        vec![agent],
        6.0,
    )
}

/// An agent on a merge ramp joins the ego lane shortly after the ego passes
/// the merge point.
pub fn merge() -> ScenarioDoc {
    let map = MapDoc {
        map_version: 1,
        lanes: vec![
            lane("a1", &[(0.0, 0.0), (60.0, 0.0)], &["a2"], 13.9),
            lane("a2", &[(60.0, 0.0), (200.0, 0.0)], &[], 13.9),
            lane("m", &[(20.0, -20.0), (60.0, 0.0)], &["a2"], 13.9),
        ],
        drivable: vec![
            rect(-10.0, -4.0, 210.0, 4.0),
            vec![
                Point2::new(18.88, -17.76),
                Point2::new(21.12, -22.24),
                Point2::new(61.12, -2.24),
                Point2::new(58.88, 2.24),
            ],
        ],
    };
    // Ramp direction toward the merge point.
    let ramp_heading = (20.0f64 / 40.0).atan();
    let n_ticks = 60;
    let speed = 8.0;
    let (sin, cos) = ramp_heading.sin_cos();
    let ramp_len = (40.0f64.powi(2) + 20.0f64.powi(2)).sqrt();
    let agent = AgentDoc {
        id: "merger".into(),
        dims: (4.8, 2.0),
        poses: (0..=n_ticks)
            .map(|t| {
                let d = speed * t as f64 * TICK_DT;
                if d <= ramp_len {
                    [20.0 + d * cos, -20.0 + d * sin, ramp_heading]
                } else {
                    [60.0 + (d - ramp_len), 0.0, 0.0]
                }
            })
            .collect(),
        lane: Some("m".into()),
        idm: Some(IdmParams {
            v0: 8.0,
            ..Default::default()
        }),
    };
    scenario(
        "merge",
        map,
        VehicleState::new(20.0, 0.0, 0.0, 10.0),
        RouteDoc {
            start_lane: "a1".into(),
            goal_lane: "a2".into(),
        },
        vec![agent],
        6.0,
    )
}

pub fn all() -> Vec<ScenarioDoc> {
    vec![empty_road(), stopped_lead(), crossing_agent(), merge()]
}

/// Write every bundled scenario as `<name>.json` under `dir`.
pub fn write_all(dir: &Path) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for doc in all() {
        let path = dir.join(format!("{}.json", doc.name));
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())?;
    }
    Ok(())
}

/// Static single-shot merge geometry for the ego-conditioning checks: one
/// agent approaching the ego corridor diagonally, plus an aggressive
/// (constant-speed) and a conservative (braking) ego proposal.
pub struct MergePredictionFixture {
    pub agents: Vec<AgentTrack>,
    pub aggressive: Trajectory,
    pub conservative: Trajectory,
    pub ego_dims: (f64, f64),
    pub spec: GridSpec,
}

pub fn merge_prediction_fixture() -> MergePredictionFixture {
    let params = VehicleParams::default();
    let heading = std::f64::consts::FRAC_PI_4;
    let speed = 6.0;
    let (sin, cos) = heading.sin_cos();
    let end = Point2::new(3.69, -11.31);
    let step = speed * TICK_DT;
    let poses: Vec<Pose2> = (0..2)
        .map(|i| {
            let back = (1 - i) as f64 * step;
            Pose2::new(end.x - back * cos, end.y - back * sin, heading)
        })
        .collect();
    let agents = vec![AgentTrack {
        id: "merger".into(),
        dims: (4.8, 2.0),
        poses,
        speed,
        lane: None,
    }];

    let start = VehicleState::new(0.0, 0.0, 0.0, 10.0);
    let aggressive = rollout_controls(&start, &[Control::ZERO; T_FUTURE], &params, TICK_DT);
    let conservative = rollout_controls(
        &start,
        &[Control::new(-1.5, 0.0); T_FUTURE],
        &params,
        TICK_DT,
    );
    MergePredictionFixture {
        agents,
        aggressive,
        conservative,
        ego_dims: params.dims(),
        spec: GridSpec::ego_centric(Pose2::new(0.0, 0.0, 0.0)),
    }
}
