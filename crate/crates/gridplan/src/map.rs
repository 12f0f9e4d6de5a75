//! Lane-graph map, route extraction, and geometric queries.

use std::collections::{BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{
    normalize_angle, point_in_polygon, polygon_signed_area, segment_param, Point2, Pose2,
};

/// Waypoint spacing for resampled routes, meters.
pub const ROUTE_SPACING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("unknown lane id `{0}`")]
    UnknownLane(String),
    #[error("no route from `{from}` to `{to}` via successor links")]
    NoRoute { from: String, to: String },
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map format error: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lane {
    pub id: String,
    pub centerline: Vec<Point2>,
    #[serde(default)]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit: Option<f64>,
}

impl Lane {
    pub fn length(&self) -> f64 {
        self.centerline.windows(2).map(|w| w[0].dist(w[1])).sum()
    }
}

/// Immutable lane graph; all queries are safe for concurrent readers.
#[derive(Debug, Clone)]
pub struct LaneGraph {
    lanes: Vec<Lane>,
    index: HashMap<String, usize>,
}

impl LaneGraph {
    pub fn from_lanes(lanes: Vec<Lane>) -> Result<Self, MapError> {
        let mut index = HashMap::new();
        for (i, lane) in lanes.iter().enumerate() {
            if lane.centerline.len() < 2 {
                return Err(MapError::InvalidMap(format!(
                    "lane `{}` has fewer than 2 centerline points",
                    lane.id
                )));
            }
            for w in lane.centerline.windows(2) {
                if w[0].dist(w[1]) <= 0.0 {
                    return Err(MapError::InvalidMap(format!(
                        "lane `{}` has consecutive duplicate centerline points",
                        lane.id
                    )));
                }
            }
            if index.insert(lane.id.clone(), i).is_some() {
                return Err(MapError::InvalidMap(format!("duplicate lane id `{}`", lane.id)));
            }
        }
        for lane in &lanes {
            for succ in &lane.successors {
                if !index.contains_key(succ) {
                    return Err(MapError::InvalidMap(format!(
                        "lane `{}` references unknown successor `{succ}`",
                        lane.id
                    )));
                }
            }
        }
        Ok(Self { lanes, index })
    }

    pub fn lane(&self, id: &str) -> Result<&Lane, MapError> {
        self.index
            .get(id)
            .map(|&i| &self.lanes[i])
            .ok_or_else(|| MapError::UnknownLane(id.to_string()))
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }
}

/// Union of simple polygons describing the drivable surface.
/// Winding is normalized to counterclockwise on construction.
#[derive(Debug, Clone, Default)]
pub struct DrivableArea {
    pub polygons: Vec<Vec<Point2>>,
}

impl DrivableArea {
    pub fn new(polygons: Vec<Vec<Point2>>) -> Result<Self, MapError> {
        let mut normalized = Vec::with_capacity(polygons.len());
        for mut poly in polygons {
            if poly.len() < 3 {
                return Err(MapError::InvalidMap(
                    "drivable polygon has fewer than 3 vertices".into(),
                ));
            }
            if polygon_signed_area(&poly) < 0.0 {
                poly.reverse();
            }
            normalized.push(poly);
        }
        Ok(Self { polygons: normalized })
    }
}

/// A lane sequence resampled to fixed-spacing waypoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Route {
    pub lane_ids: Vec<String>,
    pub waypoints: Vec<Pose2>,
    pub total_length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit: Option<f64>,
}

// Dijkstra queue entry; min-cost first, lane-id ascending on ties.
struct QueueEntry {
    cost: f64,
    lane: usize,
    id: String,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.id == other.id
    }
}
impl Eq for QueueEntry {}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed for min-heap behavior on BinaryHeap.
        other
            .cost
            .partial_cmp(&self.cost)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.id.cmp(&self.id))
    }
}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Minimum-total-centerline-length lane sequence from `start_lane` to
/// `goal_lane` via successor links, resampled to [`ROUTE_SPACING`] waypoints.
/// Ties are broken toward the lexicographically smaller lane id.
pub fn extract_route(graph: &LaneGraph, start_lane: &str, goal_lane: &str) -> Result<Route, MapError> {
    let start = graph.lane(start_lane)?;
    graph.lane(goal_lane)?;

    let n = graph.lanes.len();
    let start_idx = graph.index[start_lane];
    let goal_idx = graph.index[goal_lane];

    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    let mut heap = BinaryHeap::new();
    dist[start_idx] = start.length();
    heap.push(QueueEntry {
        cost: dist[start_idx],
        lane: start_idx,
        id: start_lane.to_string(),
    });

    while let Some(entry) = heap.pop() {
        if entry.cost > dist[entry.lane] {
            continue;
        }
        if entry.lane == goal_idx {
            break;
        }
        let lane = &graph.lanes[entry.lane];
        for succ in &lane.successors {
            let si = graph.index[succ];
            let cand = entry.cost + graph.lanes[si].length();
            let better = cand < dist[si]
                || (cand == dist[si]
                    && prev[si].is_some_and(|p| graph.lanes[entry.lane].id < graph.lanes[p].id));
            if better {
                dist[si] = cand;
                prev[si] = Some(entry.lane);
                heap.push(QueueEntry {
                    cost: cand,
                    lane: si,
                    id: succ.clone(),
                });
            }
        }
    }

    if dist[goal_idx].is_infinite() {
        return Err(MapError::NoRoute {
            from: start_lane.to_string(),
            to: goal_lane.to_string(),
        });
    }

    let mut order = vec![goal_idx];
    while let Some(p) = prev[*order.last().unwrap()] {
        order.push(p);
    }
    order.reverse();

    let lane_ids: Vec<String> = order.iter().map(|&i| graph.lanes[i].id.clone()).collect();

    // Concatenate centerlines, dropping duplicated joint points.
    let mut polyline: Vec<Point2> = Vec::new();
    for &i in &order {
        for &p in &graph.lanes[i].centerline {
            if polyline.last().is_none_or(|&last| last.dist(p) > 1e-9) {
                polyline.push(p);
            }
        }
    }

    let speed_limit = order
        .iter()
        .filter_map(|&i| graph.lanes[i].speed_limit)
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v))));

    let waypoints = resample_polyline(&polyline, ROUTE_SPACING);
    let total_length = waypoints
        .windows(2)
        .map(|w| w[0].position().dist(w[1].position()))
        .sum();

    Ok(Route {
        lane_ids,
        waypoints,
        total_length,
        speed_limit,
    })
}

/// Resample a polyline at fixed arc-length spacing; headings follow the local
/// segment tangent. The final point is always included.
fn resample_polyline(polyline: &[Point2], spacing: f64) -> Vec<Pose2> {
    let mut seg_start_arc = Vec::with_capacity(polyline.len());
    let mut acc = 0.0;
    for i in 0..polyline.len() {
        seg_start_arc.push(acc);
        if i + 1 < polyline.len() {
            acc += polyline[i].dist(polyline[i + 1]);
        }
    }
    let total = acc;

    let mut out = Vec::new();
    let mut seg = 0usize;
    let mut s = 0.0f64;
    loop {
        let target = s.min(total);
        while seg + 2 < polyline.len() && seg_start_arc[seg + 1] <= target {
            seg += 1;
        }
        let a = polyline[seg];
        let b = polyline[seg + 1];
        let seg_len = a.dist(b);
        let t = if seg_len > 0.0 {
            ((target - seg_start_arc[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let p = a.add(b.sub(a).scale(t));
        let d = b.sub(a);
        out.push(Pose2::new(p.x, p.y, normalize_angle(d.y.atan2(d.x))));
        if s >= total {
            break;
        }
        s += spacing;
    }
    out
}

/// Project a point onto the route's waypoint polyline.
/// Returns `(arc_length, lateral_offset)` with positive offsets to the left
/// of the travel direction. Ties favor the smaller arc length.
pub fn project_to_route(point: Point2, route: &Route) -> (f64, f64) {
    assert!(route.waypoints.len() >= 2, "route needs >= 2 waypoints");
    let mut best_d2 = f64::INFINITY;
    let mut best = (0.0, 0.0);
    let mut arc = 0.0;
    for w in route.waypoints.windows(2) {
        let (a, b) = (w[0].position(), w[1].position());
        let t = segment_param(point, a, b);
        let closest = a.add(b.sub(a).scale(t));
        let d2 = point.dist(closest).powi(2);
        if d2 < best_d2 {
            best_d2 = d2;
            let along = b.sub(a);
            let sign = along.cross(point.sub(closest)).signum();
            let offset = point.dist(closest) * if sign == 0.0 { 1.0 } else { sign };
            best = (arc + t * a.dist(b), offset);
        }
        arc += a.dist(b);
    }
    best
}

/// True iff the point is inside or on the boundary of any drivable polygon.
pub fn point_in_drivable(point: Point2, area: &DrivableArea) -> bool {
    area.polygons.iter().any(|poly| point_in_polygon(point, poly))
}

// --- map file format (version 1) ---

#[derive(Debug, Serialize, Deserialize)]
pub struct MapDoc {
    pub map_version: u32,
    pub lanes: Vec<Lane>,
    pub drivable: Vec<Vec<Point2>>,
}

impl MapDoc {
    pub fn into_parts(self) -> Result<(LaneGraph, DrivableArea), MapError> {
        if self.map_version != 1 {
            return Err(MapError::Format(format!(
                "unsupported map_version {}",
                self.map_version
            )));
        }
        Ok((LaneGraph::from_lanes(self.lanes)?, DrivableArea::new(self.drivable)?))
    }
}

pub fn load_map(doc: &str) -> Result<(LaneGraph, DrivableArea), MapError> {
    let doc: MapDoc = serde_json::from_str(doc).map_err(|e| MapError::Format(e.to_string()))?;
    doc.into_parts()
}
