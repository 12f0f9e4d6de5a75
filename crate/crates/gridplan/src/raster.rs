//! Ego-centric grids: world/cell transforms, footprint rasterization,
//! occupancy-model input layers, and exact Euclidean distance transforms.
//!
//! Grid frame convention, used everywhere: +row is the ego forward axis and
//! +col is the ego left axis; the ego sits at the center cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Point2, Pose2};
use crate::map::{point_in_drivable, DrivableArea, LaneGraph};
use crate::T_POSE;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("distance transform source has no set cells")]
    EmptySource,
    #[error("length mismatch: expected {expected} {what}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
}

/// Ego-centric grid geometry. The origin pose is the ego pose defining the
/// frame; the default is the 400 x 400 grid at 0.25 m per cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub height: usize,
    pub width: usize,
    pub resolution: f64,
    pub origin: Pose2,
}

impl GridSpec {
    pub fn ego_centric(origin: Pose2) -> Self {
        Self {
            height: 400,
            width: 400,
            resolution: 0.25,
            origin,
        }
    }

    pub fn cells(&self) -> usize {
        self.height * self.width
    }

    /// Unclamped cell coordinates of a world point; may be out of bounds.
    pub fn world_to_cell_raw(&self, p: Point2) -> (i64, i64) {
        let dx = p.x - self.origin.x;
        let dy = p.y - self.origin.y;
        let (sin, cos) = self.origin.heading.sin_cos();
        let forward = cos * dx + sin * dy;
        let left = -sin * dx + cos * dy;
        let row = (forward / self.resolution).floor() as i64 + (self.height / 2) as i64;
        let col = (left / self.resolution).floor() as i64 + (self.width / 2) as i64;
        (row, col)
    }

    /// Cell containing a world point, or `None` when outside the grid.
    pub fn world_to_cell(&self, p: Point2) -> Option<(usize, usize)> {
        let (row, col) = self.world_to_cell_raw(p);
        self.in_bounds(row, col).then(|| (row as usize, col as usize))
    }

    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.height && (col as usize) < self.width
    }

    /// World position of a cell center; accepts out-of-bounds indices.
    pub fn cell_center_world(&self, row: i64, col: i64) -> Point2 {
        let forward = (row - (self.height / 2) as i64) as f64 * self.resolution + self.resolution * 0.5;
        let left = (col - (self.width / 2) as i64) as f64 * self.resolution + self.resolution * 0.5;
        let (sin, cos) = self.origin.heading.sin_cos();
        Point2::new(
            self.origin.x + forward * cos - left * sin,
            self.origin.y + forward * sin + left * cos,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    Binary,
    Probability,
    Distance,
}

/// A dense H x W scalar field over a [`GridSpec`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub semantics: Semantics,
    pub values: Vec<f32>,
}

impl Grid {
    pub fn zeros(spec: GridSpec, semantics: Semantics) -> Self {
        Self {
            spec,
            semantics,
            values: vec![0.0; spec.cells()],
        }
    }

    pub fn filled(spec: GridSpec, semantics: Semantics, value: f32) -> Self {
        Self {
            spec,
            semantics,
            values: vec![value; spec.cells()],
        }
    }

    #[inline]
    pub fn idx(&self, row: usize, col: usize) -> usize {
        row * self.spec.width + col
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.spec.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.values[row * self.spec.width + col] = value;
    }

    pub fn set_cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.spec.width;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(move |(i, _)| (i / w, i % w))
    }
}

/// Result of rasterizing an oriented rectangle: the in-bounds cells whose
/// centers fall inside it, plus how many inside-cells were lost off-grid.
#[derive(Debug, Clone, Default)]
pub struct FootprintCells {
    pub cells: Vec<(usize, usize)>,
    pub clipped: usize,
}

impl FootprintCells {
    /// Total cell-center hits including those that fell off the grid.
    pub fn full_count(&self) -> usize {
        self.cells.len() + self.clipped
    }
}

/// Visit every cell (in bounds or not) whose center lies inside the oriented
/// rectangle `dims` at `pose`. The rectangle-frame coordinates of cell
/// centers are affine in (row, col), so the scan is incremental — no
/// per-cell trig.
pub(crate) fn for_each_rect_cell(
    spec: &GridSpec,
    pose: Pose2,
    dims: (f64, f64),
    mut visit: impl FnMut(i64, i64),
) {
    let (length, width) = dims;
    let (hl, hw) = (length * 0.5, width * 0.5);
    let (sin, cos) = pose.heading.sin_cos();

    // Grid-coordinate bounding box of the rectangle corners.
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
        // A center inside the rectangle lies within the corner coordinate
        // range, and flooring is monotone, so the corner cells bound the hits.
        row_min = row_min.min(r);
        row_max = row_max.max(r);
        col_min = col_min.min(c);
        col_max = col_max.max(c);
    }

    // Rectangle-frame (u, v) of the first cell center plus per-row/col steps.
    let (sin_g, cos_g) = spec.origin.heading.sin_cos();
    let res = spec.resolution;
    let du_r = res * (cos * cos_g + sin * sin_g);
    let du_c = res * (-cos * sin_g + sin * cos_g);
    let dv_r = res * (-sin * cos_g + cos * sin_g);
    let dv_c = res * (sin * sin_g + cos * cos_g);
    let first = spec.cell_center_world(row_min, col_min);
    let dx = first.x - pose.x;
    let dy = first.y - pose.y;
    let mut u_row = cos * dx + sin * dy;
    let mut v_row = -sin * dx + cos * dy;

    for row in row_min..=row_max {
        let mut u = u_row;
        let mut v = v_row;
        for col in col_min..=col_max {
            if u.abs() <= hl && v.abs() <= hw {
                visit(row, col);
            }
            u += du_c;
            v += dv_c;
        }
        u_row += du_r;
        v_row += dv_r;
    }
}

/// Cells whose centers lie inside the oriented rectangle `dims` at `pose`.
pub fn footprint_cells(pose: Pose2, dims: (f64, f64), spec: &GridSpec) -> FootprintCells {
    let mut out = FootprintCells::default();
    for_each_rect_cell(spec, pose, dims, |row, col| {
        if spec.in_bounds(row, col) {
            out.cells.push((row as usize, col as usize));
        } else {
            out.clipped += 1;
        }
    });
    out
}

/// Binary grid marking the cells covered by an oriented rectangle.
pub fn rasterize_footprint(pose: Pose2, dims: (f64, f64), spec: &GridSpec) -> Grid {
    let mut grid = Grid::zeros(*spec, Semantics::Binary);
    for (r, c) in footprint_cells(pose, dims, spec).cells {
        grid.set(r, c, 1.0);
    }
    grid
}

/// Poses plus box dims of one agent over the history window.
#[derive(Debug, Clone)]
pub struct AgentHistory {
    pub dims: (f64, f64),
    pub poses: Vec<Pose2>,
}

/// Occupancy-model input: pose history (ego / others), static world channels,
/// and the ego future proposal, all sharing one grid spec.
#[derive(Debug)]
pub struct InputLayers {
    pub p_ego: Vec<Grid>,
    pub p_others: Vec<Grid>,
    /// drivable area, lane centerlines, lane direction cos, lane direction sin
    pub statics: Vec<Grid>,
    pub ego_future: Vec<Grid>,
}

/// Build the P/S/E layer stack for one planning query.
///
/// `ego_history` and every entry of `others` must cover exactly [`T_POSE`]
/// frames; `proposal_poses` must cover `t_future + 1` states (current state
/// first) and contributes one footprint grid per future step.
pub fn build_input_layers(
    ego_history: &AgentHistory,
    others: &[AgentHistory],
    map: (&LaneGraph, &DrivableArea),
    proposal_poses: &[Pose2],
    proposal_dims: (f64, f64),
    t_future: usize,
    spec: &GridSpec,
) -> Result<InputLayers, RasterError> {
    if ego_history.poses.len() != T_POSE {
        return Err(RasterError::LengthMismatch {
            what: "ego history frames",
            expected: T_POSE,
            got: ego_history.poses.len(),
        });
    }
    for other in others {
        if other.poses.len() != T_POSE {
            return Err(RasterError::LengthMismatch {
                what: "agent history frames",
                expected: T_POSE,
                got: other.poses.len(),
            });
        }
    }
    if proposal_poses.len() != t_future + 1 {
        return Err(RasterError::LengthMismatch {
            what: "proposal states",
            expected: t_future + 1,
            got: proposal_poses.len(),
        });
    }

    let p_ego: Vec<Grid> = ego_history
        .poses
        .iter()
        .map(|&pose| rasterize_footprint(pose, ego_history.dims, spec))
        .collect();

    let mut p_others = Vec::with_capacity(T_POSE);
    for t in 0..T_POSE {
        let mut grid = Grid::zeros(*spec, Semantics::Binary);
        for other in others {
            for (r, c) in footprint_cells(other.poses[t], other.dims, spec).cells {
                grid.set(r, c, 1.0);
            }
        }
        p_others.push(grid);
    }

    let statics = build_static_layers(map.0, map.1, spec);

    let ego_future: Vec<Grid> = proposal_poses[1..]
        .iter()
        .map(|&pose| rasterize_footprint(pose, proposal_dims, spec))
        .collect();

    Ok(InputLayers {
        p_ego,
        p_others,
        statics,
        ego_future,
    })
}

/// Static world channels: drivable mask, centerline mask, and lane direction
/// cos/sin remapped to [0, 1] on centerline cells.
fn build_static_layers(graph: &LaneGraph, area: &DrivableArea, spec: &GridSpec) -> Vec<Grid> {
    let mut drivable = Grid::zeros(*spec, Semantics::Binary);
    // Only test cells near the drivable polygons.
    for poly in &area.polygons {
        let mut row_min = i64::MAX;
        let mut row_max = i64::MIN;
        let mut col_min = i64::MAX;
        let mut col_max = i64::MIN;
        for &p in poly {
            let (r, c) = spec.world_to_cell_raw(p);
            row_min = row_min.min(r - 1);
            row_max = row_max.max(r + 1);
            col_min = col_min.min(c - 1);
            col_max = col_max.max(c + 1);
        }
        row_min = row_min.max(0);
        col_min = col_min.max(0);
        row_max = row_max.min(spec.height as i64 - 1);
        col_max = col_max.min(spec.width as i64 - 1);
        for row in row_min..=row_max {
            for col in col_min..=col_max {
                if drivable.at(row as usize, col as usize) == 0.0
                    && point_in_drivable(spec.cell_center_world(row, col), area)
                {
                    drivable.set(row as usize, col as usize, 1.0);
                }
            }
        }
    }

    let mut centerlines = Grid::zeros(*spec, Semantics::Binary);
    let mut dir_cos = Grid::zeros(*spec, Semantics::Probability);
    let mut dir_sin = Grid::zeros(*spec, Semantics::Probability);
    let step = spec.resolution * 0.5;
    for lane in graph.lanes() {
        for w in lane.centerline.windows(2) {
            let (a, b) = (w[0], w[1]);
            let seg = b.sub(a);
            let len = seg.norm();
            let heading = seg.y.atan2(seg.x);
            let n = (len / step).ceil() as usize;
            for i in 0..=n {
                let p = a.add(seg.scale(i as f64 / n.max(1) as f64));
                if let Some((r, c)) = spec.world_to_cell(p) {
                    centerlines.set(r, c, 1.0);
                    dir_cos.set(r, c, ((heading.cos() + 1.0) * 0.5) as f32);
                    dir_sin.set(r, c, ((heading.sin() + 1.0) * 0.5) as f32);
                }
            }
        }
    }

    vec![drivable, centerlines, dir_cos, dir_sin]
}

/// Exact Euclidean distance (meters, cell-center metric) from every cell to
/// the nearest set cell of a binary source grid.
pub fn distance_transform(source: &Grid) -> Result<Grid, RasterError> {
    let set: Vec<(usize, usize)> = source.set_cells().collect();
    if set.is_empty() {
        return Err(RasterError::EmptySource);
    }
    let (h, w) = (source.spec.height, source.spec.width);
    let field = distance_field_cells(&set, h, w, None);
    let res = source.spec.resolution as f32;
    Ok(Grid {
        spec: source.spec,
        semantics: Semantics::Distance,
        values: field.into_iter().map(|d| d * res).collect(),
    })
}

/// Exact distance-in-cells field via the two-pass parabola-envelope EDT.
///
/// With `window_margin = Some(m)` the transform only runs inside the bounding
/// box of the set cells expanded by `m` cells; everything outside is reported
/// as `f32::INFINITY`. Any cell within `m` cells (Euclidean) of a source cell
/// lies inside that box, so values below `m` are exact.
pub fn distance_field_cells(
    set: &[(usize, usize)],
    height: usize,
    width: usize,
    window_margin: Option<usize>,
) -> Vec<f32> {
    let (r0, c0, wh, ww, window) = distance_field_window(set, height, width, window_margin);
    let mut out = vec![f32::INFINITY; height * width];
    for r in 0..wh {
        for c in 0..ww {
            out[(r + r0) * width + (c + c0)] = window[r * ww + c];
        }
    }
    out
}

/// Windowed form of [`distance_field_cells`]: returns `(r0, c0, wh, ww,
/// values)` where `values` is the `wh x ww` distance field anchored at
/// `(r0, c0)`; cells outside the window are implicitly at infinity.
pub fn distance_field_window(
    set: &[(usize, usize)],
    height: usize,
    width: usize,
    window_margin: Option<usize>,
) -> (usize, usize, usize, usize, Vec<f32>) {
    assert!(!set.is_empty());
    let mut r_min = usize::MAX;
    let mut r_max = 0;
    let mut c_min = usize::MAX;
    let mut c_max = 0;
    for &(r, c) in set {
        r_min = r_min.min(r);
        r_max = r_max.max(r);
        c_min = c_min.min(c);
        c_max = c_max.max(c);
    }
    let (r0, r1, c0, c1) = match window_margin {
        None => (0, height - 1, 0, width - 1),
        Some(m) => (
            r_min.saturating_sub(m),
            (r_max + m).min(height - 1),
            c_min.saturating_sub(m),
            (c_max + m).min(width - 1),
        ),
    };
    let wh = r1 - r0 + 1;
    let ww = c1 - c0 + 1;

    const INF: f64 = 1e20;
    let mut sq = vec![INF; wh * ww];
    for &(r, c) in set {
        sq[(r - r0) * ww + (c - c0)] = 0.0;
    }

    // Column pass then row pass of the 1D squared-distance transform. Only
    // columns intersecting the source bounding box hold finite values before
    // the column pass, so the others can skip it.
    let mut scratch_f = vec![0.0f64; wh.max(ww)];
    let mut scratch_d = vec![0.0f64; wh.max(ww) + 1];
    let mut scratch_v = vec![0usize; wh.max(ww)];
    let mut scratch_z = vec![0.0f64; wh.max(ww) + 1];
    for c in (c_min - c0)..=(c_max - c0) {
        for r in 0..wh {
            scratch_f[r] = sq[r * ww + c];
        }
        edt_1d(&scratch_f[..wh], &mut scratch_d, &mut scratch_v, &mut scratch_z);
        for r in 0..wh {
            sq[r * ww + c] = scratch_d[r];
        }
    }
    for r in 0..wh {
        scratch_f[..ww].copy_from_slice(&sq[r * ww..(r + 1) * ww]);
        edt_1d(&scratch_f[..ww], &mut scratch_d, &mut scratch_v, &mut scratch_z);
        sq[r * ww..(r + 1) * ww].copy_from_slice(&scratch_d[..ww]);
    }

    let values = sq.iter().map(|&d| d.sqrt() as f32).collect();
    (r0, c0, wh, ww, values)
}

/// Felzenszwalb-Huttenlocher 1D squared distance transform.
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let mut k = 0usize;
    v[0] = 0;
    z[0] = -1e20;
    z[1] = 1e20;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = 1e20;
                break;
            }
        }
    }
    k = 0;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        d[q] = dq * dq + f[p];
    }
}
