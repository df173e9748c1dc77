//! Planar charts of the positivity domain `Ω` of `V_α`.
//!
//! `V` is sampled on a regular grid; `Ω` is the flood-filled component of
//! positive nodes containing the seed, and its boundary is traced with
//! marching squares. Zero crossings are refined along each cell edge until
//! `|V| < level_tol`. Saddle-type critical points lying exactly on the zero
//! level pinch `Ω`: grid nodes around them are excluded from the flood fill
//! and the boundary arcs meeting there are joined through the point itself.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{dist, norm};
use crate::potential::{CriticalPoint, ShiftedPotential};
use crate::space::{BBox, Point};

pub const DEFAULT_LEVEL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("chart extraction needs a planar potential, got dimension {0}")]
    NotPlanar(usize),
    #[error("grid resolution must be at least 8 cells per axis, got {0:?}")]
    Resolution([usize; 2]),
    #[error("seed {seed:?} is not in the positive set (V = {value})")]
    SeedNotPositive { seed: Point, value: f64 },
    #[error("non-finite potential value at grid node {0:?}")]
    NonFinite(Point),
    #[error("boundary projection did not converge from {start:?} (last |V| = {residual})")]
    ProjectionFailed { start: Point, residual: f64 },
    #[error("unknown component id {0}")]
    UnknownComponent(usize),
}

/// Grid specification: box plus number of cells per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub bbox: BBox,
    pub resolution: [usize; 2],
}

impl GridSpec {
    pub fn new(bbox: BBox, nx: usize, ny: usize) -> Self {
        GridSpec { bbox, resolution: [nx, ny] }
    }

    pub fn refined(&self, factor: usize) -> Self {
        GridSpec { bbox: self.bbox.clone(), resolution: [self.resolution[0] * factor, self.resolution[1] * factor] }
    }

    pub fn spacing(&self) -> [f64; 2] {
        [(self.bbox.hi[0] - self.bbox.lo[0]) / self.resolution[0] as f64, (self.bbox.hi[1] - self.bbox.lo[1]) / self.resolution[1] as f64]
    }

    pub fn cell_diag(&self) -> f64 {
        let [hx, hy] = self.spacing();
        hx.hypot(hy)
    }
}

/// `V` sampled at the `(nx+1) × (ny+1)` grid nodes.
#[derive(Debug, Clone)]
pub struct SignGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl SignGrid {
    pub fn sample(v: &ShiftedPotential, spec: &GridSpec) -> Result<SignGrid, GeometryError> {
        if v.dim() != 2 || spec.bbox.dim() != 2 {
            return Err(GeometryError::NotPlanar(v.dim()));
        }
        if spec.resolution.iter().any(|&r| r < 8) {
            return Err(GeometryError::Resolution(spec.resolution));
        }
        let mut g = SignGrid { spec: spec.clone(), values: Vec::new() };
        let [nx, ny] = spec.resolution;
        g.values.reserve((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                let p = g.node(i, j);
                let val = v.value(&p);
                if !val.is_finite() {
                    return Err(GeometryError::NonFinite(p));
                }
                g.values.push(val);
            }
        }
        Ok(g)
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.spec.resolution[0]
    }

    #[inline]
    pub fn ny(&self) -> usize {
        self.spec.resolution[1]
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * (self.nx() + 1) + i
    }

    #[inline]
    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % (self.nx() + 1), k / (self.nx() + 1))
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        let [hx, hy] = self.spec.spacing();
        vec![self.spec.bbox.lo[0] + i as f64 * hx, self.spec.bbox.lo[1] + j as f64 * hy]
    }

    pub fn node_count(&self) -> usize {
        (self.nx() + 1) * (self.ny() + 1)
    }

    #[inline]
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    /// Nearest grid node to `x` (clamped to the box).
    pub fn nearest_node(&self, x: &[f64]) -> (usize, usize) {
        let [hx, hy] = self.spec.spacing();
        let fi = ((x[0] - self.spec.bbox.lo[0]) / hx).round().clamp(0.0, self.nx() as f64);
        let fj = ((x[1] - self.spec.bbox.lo[1]) / hy).round().clamp(0.0, self.ny() as f64);
        (fi as usize, fj as usize)
    }

    pub fn on_border(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx() || j == self.ny()
    }
}

/// Node mask of `Ω` on a grid, including the pinch exclusions.
#[derive(Debug, Clone)]
pub(crate) struct OmegaMask {
    pub inside: Vec<bool>,
    pub touches_bbox: bool,
}

/// Saddle points of `V` lying on the zero level.
pub(crate) fn pinch_points(candidates: &[CriticalPoint], level_tol: f64) -> Vec<Point> {
    candidates.iter().filter(|c| c.potential_value.abs() <= level_tol && c.is_saddle()).map(|c| c.location.clone()).collect()
}

fn pinch_radius(spec: &GridSpec) -> f64 {
    3.0 * spec.cell_diag()
}

/// Flood fill of positive nodes from `seed`, 4-connected plus diagonal
/// steps across saddle cells whose centre sample is positive.
pub(crate) fn flood_omega(v: &ShiftedPotential, grid: &SignGrid, seed: &[f64], pinches: &[Point]) -> Result<OmegaMask, GeometryError> {
    let n = grid.node_count();
    let r_block = pinch_radius(&grid.spec);
    let mut usable = vec![false; n];
    for k in 0..n {
        if grid.values[k] > 0.0 {
            let (i, j) = grid.coords(k);
            let p = grid.node(i, j);
            usable[k] = pinches.iter().all(|q| dist(q, &p) > r_block);
        }
    }
    let start = {
        let (si, sj) = grid.nearest_node(seed);
        let mut best: Option<(f64, usize)> = None;
        // search the 5x5 neighbourhood around the nearest node
        for dj in -2i64..=2 {
            for di in -2i64..=2 {
                let (i, j) = (si as i64 + di, sj as i64 + dj);
                if i < 0 || j < 0 || i > grid.nx() as i64 || j > grid.ny() as i64 {
                    continue;
                }
                let k = grid.idx(i as usize, j as usize);
                if usable[k] {
                    let d = dist(&grid.node(i as usize, j as usize), seed);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, k));
                    }
                }
            }
        }
        match best {
            Some((_, k)) => k,
            None => return Err(GeometryError::SeedNotPositive { seed: seed.to_vec(), value: v.value(seed) }),
        }
    };

    let mut inside = vec![false; n];
    let mut stack = vec![start];
    inside[start] = true;
    let (nx, ny) = (grid.nx(), grid.ny());
    let [hx, hy] = grid.spec.spacing();
    let center_positive = |ci: usize, cj: usize| -> bool {
        let c = [grid.spec.bbox.lo[0] + (ci as f64 + 0.5) * hx, grid.spec.bbox.lo[1] + (cj as f64 + 0.5) * hy];
        v.value(&c) > 0.0
    };
    while let Some(k) = stack.pop() {
        let (i, j) = grid.coords(k);
        let push = |ii: usize, jj: usize, inside: &mut Vec<bool>, stack: &mut Vec<usize>| {
            let kk = grid.idx(ii, jj);
            if usable[kk] && !inside[kk] {
                inside[kk] = true;
                stack.push(kk);
            }
        };
        if i > 0 {
            push(i - 1, j, &mut inside, &mut stack);
        }
        if i < nx {
            push(i + 1, j, &mut inside, &mut stack);
        }
        if j > 0 {
            push(i, j - 1, &mut inside, &mut stack);
        }
        if j < ny {
            push(i, j + 1, &mut inside, &mut stack);
        }
        // diagonal moves through saddle cells
        for (di, dj) in [(-1i64, -1i64), (1, -1), (-1, 1), (1, 1)] {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii < 0 || jj < 0 || ii > nx as i64 || jj > ny as i64 {
                continue;
            }
            let (ii, jj) = (ii as usize, jj as usize);
            let side_a = grid.idx(ii, j);
            let side_b = grid.idx(i, jj);
            let diag = grid.idx(ii, jj);
            if inside[diag] || !usable[diag] {
                continue;
            }
            if grid.values[side_a] > 0.0 || grid.values[side_b] > 0.0 {
                continue; // reachable 4-connected, or not a saddle cell
            }
            if center_positive(i.min(ii), j.min(jj)) {
                push(ii, jj, &mut inside, &mut stack);
            }
        }
    }
    let touches_bbox = (0..n).any(|k| {
        let (i, j) = grid.coords(k);
        inside[k] && grid.on_border(i, j)
    });
    Ok(OmegaMask { inside, touches_bbox })
}

/// A connected piece of `∂Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryComponent {
    pub id: usize,
    /// Node chain on `{V = 0}`; first node equals last node when closed.
    pub polyline: Vec<Point>,
    pub closed: bool,
    /// Largest pairwise node distance.
    pub diameter: f64,
    /// Indices into [`DomainChart::critical_points`].
    pub critical_points: Vec<usize>,
    pub is_singleton: bool,
}

impl BoundaryComponent {
    /// Closest point of the polyline to `x` and its distance.
    pub fn nearest_point(&self, x: &[f64]) -> (Point, f64) {
        if self.polyline.len() == 1 {
            return (self.polyline[0].clone(), dist(&self.polyline[0], x));
        }
        let mut best = (self.polyline[0].clone(), f64::INFINITY);
        for w in self.polyline.windows(2) {
            let q = closest_on_segment(&w[0], &w[1], x);
            let d = dist(&q, x);
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }

    pub fn length(&self) -> f64 {
        self.polyline.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    /// Point at arclength `s` along the polyline (wrapping when closed).
    pub fn point_at(&self, s: f64) -> Point {
        let total = self.length();
        if total == 0.0 {
            return self.polyline[0].clone();
        }
        let mut s = if self.closed { s.rem_euclid(total) } else { s.clamp(0.0, total) };
        for w in self.polyline.windows(2) {
            let l = dist(&w[0], &w[1]);
            if s <= l && l > 0.0 {
                let t = s / l;
                return w[0].iter().zip(&w[1]).map(|(a, b)| a + t * (b - a)).collect();
            }
            s -= l;
        }
        self.polyline.last().cloned().unwrap_or_default()
    }

    /// Arclength position of the polyline point closest to `x`.
    pub fn arclength_of(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut best = (0.0, f64::INFINITY);
        for w in self.polyline.windows(2) {
            let q = closest_on_segment(&w[0], &w[1], x);
            let d = dist(&q, x);
            if d < best.1 {
                best = (acc + dist(&w[0], &q), d);
            }
            acc += dist(&w[0], &w[1]);
        }
        best.0
    }
}

fn closest_on_segment(a: &[f64], b: &[f64], x: &[f64]) -> Point {
    let ab: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
    let l2: f64 = ab.iter().map(|v| v * v).sum();
    if l2 == 0.0 {
        return a.to_vec();
    }
    let t = (a.iter().zip(x).zip(&ab).map(|((p, q), d)| (q - p) * d).sum::<f64>() / l2).clamp(0.0, 1.0);
    a.iter().zip(&ab).map(|(p, d)| p + t * d).collect()
}

fn segment_distance(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    [
        dist(&closest_on_segment(c, d, a), a),
        dist(&closest_on_segment(c, d, b), b),
        dist(&closest_on_segment(a, b, c), c),
        dist(&closest_on_segment(a, b, d), d),
    ]
    .into_iter()
    .fold(f64::INFINITY, f64::min)
}

fn segments_intersect(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> bool {
    let cross = |o: &[f64], p: &[f64], q: &[f64]| (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0]);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

/// Minimum distance between two polylines.
pub fn polyline_gap(p: &[Point], q: &[Point]) -> f64 {
    let segs = |v: &[Point]| -> Vec<(Point, Point)> {
        if v.len() == 1 {
            vec![(v[0].clone(), v[0].clone())]
        } else {
            v.windows(2).map(|w| (w[0].clone(), w[1].clone())).collect()
        }
    };
    let (sp, sq) = (segs(p), segs(q));
    let mut best = f64::INFINITY;
    for (a, b) in &sp {
        for (c, d) in &sq {
            best = best.min(segment_distance(a, b, c, d));
        }
    }
    best
}

fn diameter(poly: &[Point]) -> f64 {
    let mut d = 0.0f64;
    for (i, a) in poly.iter().enumerate() {
        for b in &poly[i + 1..] {
            d = d.max(dist(a, b));
        }
    }
    d
}

/// The positivity domain with its boundary components.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainChart {
    pub grid: GridSpec,
    pub seed: Point,
    pub components: Vec<BoundaryComponent>,
    /// Symmetric matrix of minimal Euclidean distances between components.
    pub gap_matrix: Vec<Vec<f64>>,
    /// Every critical point offered to [`attach_critical_points`], in order.
    pub critical_points: Vec<CriticalPoint>,
    /// Zero-level saddles used to pinch `Ω`.
    pub pinches: Vec<Point>,
    pub touches_bbox: bool,
    pub level_tol: f64,
    pub singleton_tol: f64,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub(crate) omega: Vec<bool>,
}

impl DomainChart {
    pub fn component(&self, id: usize) -> Result<&BoundaryComponent, GeometryError> {
        self.components.get(id).ok_or(GeometryError::UnknownComponent(id))
    }

    pub fn bbox(&self) -> &BBox {
        &self.grid.bbox
    }

    /// Snap radius for "endpoint at a critical point": `1e-4 × bbox diagonal`.
    pub fn critpoint_snap(&self) -> f64 {
        1e-4 * self.grid.bbox.diag()
    }

    /// Whether grid node `(i, j)` belongs to `Ω`.
    pub fn omega_node(&self, i: usize, j: usize) -> bool {
        self.omega.get(j * (self.grid.resolution[0] + 1) + i).copied().unwrap_or(false)
    }

    /// Cells with at least one corner in `Ω`.
    pub fn omega_cells(&self) -> Vec<(usize, usize)> {
        let [nx, ny] = self.grid.resolution;
        let mut out = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                if self.omega_node(i, j) || self.omega_node(i + 1, j) || self.omega_node(i, j + 1) || self.omega_node(i + 1, j + 1) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Locations of the critical points attached to component `id`.
    pub fn attached_points(&self, id: usize) -> Vec<&CriticalPoint> {
        self.components.get(id).map(|c| c.critical_points.iter().map(|&k| &self.critical_points[k]).collect()).unwrap_or_default()
    }

    /// Attached critical points on every component, with their host id.
    pub fn all_attached(&self) -> Vec<(usize, &CriticalPoint)> {
        self.components.iter().flat_map(|c| c.critical_points.iter().map(move |&k| (c.id, &self.critical_points[k]))).collect()
    }

    /// Component whose polyline is closest to `x`.
    pub fn nearest_component(&self, x: &[f64]) -> Option<(usize, f64)> {
        self.components.iter().map(|c| (c.id, c.nearest_point(x).1)).min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chart serializes")
    }

    /// Order components by centroid (x first) and renumber them.
    fn canonicalize(&mut self) {
        let centroid = |c: &BoundaryComponent| -> (f64, f64) {
            let m = c.polyline.len().max(1) as f64;
            (c.polyline.iter().map(|p| p[0]).sum::<f64>() / m, c.polyline.iter().map(|p| p[1]).sum::<f64>() / m)
        };
        self.components.sort_by(|a, b| {
            let (ca, cb) = (centroid(a), centroid(b));
            ca.0.total_cmp(&cb.0).then(ca.1.total_cmp(&cb.1))
        });
        for (id, c) in self.components.iter_mut().enumerate() {
            c.id = id;
        }
        self.recompute_gaps();
    }

    fn recompute_gaps(&mut self) {
        let n = self.components.len();
        let mut g = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = polyline_gap(&self.components[i].polyline, &self.components[j].polyline);
                g[i][j] = d;
                g[j][i] = d;
            }
        }
        self.gap_matrix = g;
    }
}

/// Refine the zero crossing on the segment `a → b` (values of opposite
/// sign) by Illinois-modified regula falsi until `|V| < level_tol`.
fn edge_crossing(v: &ShiftedPotential, a: &[f64], fa: f64, b: &[f64], fb: f64, level_tol: f64) -> Point {
    let at = |s: f64| -> Point { a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect() };
    if fa == 0.0 {
        return a.to_vec();
    }
    if fb == 0.0 {
        return b.to_vec();
    }
    let (mut s0, mut f0, mut s1, mut f1) = (0.0, fa, 1.0, fb);
    let mut side = 0i8;
    let mut best = (0.5, f64::INFINITY);
    for _ in 0..200 {
        let s = if (f1 - f0).abs() > 0.0 { (s0 * f1 - s1 * f0) / (f1 - f0) } else { 0.5 * (s0 + s1) };
        let s = if s.is_finite() && s > s0.min(s1) && s < s0.max(s1) { s } else { 0.5 * (s0 + s1) };
        let f = v.value(&at(s));
        if f.abs() < best.1 {
            best = (s, f.abs());
        }
        if f.abs() < level_tol || (s1 - s0).abs() < 1e-16 {
            return at(s);
        }
        if (f > 0.0) == (f0 > 0.0) {
            s0 = s;
            f0 = f;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        } else {
            s1 = s;
            f1 = f;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        }
    }
    at(best.0)
}

#[derive(Clone, Copy)]
struct Segment {
    a: usize,
    b: usize,
}

struct Chain {
    points: Vec<Point>,
    closed: bool,
}

/// Trace `∂Ω` with marching squares and stitch it into chains.
fn trace_boundary(v: &ShiftedPotential, grid: &SignGrid, omega: &[bool], level_tol: f64) -> Vec<Chain> {
    let (nx, ny) = (grid.nx(), grid.ny());
    let [hx, hy] = grid.spec.spacing();
    let h_edge = |i: usize, j: usize| 2 * grid.idx(i, j);
    let v_edge = |i: usize, j: usize| 2 * grid.idx(i, j) + 1;
    let edge_nodes = |e: usize| -> (usize, usize) {
        let k = e / 2;
        let (i, j) = grid.coords(k);
        if e.is_multiple_of(2) {
            (k, grid.idx(i + 1, j))
        } else {
            (k, grid.idx(i, j + 1))
        }
    };
    let pos = |k: usize| grid.values[k] > 0.0;
    let positive_end = |e: usize| {
        let (p, q) = edge_nodes(e);
        if pos(p) {
            p
        } else {
            q
        }
    };

    let mut segments: Vec<Segment> = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let c = [grid.idx(i, j), grid.idx(i + 1, j), grid.idx(i + 1, j + 1), grid.idx(i, j + 1)];
            let s: [bool; 4] = [pos(c[0]), pos(c[1]), pos(c[2]), pos(c[3])];
            // bottom, right, top, left
            let edges = [h_edge(i, j), v_edge(i + 1, j), h_edge(i, j + 1), v_edge(i, j)];
            let crosses = [s[0] != s[1], s[1] != s[2], s[3] != s[2], s[0] != s[3]];
            let crossing: Vec<usize> = (0..4).filter(|&e| crosses[e]).collect();
            let mut cell_segs: Vec<(usize, usize)> = Vec::new();
            match crossing.len() {
                2 => cell_segs.push((edges[crossing[0]], edges[crossing[1]])),
                4 => {
                    let center = [grid.spec.bbox.lo[0] + (i as f64 + 0.5) * hx, grid.spec.bbox.lo[1] + (j as f64 + 0.5) * hy];
                    let center_pos = v.value(&center) > 0.0;
                    if center_pos == s[0] {
                        // c0 and c2 joined through the centre: isolate c1 and c3
                        cell_segs.push((edges[0], edges[1]));
                        cell_segs.push((edges[2], edges[3]));
                    } else {
                        cell_segs.push((edges[0], edges[3]));
                        cell_segs.push((edges[1], edges[2]));
                    }
                }
                _ => {}
            }
            for (ea, eb) in cell_segs {
                if omega[positive_end(ea)] && omega[positive_end(eb)] {
                    segments.push(Segment { a: ea, b: eb });
                }
            }
        }
    }

    let mut crossing_cache: HashMap<usize, Point> = HashMap::new();
    let mut crossing = |e: usize| -> Point {
        crossing_cache
            .entry(e)
            .or_insert_with(|| {
                let (p, q) = edge_nodes(e);
                let (pi, pj) = grid.coords(p);
                let (qi, qj) = grid.coords(q);
                edge_crossing(v, &grid.node(pi, pj), grid.values[p], &grid.node(qi, qj), grid.values[q], level_tol)
            })
            .clone()
    };

    let mut by_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, s) in segments.iter().enumerate() {
        by_edge.entry(s.a).or_default().push(k);
        by_edge.entry(s.b).or_default().push(k);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();
    // deterministic order: segments are generated in row-major cell order
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let mut edges_fwd = vec![segments[start].a, segments[start].b];
        let mut closed = false;
        // forward
        let mut cur_seg = start;
        let mut cur_edge = segments[start].b;
        loop {
            let next = by_edge[&cur_edge].iter().copied().find(|&k| k != cur_seg);
            match next {
                Some(k) if k == start => {
                    closed = true;
                    break;
                }
                Some(k) if !used[k] => {
                    used[k] = true;
                    let s = segments[k];
                    cur_edge = if s.a == cur_edge { s.b } else { s.a };
                    cur_seg = k;
                    edges_fwd.push(cur_edge);
                }
                _ => break,
            }
        }
        if !closed {
            let mut cur_seg = start;
            let mut cur_edge = segments[start].a;
            let mut back = Vec::new();
            loop {
                let next = by_edge[&cur_edge].iter().copied().find(|&k| k != cur_seg);
                match next {
                    Some(k) if !used[k] => {
                        used[k] = true;
                        let s = segments[k];
                        cur_edge = if s.a == cur_edge { s.b } else { s.a };
                        cur_seg = k;
                        back.push(cur_edge);
                    }
                    _ => break,
                }
            }
            back.reverse();
            back.extend(edges_fwd);
            edges_fwd = back;
        }
        let mut points: Vec<Point> = edges_fwd.iter().map(|&e| crossing(e)).collect();
        if closed {
            // the walk stopped before re-adding the start edge
            if edges_fwd.first() != edges_fwd.last() {
                points.push(points[0].clone());
            }
        }
        chains.push(Chain { points, closed });
    }
    chains
}

/// Close open chains through the pinch points they end at.
fn join_at_pinches(v: &ShiftedPotential, mut chains: Vec<Chain>, pinches: &[Point], join_radius: f64) -> Vec<Chain> {
    for (pk, p) in pinches.iter().enumerate() {
        // collect (chain, at_end) whose open end is near p
        let mut ends: Vec<(usize, bool)> = Vec::new();
        for (ci, c) in chains.iter().enumerate() {
            if c.closed || c.points.is_empty() {
                continue;
            }
            if dist(&c.points[0], p) <= join_radius {
                ends.push((ci, false));
            }
            if dist(c.points.last().unwrap(), p) <= join_radius {
                ends.push((ci, true));
            }
        }
        if ends.len() < 2 {
            if !ends.is_empty() {
                log::warn!("pinch point {pk} at {p:?} has a single boundary arc");
            }
            continue;
        }
        let end_point = |&(ci, at_end): &(usize, bool)| -> Point {
            let c = &chains[ci];
            if at_end {
                c.points.last().unwrap().clone()
            } else {
                c.points[0].clone()
            }
        };
        let angle = |e: &(usize, bool)| {
            let q = end_point(e);
            (q[1] - p[1]).atan2(q[0] - p[0])
        };
        ends.sort_by(|a, b| angle(a).total_cmp(&angle(b)));
        let m = ends.len();
        let pairs: Vec<((usize, bool), (usize, bool))> = if m == 2 {
            vec![(ends[0], ends[1])]
        } else {
            // pair neighbours so that the wedge between paired arcs is positive
            let wedge_positive = |a: &(usize, bool), b: &(usize, bool)| {
                let (ta, mut tb) = (angle(a), angle(b));
                if tb < ta {
                    tb += std::f64::consts::TAU;
                }
                let mid = 0.5 * (ta + tb);
                let r = 0.5 * join_radius;
                v.value(&[p[0] + r * mid.cos(), p[1] + r * mid.sin()]) > 0.0
            };
            let offset = if wedge_positive(&ends[0], &ends[1]) { 0 } else { 1 };
            (0..m / 2).map(|k| (ends[(2 * k + offset) % m], ends[(2 * k + 1 + offset) % m])).collect()
        };
        for ((ca, ea), (cb, eb)) in pairs {
            if ca == cb {
                let c = &mut chains[ca];
                c.points.push(p.clone());
                c.points.insert(0, p.clone());
                c.points.dedup();
                if c.points.first() != c.points.last() {
                    c.points.push(c.points[0].clone());
                }
                c.closed = true;
                continue;
            }
            let mut a = std::mem::take(&mut chains[ca].points);
            let mut b = std::mem::take(&mut chains[cb].points);
            if !ea {
                a.reverse();
            }
            if eb {
                b.reverse();
            }
            a.push(p.clone());
            a.extend(b);
            chains[ca].points = a;
            chains[cb].closed = false;
            // mark the absorbed chain empty; it is dropped below
        }
        chains.retain(|c| !c.points.is_empty());
    }
    chains
}

/// Extract the component of `{V > 0}` containing `seed` and its boundary.
///
/// `critical` are the critical points of `V` (may be empty); zero-level
/// saddles among them pinch `Ω`.
pub fn extract_domain(
    v: &ShiftedPotential,
    seed: &[f64],
    spec: &GridSpec,
    critical: &[CriticalPoint],
) -> Result<DomainChart, GeometryError> {
    let level_tol = DEFAULT_LEVEL_TOL;
    if v.dim() != 2 {
        return Err(GeometryError::NotPlanar(v.dim()));
    }
    let vs = v.value(seed);
    if !(vs > 0.0) {
        return Err(GeometryError::SeedNotPositive { seed: seed.to_vec(), value: vs });
    }
    let grid = SignGrid::sample(v, spec)?;
    let pinches = pinch_points(critical, level_tol);
    let mask = flood_omega(v, &grid, seed, &pinches)?;
    let chains = trace_boundary(v, &grid, &mask.inside, level_tol);
    let join_radius = pinch_radius(spec) + 2.0 * spec.cell_diag();
    let chains = join_at_pinches(v, chains, &pinches, join_radius);

    let mut warnings = Vec::new();
    if mask.touches_bbox {
        let w = "positivity domain touches the bounding box; coercivity is assumed outside it".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }
    let components: Vec<BoundaryComponent> = chains
        .into_iter()
        .filter(|c| c.points.len() >= 2)
        .enumerate()
        .map(|(id, c)| BoundaryComponent {
            id,
            diameter: diameter(&c.points),
            closed: c.closed,
            polyline: c.points,
            critical_points: Vec::new(),
            is_singleton: false,
        })
        .collect();
    let mut chart = DomainChart {
        grid: spec.clone(),
        seed: seed.to_vec(),
        components,
        gap_matrix: Vec::new(),
        critical_points: Vec::new(),
        pinches,
        touches_bbox: mask.touches_bbox,
        level_tol,
        singleton_tol: 2.0 * spec.cell_diag(),
        warnings,
        omega: mask.inside,
    };
    chart.canonicalize();
    Ok(chart)
}

/// Attach zero-level critical points to the components they lie on.
///
/// A zero-level local minimum of `V` (an isolated zero, surrounded by `Ω`)
/// that is not near any polyline becomes a singleton component.
pub fn attach_critical_points(mut chart: DomainChart, points: &[CriticalPoint], tol: f64) -> DomainChart {
    chart.critical_points = points.to_vec();
    for c in &mut chart.components {
        c.critical_points.clear();
    }
    let [hx, hy] = chart.grid.spacing();
    for (k, cp) in points.iter().enumerate() {
        if cp.potential_value.abs() >= chart.level_tol.max(f64::MIN_POSITIVE) && cp.potential_value != 0.0 {
            continue;
        }
        if let Some((id, d)) = chart.nearest_component(&cp.location).filter(|&(_, d)| d < tol) {
            let _ = d;
            chart.components[id].critical_points.push(k);
            continue;
        }
        let near_omega = {
            let x = &cp.location;
            chart.bbox().contains(x) && {
                let i = ((x[0] - chart.grid.bbox.lo[0]) / hx).floor().max(0.0) as usize;
                let j = ((x[1] - chart.grid.bbox.lo[1]) / hy).floor().max(0.0) as usize;
                (0..=1).any(|di| (0..=1).any(|dj| chart.omega_node(i + di, j + dj)))
            }
        };
        if cp.is_local_min() && near_omega {
            let id = chart.components.len();
            chart.components.push(BoundaryComponent {
                id,
                polyline: vec![cp.location.clone(), cp.location.clone()],
                closed: true,
                diameter: 0.0,
                critical_points: vec![k],
                is_singleton: true,
            });
        } else {
            let w =
                format!("critical point at {:?} lies on the zero level but not near any boundary polyline (grid too coarse?)", cp.location);
            log::warn!("{w}");
            chart.warnings.push(w);
        }
    }
    let singleton_tol = chart.singleton_tol;
    for c in &mut chart.components {
        c.is_singleton = c.diameter < singleton_tol && c.critical_points.len() == 1;
        if c.is_singleton {
            // a collapsed chain is the critical point itself
            let p = points[c.critical_points[0]].location.clone();
            c.polyline = vec![p.clone(), p];
            c.diameter = 0.0;
        }
    }
    chart.canonicalize();
    chart
}

/// Newton iteration along `∇V` onto `{V = 0}`.
pub fn project_to_boundary(v: &ShiftedPotential, x: &[f64], level_tol: f64, max_iter: usize) -> Result<Point, GeometryError> {
    let mut y = x.to_vec();
    let mut g = vec![0.0; y.len()];
    let mut f = v.value(&y);
    for _ in 0..max_iter {
        if f.abs() < level_tol {
            return Ok(y);
        }
        v.gradient_into(&y, &mut g);
        let g2: f64 = g.iter().map(|a| a * a).sum();
        if !(g2 > 0.0) || !g2.is_finite() {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let cand: Point = y.iter().zip(&g).map(|(a, b)| a - t * f * b / g2).collect();
            let fc = v.value(&cand);
            if fc.is_finite() && fc.abs() < f.abs() {
                y = cand;
                f = fc;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if f.abs() < level_tol {
        return Ok(y);
    }
    Err(GeometryError::ProjectionFailed { start: x.to_vec(), residual: f.abs() })
}

/// Triangle-inequality gate: an orbit between components `i` and `j` is
/// guaranteed when `d_ij < d_ik + d_kj` for every other `k`.
pub fn connection_gate(d: &[Vec<f64>], i: usize, j: usize) -> bool {
    (0..d.len()).filter(|&k| k != i && k != j).all(|k| d[i][j] < d[i][k] + d[k][j])
}

/// Unit inward normal `∇V/|∇V|` (zero where the gradient vanishes).
pub fn inward_normal(v: &ShiftedPotential, x: &[f64]) -> Point {
    let g = v.gradient(x);
    let n = norm(&g);
    if n > 0.0 && n.is_finite() {
        g.iter().map(|a| a / n).collect()
    } else {
        vec![0.0; x.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::potential::{find_critical_points, shift, CriticalPointOptions, Potential};

    fn disk() -> ShiftedPotential {
        shift(&Potential::builtin("disk", &Params::new()).unwrap(), 0.0)
    }

    #[test]
    fn disk_chart_is_unit_circle() {
        let spec = GridSpec::new(BBox::planar(-1.5, 1.5, -1.5, 1.5), 64, 64);
        let chart = extract_domain(&disk(), &[0.0, 0.0], &spec, &[]).unwrap();
        assert_eq!(chart.components.len(), 1);
        let c = &chart.components[0];
        assert!(c.closed);
        assert_eq!(c.polyline.first(), c.polyline.last());
        assert!((c.diameter - 2.0).abs() < spec.cell_diag(), "{}", c.diameter);
        for p in &c.polyline {
            assert!((norm(p) - 1.0).abs() < 1e-9);
            assert!(disk().value(p).abs() < 1e-10);
        }
        assert!(!chart.touches_bbox);
        assert_eq!(chart.gap_matrix, vec![vec![0.0]]);
    }

    #[test]
    fn seed_outside_is_rejected() {
        let spec = GridSpec::new(BBox::planar(-1.5, 1.5, -1.5, 1.5), 16, 16);
        assert!(matches!(extract_domain(&disk(), &[1.2, 0.0], &spec, &[]), Err(GeometryError::SeedNotPositive { .. })));
        assert!(matches!(
            extract_domain(&disk(), &[0.0, 0.0], &GridSpec::new(spec.bbox.clone(), 4, 16), &[]),
            Err(GeometryError::Resolution(_))
        ));
    }

    #[test]
    fn ex2_is_pinched_into_one_component_through_the_saddles() {
        let v = shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5);
        let bbox = BBox::planar(-1.5, 1.5, -1.0, 1.0);
        let cps = find_critical_points(&v, &bbox, &CriticalPointOptions::default()).unwrap();
        let spec = GridSpec::new(bbox, 128, 128);
        let chart = extract_domain(&v, &[0.0, 0.0], &spec, &cps).unwrap();
        assert_eq!(chart.pinches.len(), 4);
        assert_eq!(chart.components.len(), 1, "{:?}", chart.components.iter().map(|c| c.polyline.len()).collect::<Vec<_>>());
        assert!(chart.components[0].closed);
        assert!(!chart.touches_bbox);
        let chart = attach_critical_points(chart, &cps, 2.0 * spec.cell_diag());
        assert_eq!(chart.components[0].critical_points.len(), 4);
        assert!(!chart.components[0].is_singleton);
        assert!((chart.components[0].diameter - 2.0).abs() < 1e-9);
    }

    #[test]
    fn projection_examples() {
        let p = project_to_boundary(&disk(), &[0.5, 0.0], 1e-10, 100).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-10 && p[1].abs() < 1e-15);
        let p = project_to_boundary(&disk(), &[0.3, 0.4], 1e-10, 100).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-10 && (p[1] - 0.8).abs() < 1e-10);
        let v = shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5);
        let p = project_to_boundary(&v, &[0.9, 0.0], 1e-10, 200).unwrap();
        assert!(v.value(&p).abs() < 1e-10);
        assert!(p[0] > 0.9 && p[0] <= 1.0 && p[1] == 0.0);
        // flat potential cannot be projected
        let flat = shift(&Potential::from_expr("0.5", &Params::new(), Some(2)).unwrap(), 0.0);
        assert!(matches!(project_to_boundary(&flat, &[0.0, 0.0], 1e-10, 50), Err(GeometryError::ProjectionFailed { .. })));
    }

    #[test]
    fn gate_examples() {
        let d2 = vec![vec![0.0, 5.0], vec![5.0, 0.0]];
        assert!(connection_gate(&d2, 0, 1));
        let d = vec![vec![0.0, 1.0, 3.0], vec![1.0, 0.0, 1.0], vec![3.0, 1.0, 0.0]];
        assert!(!connection_gate(&d, 0, 2));
        assert!(connection_gate(&d, 0, 1));
    }

    #[test]
    fn attach_with_no_points_leaves_chart() {
        let spec = GridSpec::new(BBox::planar(-1.5, 1.5, -1.5, 1.5), 32, 32);
        let chart = extract_domain(&disk(), &[0.0, 0.0], &spec, &[]).unwrap();
        let before = chart.components.clone();
        let chart = attach_critical_points(chart, &[], 0.1);
        assert_eq!(chart.components, before);
        assert!(chart.components.iter().all(|c| !c.is_singleton));
    }
}
