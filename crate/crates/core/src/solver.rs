//! Minimization of the discrete Jacobi length over paths with free ends on
//! boundary components, and a Dijkstra grid-geodesic cross-check.
//!
//! Descent runs through a schedule of regularized functionals
//! `J_ε = Σ √2 √(W_k + ε²) |Δx_k|` ending at `ε = 0`. Interior gradients are
//! stripped of their tangential part and smoothed by a discrete Sobolev
//! (`I + βΔ`) preconditioner; node spacing is controlled by periodic
//! remeshing instead.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::{jacobi, jacobi_nodes, DiscretePath, EndpointMode, FunctionalError};
use crate::geometry::{flood_omega, project_to_boundary, DomainChart, GeometryError, GridSpec, SignGrid};
use crate::linalg::{dist, dot, norm, solve_tridiagonal};
use crate::potential::ShiftedPotential;
use crate::space::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("connecting solve needs at least two boundary components, chart has {0}")]
    TooFewComponents(usize),
    #[error("the origin is not inside the positive set (V(0) = {0})")]
    OriginOutside(f64),
    #[error("no feasible seed path from component {source_id} to {target}")]
    NoSeed { source_id: String, target: usize },
    #[error("every target failed: {0}")]
    AllFailed(String),
    #[error("grid oracle found no path between the terminals")]
    OracleDisconnected,
}

/// Tuning of the path descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    /// Number of segments `M`.
    pub nodes: usize,
    /// `ε²` as fractions of `max V` on the seed path, decreasing to 0.
    pub eps_schedule: Vec<f64>,
    pub max_iters: usize,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub remesh_every: usize,
    /// Relative decrease of `J_ε` per iteration regarded as stalled.
    pub convergence_tol: f64,
    pub multistart: usize,
    pub seed: u64,
    /// Sobolev smoothing length as a fraction of the node count.
    pub smoothing: f64,
    /// Minimum number of nodes kept in each 5 % end tail by remeshing.
    pub tail_floor: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            nodes: 128,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 0.0],
            max_iters: 600,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 40,
            remesh_every: 25,
            convergence_tol: 1e-10,
            multistart: 4,
            seed: 0,
            smoothing: 0.08,
            tail_floor: 5,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.nodes < 16 {
            return Err(SolverError::Config(format!("node count must be at least 16, got {}", self.nodes)));
        }
        if self.eps_schedule.is_empty() {
            return Err(SolverError::Config("empty eps schedule".into()));
        }
        if self.eps_schedule.windows(2).any(|w| w[1] > w[0]) || self.eps_schedule.iter().any(|e| *e < 0.0 || !e.is_finite()) {
            return Err(SolverError::Config("eps schedule must be non-negative and decreasing".into()));
        }
        if *self.eps_schedule.last().unwrap() > 1e-8 {
            return Err(SolverError::Config("eps schedule must end at 0 or below 1e-8".into()));
        }
        if self.multistart == 0 || self.max_iters == 0 || self.remesh_every == 0 {
            return Err(SolverError::Config("multistart, max_iters and remesh_every must be positive".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) || !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(SolverError::Config("line search parameters must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Outcome of one path minimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub path: DiscretePath,
    /// Discrete Jacobi length of `path`.
    pub jacobi_value: f64,
    /// `None` when the path starts at the origin.
    pub source_component: Option<usize>,
    pub target_component: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Jacobi length at the end of each stage.
    pub history: Vec<f64>,
    /// Index into the chart's critical points if the start was snapped/pinned to one.
    pub start_critical: Option<usize>,
    pub end_critical: Option<usize>,
    /// Multistart index that produced this result.
    pub start_index: usize,
    /// Some node lies outside the chart's bounding box, where coercivity
    /// of `U` is only assumed.
    pub leaves_bbox: bool,
}

impl SolveResult {
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("result serializes")
    }
}

/// Best connecting orbit plus the per-target minima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectingOutcome {
    pub best: SolveResult,
    /// `(target, best result for that target)`; `None` when every start failed.
    pub per_target: Vec<(usize, Option<SolveResult>)>,
    /// Row `source` of the Jacobi distance matrix (`∞` on failure, 0 on the diagonal).
    pub distance_row: Vec<f64>,
}

#[derive(Debug, Clone)]
struct End {
    point: Point,
    mode: EndpointMode,
    pinned: bool,
    component: Option<usize>,
    critical: Option<usize>,
}

fn singleton_point(chart: &DomainChart, id: usize) -> Option<(Point, usize)> {
    let c = &chart.components[id];
    if c.is_singleton {
        let k = c.critical_points[0];
        Some((chart.critical_points[k].location.clone(), k))
    } else {
        None
    }
}

fn component_end(chart: &DomainChart, id: usize, toward: &[f64]) -> End {
    match singleton_point(chart, id) {
        Some((p, k)) => End { point: p, mode: EndpointMode::OnBoundary(id), pinned: true, component: Some(id), critical: Some(k) },
        None => {
            let (p, _) = chart.components[id].nearest_point(toward);
            End { point: p, mode: EndpointMode::OnBoundary(id), pinned: false, component: Some(id), critical: None }
        }
    }
}

/// Closest pair of points between two components.
fn closest_pair(chart: &DomainChart, i: usize, j: usize) -> (Point, Point) {
    let (ci, cj) = (&chart.components[i], &chart.components[j]);
    let mut best = (ci.polyline[0].clone(), cj.polyline[0].clone(), f64::INFINITY);
    for p in &ci.polyline {
        let (q, d) = cj.nearest_point(p);
        if d < best.2 {
            best = (p.clone(), q, d);
        }
    }
    // refine the first end against the chosen point of the second
    let (p, _) = ci.nearest_point(&best.1);
    (p, best.1)
}

/// Moves `x` along `∇V` until `V(x) ≥ level`.
fn nudge_inside(v: &ShiftedPotential, x: &[f64], level: f64) -> Option<Point> {
    let mut y = x.to_vec();
    for _ in 0..50 {
        let f = v.value(&y) - level;
        if f >= 0.0 {
            return Some(y);
        }
        let g = v.gradient(&y);
        let g2 = dot(&g, &g);
        if !(g2 > 0.0) {
            return None;
        }
        let step = (-f / g2) * 1.5;
        for (a, b) in y.iter_mut().zip(&g) {
            *a += step * b;
        }
    }
    (v.value(&y) >= level).then_some(y)
}

/// Straight seed between two ends, with interior nodes pushed into `Ω`.
pub fn seed_path(
    v: &ShiftedPotential,
    a: &[f64],
    start: EndpointMode,
    b: &[f64],
    end: EndpointMode,
    m: usize,
) -> Result<DiscretePath, SolverError> {
    let mut path = DiscretePath::straight(a, b, m, start, end)?;
    let vmax = path.nodes.iter().map(|x| v.value(x)).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    let n = path.nodes.len();
    for k in 1..n - 1 {
        if !(v.value(&path.nodes[k]) > 0.0) {
            path.nodes[k] = nudge_inside(v, &path.nodes[k], 1e-6 * vmax)
                .ok_or_else(|| SolverError::Config(format!("seed node {k} cannot be moved into the positive set")))?;
        }
    }
    Ok(DiscretePath::new(path.nodes, start, end)?)
}

/// Seed between the closest points of two components.
pub fn seed_between_components(
    v: &ShiftedPotential,
    chart: &DomainChart,
    source: usize,
    target: usize,
    m: usize,
) -> Result<DiscretePath, SolverError> {
    if source == target {
        return Err(SolverError::Config("source and target must differ".into()));
    }
    chart.component(source)?;
    chart.component(target)?;
    let (a, b) = closest_pair(chart, source, target);
    seed_path(v, &a, EndpointMode::OnBoundary(source), &b, EndpointMode::OnBoundary(target), m)
}

// ---------------------------------------------------------------------------
// descent

struct Descent<'a> {
    v: &'a ShiftedPotential,
    chart: &'a DomainChart,
    cfg: &'a SolveConfig,
    start: End,
    end: End,
}

fn j_eps(v: &ShiftedPotential, nodes: &[Point], eps2: f64) -> f64 {
    if eps2 == 0.0 {
        return jacobi_nodes(nodes, v);
    }
    nodes
        .windows(2)
        .map(|w| {
            let m: Point = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let wv = v.value(&m).max(0.0);
            std::f64::consts::SQRT_2 * (wv + eps2).sqrt() * dist(&w[0], &w[1])
        })
        .sum()
}

fn grad_eps(v: &ShiftedPotential, nodes: &[Point], eps2: f64) -> Vec<Point> {
    let n = nodes.len();
    let d = nodes[0].len();
    let mut g = vec![vec![0.0; d]; n];
    let mut gv = vec![0.0; d];
    for k in 0..n - 1 {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        let m: Point = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
        let vm = v.value(&m);
        let w = vm.max(0.0);
        let s = (w + eps2).sqrt();
        let l = dist(a, b);
        if l == 0.0 {
            continue;
        }
        let grad_w = vm > 0.0 && s > 0.0;
        if grad_w {
            v.gradient_into(&m, &mut gv);
        }
        for i in 0..d {
            let len_term = s * (a[i] - b[i]) / l;
            let pot_term = if grad_w { l * 0.25 * gv[i] / s } else { 0.0 };
            g[k][i] += std::f64::consts::SQRT_2 * (len_term + pot_term);
            g[k + 1][i] += std::f64::consts::SQRT_2 * (-len_term + pot_term);
        }
    }
    g
}

impl Descent<'_> {
    fn project_end(&self, e: &End, x: &[f64]) -> Option<Point> {
        if e.pinned {
            return Some(e.point.clone());
        }
        match e.mode {
            EndpointMode::OnBoundary(id) => {
                let p = project_to_boundary(self.v, x, self.chart.level_tol, 60).ok()?;
                // must stay on the same component
                match self.chart.nearest_component(&p) {
                    Some((c, _)) if c == id => Some(p),
                    _ => None,
                }
            }
            _ => Some(e.point.clone()),
        }
    }

    fn direction(&self, nodes: &[Point], g: &[Point]) -> Vec<Point> {
        let n = nodes.len();
        let d = nodes[0].len();
        let mut gp: Vec<Point> = g.to_vec();
        // interior: keep the normal part only
        for k in 1..n - 1 {
            let tau: Point = nodes[k + 1].iter().zip(&nodes[k - 1]).map(|(a, b)| a - b).collect();
            let tn = norm(&tau);
            if tn > 0.0 {
                let c = dot(&gp[k], &tau) / (tn * tn);
                for i in 0..d {
                    gp[k][i] -= c * tau[i];
                }
            }
        }
        // free ends: tangent to the level set
        for (k, e) in [(0usize, &self.start), (n - 1, &self.end)] {
            if e.pinned || !matches!(e.mode, EndpointMode::OnBoundary(_)) {
                gp[k] = vec![0.0; d];
            } else {
                let nv = self.v.gradient(&nodes[k]);
                let nn = dot(&nv, &nv);
                if nn > 0.0 {
                    let c = dot(&gp[k], &nv) / nn;
                    for i in 0..d {
                        gp[k][i] -= c * nv[i];
                    }
                }
            }
        }
        let pinned0 = self.start.pinned || !matches!(self.start.mode, EndpointMode::OnBoundary(_));
        let pinned1 = self.end.pinned || !matches!(self.end.mode, EndpointMode::OnBoundary(_));
        let beta = (self.cfg.smoothing * n as f64).powi(2);
        let mut diag = vec![1.0 + 2.0 * beta; n];
        let mut off = vec![-beta; n - 1];
        diag[0] = 1.0 + beta;
        diag[n - 1] = 1.0 + beta;
        if pinned0 {
            diag[0] = 1.0;
            off[0] = 0.0;
            diag[1] = 1.0 + 2.0 * beta;
        }
        if pinned1 {
            diag[n - 1] = 1.0;
            off[n - 2] = 0.0;
            diag[n - 2] = 1.0 + 2.0 * beta;
        }
        let mut dir = vec![vec![0.0; d]; n];
        for i in 0..d {
            let mut rhs: Vec<f64> = gp.iter().map(|x| x[i]).collect();
            solve_tridiagonal(&diag, &off, &mut rhs);
            for k in 0..n {
                dir[k][i] = rhs[k];
            }
        }
        if pinned0 {
            dir[0] = vec![0.0; d];
        }
        if pinned1 {
            dir[n - 1] = vec![0.0; d];
        }
        let descent: f64 = dir.iter().zip(g).map(|(a, b)| dot(a, b)).sum();
        if descent > 0.0 {
            dir
        } else {
            gp
        }
    }

    fn feasible(&self, nodes: &[Point]) -> bool {
        nodes[1..nodes.len() - 1].iter().all(|x| self.v.value(x) > 0.0)
    }

    /// Redistributes nodes by blended Jacobi/Euclidean arclength.
    fn remesh(&self, nodes: &[Point], eps2: f64) -> Vec<Point> {
        let n = nodes.len();
        let lens: Vec<f64> = nodes.windows(2).map(|w| dist(&w[0], &w[1])).collect();
        let jw: Vec<f64> = nodes
            .windows(2)
            .zip(&lens)
            .map(|(w, l)| {
                let m: Point = w[0].iter().zip(&w[1]).map(|(a, b)| 0.5 * (a + b)).collect();
                (self.v.value(&m).max(0.0) + eps2).sqrt() * l
            })
            .collect();
        let (ltot, jtot): (f64, f64) = (lens.iter().sum(), jw.iter().sum());
        if !(ltot > 0.0) {
            return nodes.to_vec();
        }
        let m = n - 1;
        let tail = 0.05 * ltot;
        let mut out = nodes.to_vec();
        for theta in [0.5, 0.7, 0.9, 1.0] {
            let w: Vec<f64> = lens
                .iter()
                .zip(&jw)
                .map(|(l, j)| theta * l / ltot + if jtot > 0.0 { (1.0 - theta) * j / jtot } else { (1.0 - theta) * l / ltot })
                .collect();
            let mut cum = vec![0.0; n];
            for k in 0..m {
                cum[k + 1] = cum[k] + w[k];
            }
            let total = cum[m];
            let mut res = Vec::with_capacity(n);
            res.push(nodes[0].clone());
            let mut seg = 0;
            for q in 1..m {
                let target = total * q as f64 / m as f64;
                while seg < m - 1 && cum[seg + 1] < target {
                    seg += 1;
                }
                let f = if w[seg] > 0.0 { ((target - cum[seg]) / w[seg]).clamp(0.0, 1.0) } else { 0.0 };
                res.push(nodes[seg].iter().zip(&nodes[seg + 1]).map(|(a, b)| a + f * (b - a)).collect());
            }
            res.push(nodes[m].clone());
            let count_near = |end: &Point| res.iter().filter(|x| dist(x, end) <= tail).count();
            let enough = count_near(&nodes[0]) >= self.cfg.tail_floor && count_near(&nodes[m]) >= self.cfg.tail_floor;
            out = res;
            if enough {
                break;
            }
        }
        if out.windows(2).any(|w| w[0] == w[1]) || !self.feasible(&out) {
            return nodes.to_vec();
        }
        out
    }

    fn run(&self, path0: &DiscretePath) -> Result<(Vec<Point>, bool, usize, Vec<f64>), SolverError> {
        let cfg = self.cfg;
        let mut nodes = path0.nodes.clone();
        let n = nodes.len();
        nodes[0] = self.start.point.clone();
        nodes[n - 1] = self.end.point.clone();
        let vmax = nodes.iter().map(|x| self.v.value(x)).fold(0.0f64, f64::max);
        let mut history = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        let typical = nodes.windows(2).map(|w| dist(&w[0], &w[1])).sum::<f64>() / (n - 1) as f64;
        for &frac in &cfg.eps_schedule {
            let eps2 = frac * vmax;
            let mut jcur = j_eps(self.v, &nodes, eps2);
            let mut t = f64::NAN;
            let mut stalls = 0;
            converged = false;
            for it in 0..cfg.max_iters {
                iterations += 1;
                if it > 0 && it % cfg.remesh_every == 0 {
                    nodes = self.remesh(&nodes, eps2);
                    jcur = j_eps(self.v, &nodes, eps2);
                }
                let g = grad_eps(self.v, &nodes, eps2);
                let dir = self.direction(&nodes, &g);
                let slope: f64 = dir.iter().zip(&g).map(|(a, b)| dot(a, b)).sum();
                let dmax = dir.iter().map(|x| norm(x)).fold(0.0f64, f64::max);
                if !(slope > 0.0) || !(dmax > 0.0) {
                    converged = true;
                    break;
                }
                let cap = 2.0 * typical / dmax;
                if !t.is_finite() {
                    t = 0.1 * typical / dmax;
                }
                t = (2.0 * t).min(cap);
                let mut accepted = None;
                for _ in 0..cfg.max_backtracks {
                    let mut cand: Vec<Point> =
                        nodes.iter().zip(&dir).map(|(x, d)| x.iter().zip(d).map(|(a, b)| a - t * b).collect()).collect();
                    let ok_ends = match (self.project_end(&self.start, &cand[0]), self.project_end(&self.end, &cand[n - 1])) {
                        (Some(p), Some(q)) => {
                            cand[0] = p;
                            cand[n - 1] = q;
                            true
                        }
                        _ => false,
                    };
                    if ok_ends && self.feasible(&cand) {
                        let jc = j_eps(self.v, &cand, eps2);
                        if jc.is_finite() && jc <= jcur - cfg.armijo * t * slope {
                            accepted = Some((cand, jc));
                            break;
                        }
                    }
                    t *= cfg.backtrack;
                }
                match accepted {
                    None => {
                        converged = true;
                        break;
                    }
                    Some((cand, jc)) => {
                        let rel = (jcur - jc) / jcur.abs().max(f64::MIN_POSITIVE);
                        nodes = cand;
                        jcur = jc;
                        if rel < cfg.convergence_tol {
                            stalls += 1;
                            if stalls >= 5 {
                                converged = true;
                                break;
                            }
                        } else {
                            stalls = 0;
                        }
                    }
                }
            }
            history.push(jacobi_nodes(&nodes, self.v));
            log::debug!("stage eps2={eps2:e}: J={:.12} after {iterations} iterations", history.last().unwrap());
        }
        Ok((nodes, converged, iterations, history))
    }
}

fn nearest_attached(chart: &DomainChart, x: &[f64]) -> Option<usize> {
    let snap = chart.critpoint_snap();
    chart
        .components
        .iter()
        .flat_map(|c| c.critical_points.iter().copied())
        .filter(|&k| dist(&chart.critical_points[k].location, x) <= snap)
        .min_by(|&a, &b| {
            dist(&chart.critical_points[a].location, x).total_cmp(&dist(&chart.critical_points[b].location, x)).then(a.cmp(&b))
        })
}

fn end_for_path(chart: &DomainChart, x: &[f64], mode: EndpointMode) -> End {
    match mode {
        EndpointMode::OnBoundary(id) => match singleton_point(chart, id) {
            Some((p, k)) => End { point: p, mode, pinned: true, component: Some(id), critical: Some(k) },
            None => End { point: x.to_vec(), mode, pinned: false, component: Some(id), critical: None },
        },
        EndpointMode::AtOrigin => End { point: vec![0.0; x.len()], mode, pinned: true, component: None, critical: None },
        EndpointMode::Fixed => End { point: x.to_vec(), mode, pinned: true, component: None, critical: nearest_attached(chart, x) },
    }
}

/// Drops leading nodes that slid onto the wall next to a free end.
///
/// Segments on `{V = 0}` cost nothing, so the minimizer may park a node on
/// the wall beside the endpoint; the node then becomes the endpoint.
fn trim_wall_tail(v: &ShiftedPotential, chart: &DomainChart, nodes: &mut Vec<Point>) {
    let vmax = nodes.iter().map(|x| v.value(x)).fold(0.0f64, f64::max);
    let floor = 1e-8 * vmax;
    let keep = nodes.len() / 2;
    let mut drop = 0;
    while nodes.len() - drop > keep && v.value(&nodes[drop + 1]) <= floor {
        drop += 1;
    }
    if drop == 0 {
        return;
    }
    if let Ok(p) = project_to_boundary(v, &nodes[drop], chart.level_tol, 60) {
        if p != nodes[drop + 1] {
            nodes.drain(..drop);
            nodes[0] = p;
        }
    }
}

/// Minimizes the Jacobi length starting from `path0`, honouring its
/// endpoint modes.
pub fn minimize_jacobi(
    v: &ShiftedPotential,
    chart: &DomainChart,
    path0: &DiscretePath,
    cfg: &SolveConfig,
) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    let start = end_for_path(chart, path0.first(), path0.start);
    let end = end_for_path(chart, path0.last(), path0.end);
    minimize_with(v, chart, path0, cfg, start, end, 0)
}

fn minimize_with(
    v: &ShiftedPotential,
    chart: &DomainChart,
    path0: &DiscretePath,
    cfg: &SolveConfig,
    start: End,
    end: End,
    start_index: usize,
) -> Result<SolveResult, SolverError> {
    let d = Descent { v, chart, cfg, start, end };
    let (mut nodes, converged, iterations, history) = d.run(path0)?;
    let n = nodes.len();
    let mut start_critical = d.start.critical;
    let mut end_critical = d.end.critical;
    // snap free ends that drifted onto an attached critical point
    if !d.start.pinned {
        if let Some(k) = nearest_attached(chart, &nodes[0]) {
            nodes[0] = chart.critical_points[k].location.clone();
            start_critical = Some(k);
        }
    }
    if !d.end.pinned {
        if let Some(k) = nearest_attached(chart, &nodes[n - 1]) {
            nodes[n - 1] = chart.critical_points[k].location.clone();
            end_critical = Some(k);
        }
    }
    let free = |e: &End| !e.pinned && matches!(e.mode, EndpointMode::OnBoundary(_));
    if start_critical.is_none() && free(&d.start) {
        trim_wall_tail(v, chart, &mut nodes);
    }
    if end_critical.is_none() && free(&d.end) {
        nodes.reverse();
        trim_wall_tail(v, chart, &mut nodes);
        nodes.reverse();
    }
    let path = DiscretePath::new(nodes, d.start.mode, d.end.mode)?;
    let jacobi_value = jacobi(&path, v);
    let leaves_bbox = path.nodes.iter().any(|x| !chart.bbox().contains(x));
    if leaves_bbox {
        log::warn!("minimizing path leaves the bounding box");
    }
    Ok(SolveResult {
        path,
        jacobi_value,
        source_component: d.start.component,
        target_component: d.end.component.unwrap_or(0),
        converged,
        iterations,
        history,
        start_critical,
        end_critical,
        start_index,
        leaves_bbox,
    })
}

/// Low-discrepancy multistart perturbations: `(end shift, bump)` in
/// `[-½, ½]²`, rotated by a seeded random offset.
fn start_offsets(cfg: &SolveConfig) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (u0, u1): (f64, f64) = (rng.gen(), rng.gen());
    let phi = 0.5 * (1.0 + 5f64.sqrt());
    let a1 = 1.0 / phi;
    let a2 = 1.0 / (phi * phi);
    (0..cfg.multistart)
        .map(|r| {
            if r == 0 {
                (0.0, 0.0)
            } else {
                let r = r as f64;
                ((r * a1 + u0).fract() - 0.5, (r * a2 + u1).fract() - 0.5)
            }
        })
        .collect()
}

fn perturbed_seed(
    v: &ShiftedPotential,
    chart: &DomainChart,
    start: &End,
    end: &End,
    offset: (f64, f64),
    m: usize,
) -> Option<(DiscretePath, End, End)> {
    let mut start = start.clone();
    let mut end = end.clone();
    let shift_end = |e: &mut End, amount: f64| {
        if let (false, Some(id)) = (e.pinned, e.component) {
            let c = &chart.components[id];
            let s = c.arclength_of(&e.point) + amount * 0.2 * c.length();
            e.point = c.point_at(s);
            if let Ok(p) = project_to_boundary(v, &e.point, chart.level_tol, 60) {
                e.point = p;
            }
        }
    };
    shift_end(&mut end, offset.0);
    shift_end(&mut start, -offset.0);
    let a = &start.point;
    let b = &end.point;
    let len = dist(a, b);
    if len == 0.0 {
        return None;
    }
    let normal = if a.len() == 2 { vec![-(b[1] - a[1]) / len, (b[0] - a[0]) / len] } else { vec![0.0; a.len()] };
    let amp = offset.1 * 0.6 * len;
    let mut nodes: Vec<Point> = (0..=m)
        .map(|k| {
            let s = k as f64 / m as f64;
            let bump = amp * (std::f64::consts::PI * s).sin();
            a.iter().zip(b).zip(&normal).map(|((p, q), nv)| p + s * (q - p) + bump * nv).collect()
        })
        .collect();
    let vmax = nodes.iter().map(|x| v.value(x)).fold(0.0f64, f64::max).max(f64::MIN_POSITIVE);
    for k in 1..m {
        if !(v.value(&nodes[k]) > 0.0) {
            nodes[k] = nudge_inside(v, &nodes[k], 1e-6 * vmax)?;
        }
    }
    let path = DiscretePath::new(nodes, start.mode, end.mode).ok()?;
    Some((path, start, end))
}

fn solve_pair(v: &ShiftedPotential, chart: &DomainChart, start: &End, end: &End, cfg: &SolveConfig) -> Vec<Option<SolveResult>> {
    let offsets = start_offsets(cfg);
    offsets
        .par_iter()
        .enumerate()
        .map(|(r, &off)| {
            let (path, s, e) = perturbed_seed(v, chart, start, end, off, cfg.nodes)?;
            match minimize_with(v, chart, &path, cfg, s, e, r) {
                Ok(res) => Some(res),
                Err(err) => {
                    log::debug!("start {r} failed: {err}");
                    None
                }
            }
        })
        .collect()
}

/// Deterministic minimum: smallest `J`, then lower target, then lower start index.
fn pick_best<'a>(results: impl IntoIterator<Item = &'a SolveResult>) -> Option<&'a SolveResult> {
    results.into_iter().min_by(|a, b| {
        a.jacobi_value.total_cmp(&b.jacobi_value).then(a.target_component.cmp(&b.target_component)).then(a.start_index.cmp(&b.start_index))
    })
}

fn source_end(chart: &DomainChart, source: usize, target: usize) -> End {
    match singleton_point(chart, source) {
        Some((p, k)) => End { point: p, mode: EndpointMode::OnBoundary(source), pinned: true, component: Some(source), critical: Some(k) },
        None => {
            let (a, _) = closest_pair(chart, source, target);
            End { point: a, mode: EndpointMode::OnBoundary(source), pinned: false, component: Some(source), critical: None }
        }
    }
}

/// Orbit from component `source` to the best other component.
pub fn solve_connecting(
    v: &ShiftedPotential,
    chart: &DomainChart,
    source: usize,
    cfg: &SolveConfig,
) -> Result<ConnectingOutcome, SolverError> {
    cfg.validate()?;
    let n = chart.components.len();
    if n < 2 {
        return Err(SolverError::TooFewComponents(n));
    }
    chart.component(source)?;
    let targets: Vec<usize> = (0..n).filter(|&j| j != source).collect();
    let per: Vec<(usize, Option<SolveResult>)> = targets
        .par_iter()
        .map(|&j| {
            let s = source_end(chart, source, j);
            let e = component_end(chart, j, &s.point);
            let e = match (e.pinned, singleton_point(chart, source).is_none()) {
                (false, true) => {
                    let (_, b) = closest_pair(chart, source, j);
                    End { point: b, ..e }
                }
                _ => e,
            };
            let results = solve_pair(v, chart, &s, &e, cfg);
            (j, pick_best(results.iter().flatten()).cloned())
        })
        .collect();
    let mut distance_row = vec![f64::INFINITY; n];
    distance_row[source] = 0.0;
    for (j, r) in &per {
        if let Some(r) = r {
            distance_row[*j] = r.jacobi_value;
        }
    }
    let best = pick_best(per.iter().filter_map(|(_, r)| r.as_ref()))
        .cloned()
        .ok_or_else(|| SolverError::AllFailed(format!("no target reachable from component {source}")))?;
    Ok(ConnectingOutcome { best, per_target: per, distance_row })
}

/// Full matrix of minimal Jacobi lengths between components.
pub fn jacobi_distance_matrix(v: &ShiftedPotential, chart: &DomainChart, cfg: &SolveConfig) -> Result<Vec<Vec<f64>>, SolverError> {
    let n = chart.components.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        if i + 1 >= n {
            break;
        }
        let out = solve_connecting(v, chart, i, cfg)?;
        for j in (i + 1)..n {
            d[i][j] = out.distance_row[j];
            d[j][i] = out.distance_row[j];
        }
    }
    Ok(d)
}

/// Half orbit from the origin to the best boundary component.
pub fn solve_symmetric(v: &ShiftedPotential, chart: &DomainChart, cfg: &SolveConfig) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    let dim = chart.grid.bbox.dim();
    let origin = vec![0.0; dim];
    let v0 = v.value(&origin);
    if !(v0 > 0.0) {
        return Err(SolverError::OriginOutside(v0));
    }
    if chart.components.is_empty() {
        return Err(SolverError::TooFewComponents(0));
    }
    let start = End { point: origin.clone(), mode: EndpointMode::AtOrigin, pinned: true, component: None, critical: None };
    let results: Vec<Option<SolveResult>> = (0..chart.components.len())
        .into_par_iter()
        .flat_map_iter(|j| {
            let e = component_end(chart, j, &origin);
            solve_pair(v, chart, &start, &e, cfg)
        })
        .collect();
    pick_best(results.iter().flatten())
        .cloned()
        .ok_or_else(|| SolverError::AllFailed("no boundary component reachable from the origin".into()))
}

// ---------------------------------------------------------------------------
// grid oracle

/// Oracle terminal: a boundary component or a point (origin, singleton).
#[derive(Debug, Clone, PartialEq)]
pub enum Terminal {
    Component(usize),
    Point(Point),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub path: Vec<Point>,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn segment_jacobi(v: &ShiftedPotential, a: &[f64], b: &[f64]) -> f64 {
    jacobi_nodes(&[a.to_vec(), b.to_vec()], v)
}

/// Fine quadrature of the Jacobi length of a short straight link.
fn link_jacobi(v: &ShiftedPotential, a: &[f64], b: &[f64]) -> f64 {
    let pts: Vec<Point> = (0..=8).map(|k| a.iter().zip(b).map(|(p, q)| p + (k as f64 / 8.0) * (q - p)).collect()).collect();
    jacobi_nodes(&pts, v)
}

/// Dijkstra on the 8-connected grid graph of `Ω` nodes.
///
/// Edge weights are the midpoint-rule Jacobi length of the grid edge;
/// terminals are joined to nearby `Ω` nodes by straight links.
pub fn grid_geodesic_oracle(
    v: &ShiftedPotential,
    chart: &DomainChart,
    source: &Terminal,
    target: &Terminal,
    spec: &GridSpec,
) -> Result<OracleResult, SolverError> {
    let grid = SignGrid::sample(v, spec)?;
    let mask = flood_omega(v, &grid, &chart.seed, &chart.pinches)?;
    let nn = grid.node_count();
    let reach = 1.5 * spec.cell_diag();
    let links = |t: &Terminal| -> Result<Vec<(usize, f64, Point)>, SolverError> {
        let mut out = Vec::new();
        match t {
            Terminal::Point(p) => {
                for k in 0..nn {
                    if !mask.inside[k] {
                        continue;
                    }
                    let (i, j) = grid.coords(k);
                    let x = grid.node(i, j);
                    if dist(&x, p) <= reach {
                        out.push((k, link_jacobi(v, p, &x), p.clone()));
                    }
                }
            }
            Terminal::Component(id) => {
                let c = chart.component(*id)?;
                if c.is_singleton {
                    let p = c.polyline[0].clone();
                    for k in 0..nn {
                        if !mask.inside[k] {
                            continue;
                        }
                        let (i, j) = grid.coords(k);
                        let x = grid.node(i, j);
                        if dist(&x, &p) <= reach {
                            out.push((k, link_jacobi(v, &p, &x), p.clone()));
                        }
                    }
                } else {
                    for k in 0..nn {
                        if !mask.inside[k] {
                            continue;
                        }
                        let (i, j) = grid.coords(k);
                        let x = grid.node(i, j);
                        let (q, d) = c.nearest_point(&x);
                        if d <= reach {
                            out.push((k, link_jacobi(v, &q, &x), q));
                        }
                    }
                }
            }
        }
        Ok(out)
    };
    let src = links(source)?;
    let dst = links(target)?;
    if src.is_empty() || dst.is_empty() {
        return Err(SolverError::OracleDisconnected);
    }
    let mut distv = vec![f64::INFINITY; nn];
    let mut prev = vec![usize::MAX; nn];
    let mut origin_of = vec![usize::MAX; nn];
    let mut heap = BinaryHeap::new();
    for (s, &(k, w, _)) in src.iter().enumerate() {
        if w < distv[k] {
            distv[k] = w;
            origin_of[k] = s;
            heap.push(HeapItem(w, k));
        }
    }
    let (nx, ny) = (grid.nx() as i64, grid.ny() as i64);
    while let Some(HeapItem(dk, k)) = heap.pop() {
        if dk > distv[k] {
            continue;
        }
        let (i, j) = grid.coords(k);
        let xk = grid.node(i, j);
        for (di, dj) in [(-1i64, -1i64), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
            let (ii, jj) = (i as i64 + di, j as i64 + dj);
            if ii < 0 || jj < 0 || ii > nx || jj > ny {
                continue;
            }
            let kk = grid.idx(ii as usize, jj as usize);
            if !mask.inside[kk] {
                continue;
            }
            let w = segment_jacobi(v, &xk, &grid.node(ii as usize, jj as usize));
            let nd = dk + w;
            if nd < distv[kk] {
                distv[kk] = nd;
                prev[kk] = k;
                origin_of[kk] = origin_of[k];
                heap.push(HeapItem(nd, kk));
            }
        }
    }
    let best = dst
        .iter()
        .filter(|(k, _, _)| distv[*k].is_finite())
        .map(|(k, w, q)| (distv[*k] + w, *k, q))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .ok_or(SolverError::OracleDisconnected)?;
    let mut path = vec![best.2.clone()];
    let mut k = best.1;
    loop {
        let (i, j) = grid.coords(k);
        path.push(grid.node(i, j));
        if prev[k] == usize::MAX {
            break;
        }
        k = prev[k];
    }
    path.push(src[origin_of[k]].2.clone());
    path.reverse();
    Ok(OracleResult { value: best.0, path })
}
