//! Action and Jacobi functionals on polygonal paths, energy
//! reparametrization, and residuals of the equation of motion.
//!
//! Both functionals use the same per-segment potential `W_k = max(V(m_k), 0)`
//! at the segment midpoint `m_k`, so that with the energy-matched step
//! `Δt_k = |Δx_k| / √(2 W_k)` the two sums agree segment by segment.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::dist;
use crate::potential::ShiftedPotential;
use crate::space::Point;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FunctionalError {
    #[error("a path needs at least 3 nodes, got {0}")]
    TooShort(usize),
    #[error("consecutive nodes {0} and {1} coincide")]
    RepeatedNode(usize, usize),
    #[error("node {0} has dimension {1}, expected {2}")]
    Dimension(usize, usize, usize),
    #[error("times must be strictly increasing (index {0})")]
    NonIncreasingTimes(usize),
    #[error("{nodes} nodes but {times} times")]
    LengthMismatch { nodes: usize, times: usize },
    #[error("interior node {index} is outside the positive set (V = {value})")]
    OutsideDomain { index: usize, value: f64 },
    #[error("csv: {0}")]
    Csv(String),
}

/// How a path end is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointMode {
    Fixed,
    OnBoundary(usize),
    AtOrigin,
}

/// Polygon `x_0 … x_M` with endpoint constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    pub nodes: Vec<Point>,
    pub start: EndpointMode,
    pub end: EndpointMode,
}

impl DiscretePath {
    pub fn new(nodes: Vec<Point>, start: EndpointMode, end: EndpointMode) -> Result<Self, FunctionalError> {
        if nodes.len() < 3 {
            return Err(FunctionalError::TooShort(nodes.len()));
        }
        let n = nodes[0].len();
        for (k, x) in nodes.iter().enumerate() {
            if x.len() != n {
                return Err(FunctionalError::Dimension(k, x.len(), n));
            }
        }
        for k in 1..nodes.len() {
            if nodes[k] == nodes[k - 1] {
                return Err(FunctionalError::RepeatedNode(k - 1, k));
            }
        }
        Ok(DiscretePath { nodes, start, end })
    }

    /// `m + 1` equally spaced nodes on the segment `a → b`.
    pub fn straight(a: &[f64], b: &[f64], m: usize, start: EndpointMode, end: EndpointMode) -> Result<Self, FunctionalError> {
        let nodes = (0..=m)
            .map(|k| {
                let s = k as f64 / m as f64;
                a.iter().zip(b).map(|(p, q)| p + s * (q - p)).collect()
            })
            .collect();
        DiscretePath::new(nodes, start, end)
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    /// Number of segments `M`.
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn euclidean_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| dist(&w[0], &w[1])).sum()
    }

    pub fn first(&self) -> &Point {
        &self.nodes[0]
    }

    pub fn last(&self) -> &Point {
        self.nodes.last().expect("non-empty path")
    }

    pub fn reversed(&self) -> DiscretePath {
        let mut nodes = self.nodes.clone();
        nodes.reverse();
        DiscretePath { nodes, start: self.end, end: self.start }
    }
}

fn midpoint(a: &[f64], b: &[f64]) -> Point {
    a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect()
}

/// Clamped midpoint potential of the segment `a → b`.
#[inline]
pub fn segment_potential(v: &ShiftedPotential, a: &[f64], b: &[f64]) -> f64 {
    let w = v.value(&midpoint(a, b));
    if w > 0.0 {
        w
    } else {
        0.0
    }
}

/// `Σ √2 · √W_k · |Δx_k|`.
pub fn jacobi(path: &DiscretePath, v: &ShiftedPotential) -> f64 {
    jacobi_nodes(&path.nodes, v)
}

pub(crate) fn jacobi_nodes(nodes: &[Point], v: &ShiftedPotential) -> f64 {
    nodes.windows(2).map(|w| std::f64::consts::SQRT_2 * segment_potential(v, &w[0], &w[1]).sqrt() * dist(&w[0], &w[1])).sum()
}

fn check_times(n: usize, times: &[f64]) -> Result<(), FunctionalError> {
    if times.len() != n {
        return Err(FunctionalError::LengthMismatch { nodes: n, times: times.len() });
    }
    for k in 1..n {
        if !(times[k] > times[k - 1]) {
            return Err(FunctionalError::NonIncreasingTimes(k));
        }
    }
    Ok(())
}

/// `Σ [ ½|Δx_k|²/Δt_k + Δt_k · W_k ]`.
pub fn action(path: &DiscretePath, times: &[f64], v: &ShiftedPotential) -> Result<f64, FunctionalError> {
    check_times(path.nodes.len(), times)?;
    Ok(path
        .nodes
        .windows(2)
        .zip(times.windows(2))
        .map(|(x, t)| {
            let dt = t[1] - t[0];
            let l = dist(&x[0], &x[1]);
            0.5 * l * l / dt + dt * segment_potential(v, &x[0], &x[1])
        })
        .sum())
}

/// `action − jacobi`; non-negative up to rounding, zero iff every segment is
/// energy matched.
pub fn jacobi_action_gap(path: &DiscretePath, times: &[f64], v: &ShiftedPotential) -> Result<f64, FunctionalError> {
    Ok(action(path, times, v)? - jacobi(path, v))
}

/// Per-segment steps `Δt_k = |Δx_k| / √(2 W_k)` minimizing the action.
pub fn matched_steps(path: &DiscretePath, v: &ShiftedPotential) -> Vec<f64> {
    path.nodes.windows(2).map(|w| dist(&w[0], &w[1]) / (2.0 * segment_potential(v, &w[0], &w[1])).sqrt()).collect()
}

/// End time of an orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EndTime {
    Finite(f64),
    Infinite,
}

impl EndTime {
    pub fn is_finite(&self) -> bool {
        matches!(self, EndTime::Finite(_))
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            EndTime::Finite(t) => Some(*t),
            EndTime::Infinite => None,
        }
    }

    fn from_time(t: f64) -> EndTime {
        if t.is_finite() {
            EndTime::Finite(t)
        } else {
            EndTime::Infinite
        }
    }
}

/// Absolute residual and the same relative to `max V` on the orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Residual {
    pub absolute: f64,
    pub relative: f64,
}

/// A path with node times. End nodes reached only asymptotically carry
/// time `∓∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedOrbit {
    pub nodes: Vec<Point>,
    pub times: Vec<f64>,
    pub t_minus: EndTime,
    pub t_plus: EndTime,
    pub energy_residual: Residual,
    pub newton_residual: f64,
}

impl TimedOrbit {
    /// Builds an orbit; interior times must be finite, ends may be `∓∞`.
    /// Residuals are left at zero until [`TimedOrbit::with_residuals`].
    pub fn new(nodes: Vec<Point>, times: Vec<f64>) -> Result<TimedOrbit, FunctionalError> {
        check_times(nodes.len(), &times)?;
        if nodes.len() < 2 {
            return Err(FunctionalError::TooShort(nodes.len()));
        }
        let n = nodes.len();
        for (k, t) in times.iter().enumerate() {
            let end_ok = (k == 0 && *t == f64::NEG_INFINITY) || (k == n - 1 && *t == f64::INFINITY);
            if !t.is_finite() && !end_ok {
                return Err(FunctionalError::NonIncreasingTimes(k));
            }
        }
        Ok(TimedOrbit {
            t_minus: EndTime::from_time(times[0]),
            t_plus: EndTime::from_time(times[n - 1]),
            nodes,
            times,
            energy_residual: Residual::default(),
            newton_residual: 0.0,
        })
    }

    pub fn with_residuals(mut self, v: &ShiftedPotential) -> TimedOrbit {
        self.energy_residual = energy_residual(&self, v);
        self.newton_residual = newton_residual(&self, v);
        self
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node velocities by central differences (one-sided at finite ends,
    /// zero at infinite ends).
    pub fn velocities(&self) -> Vec<Point> {
        let n = self.nodes.len();
        let d = self.dim();
        (0..n)
            .map(|k| {
                let (a, b) = if k == 0 {
                    (0, 1)
                } else if k == n - 1 {
                    (n - 2, n - 1)
                } else {
                    (k - 1, k + 1)
                };
                let dt = self.times[b] - self.times[a];
                if !dt.is_finite() {
                    if k > 0 && k < n - 1 {
                        // neighbour at infinity: one-sided on the finite side
                        let (a, b) = if self.times[k - 1].is_finite() { (k - 1, k) } else { (k, k + 1) };
                        let dt = self.times[b] - self.times[a];
                        return (0..d).map(|i| (self.nodes[b][i] - self.nodes[a][i]) / dt).collect();
                    }
                    return vec![0.0; d];
                }
                (0..d).map(|i| (self.nodes[b][i] - self.nodes[a][i]) / dt).collect()
            })
            .collect()
    }

    /// Returns the orbit translated in time by `dt`.
    pub fn shifted(&self, dt: f64) -> TimedOrbit {
        let mut o = self.clone();
        for t in &mut o.times {
            *t += dt;
        }
        o.t_minus = EndTime::from_time(o.times[0]);
        o.t_plus = EndTime::from_time(*o.times.last().unwrap());
        o
    }

    /// CSV with columns `t,x1..xn,V,speed` at full precision.
    pub fn write_csv<W: Write>(&self, v: &ShiftedPotential, out: W) -> Result<(), FunctionalError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("x{i}")));
        header.push("V".into());
        header.push("speed".into());
        w.write_record(&header).map_err(|e| FunctionalError::Csv(e.to_string()))?;
        let vel = self.velocities();
        for (k, x) in self.nodes.iter().enumerate() {
            let mut rec = vec![self.times[k].to_string()];
            rec.extend(x.iter().map(|c| c.to_string()));
            rec.push(v.value(x).to_string());
            rec.push(crate::linalg::norm(&vel[k]).to_string());
            w.write_record(&rec).map_err(|e| FunctionalError::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| FunctionalError::Csv(e.to_string()))
    }

    pub fn to_csv_string(&self, v: &ShiftedPotential) -> String {
        let mut buf = Vec::new();
        self.write_csv(v, &mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8 csv")
    }

    /// Reads the `t` and `x*` columns written by [`TimedOrbit::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<TimedOrbit, FunctionalError> {
        let mut r = csv::Reader::from_reader(input);
        let headers = r.headers().map_err(|e| FunctionalError::Csv(e.to_string()))?.clone();
        let t_col = headers.iter().position(|h| h == "t").ok_or_else(|| FunctionalError::Csv("missing column t".into()))?;
        let x_cols: Vec<usize> = (1..).map_while(|i| headers.iter().position(|h| h == format!("x{i}"))).collect();
        if x_cols.is_empty() {
            return Err(FunctionalError::Csv("missing coordinate columns".into()));
        }
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| FunctionalError::Csv(format!("bad number '{s}'")));
        let mut nodes = Vec::new();
        let mut times = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| FunctionalError::Csv(e.to_string()))?;
            times.push(parse(&rec[t_col])?);
            nodes.push(x_cols.iter().map(|&c| parse(&rec[c])).collect::<Result<Point, _>>()?);
        }
        TimedOrbit::new(nodes, times)
    }

    /// JSON document with nodes, times (`null` when infinite), end-time flags
    /// and residuals.
    pub fn to_json_value(&self) -> serde_json::Value {
        let times: Vec<serde_json::Value> =
            self.times.iter().map(|t| if t.is_finite() { serde_json::json!(t) } else { serde_json::Value::Null }).collect();
        let end = |e: &EndTime| match e {
            EndTime::Finite(t) => serde_json::json!({ "finite": true, "time": t }),
            EndTime::Infinite => serde_json::json!({ "finite": false, "time": null }),
        };
        serde_json::json!({
            "nodes": self.nodes,
            "times": times,
            "t_minus": end(&self.t_minus),
            "t_plus": end(&self.t_plus),
            "energy_residual": self.energy_residual,
            "newton_residual": self.newton_residual,
        })
    }
}

/// Context for deciding whether an end is reached in infinite time.
#[derive(Debug, Clone, Copy)]
pub struct TimeContext<'a> {
    /// Locations of critical points attached to the boundary.
    pub critical: &'a [Point],
    /// Snap radius `critpoint_snap`.
    pub snap: f64,
}

impl TimeContext<'_> {
    pub const NONE: TimeContext<'static> = TimeContext { critical: &[], snap: 0.0 };
}

/// An end is reached only asymptotically iff it sits at a critical point.
pub fn is_endpoint_time_infinite(x: &[f64], ctx: &TimeContext<'_>) -> bool {
    ctx.critical.iter().any(|p| dist(p, x) <= ctx.snap)
}

/// Time to cross a segment on which `V` is linear from `va` to `vb` at
/// energy zero: `∫ ds/√(2V) = √2 L / (√va + √vb)`.
fn wall_step(l: f64, va: f64, vb: f64) -> f64 {
    std::f64::consts::SQRT_2 * l / (va.max(0.0).sqrt() + vb.max(0.0).sqrt())
}

/// Times from `|u̇| = √(2V)`.
///
/// Interior segments use the midpoint step. A regular boundary end (finite
/// arrival) uses the closed form for `V` linear along the last segment; an
/// end at a critical point gets time `∓∞`. Time zero is put at node 0 for an
/// `AtOrigin` start, else at the node of largest `V`.
pub fn reparametrize(path: &DiscretePath, v: &ShiftedPotential, ctx: &TimeContext<'_>) -> Result<TimedOrbit, FunctionalError> {
    let nodes = &path.nodes;
    let n = nodes.len();
    let vals: Vec<f64> = nodes.iter().map(|x| v.value(x)).collect();
    for k in 1..n - 1 {
        if !(vals[k] > 0.0) {
            return Err(FunctionalError::OutsideDomain { index: k, value: vals[k] });
        }
    }
    let start_inf = path.start != EndpointMode::AtOrigin && is_endpoint_time_infinite(&nodes[0], ctx);
    let end_inf = path.end != EndpointMode::AtOrigin && is_endpoint_time_infinite(&nodes[n - 1], ctx);
    let start_wall = !start_inf && matches!(path.start, EndpointMode::OnBoundary(_));
    let end_wall = !end_inf && matches!(path.end, EndpointMode::OnBoundary(_));

    let mut steps = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        let l = dist(&nodes[k], &nodes[k + 1]);
        let dt = if (k == 0 && start_inf) || (k == n - 2 && end_inf) {
            f64::INFINITY
        } else if (k == 0 && start_wall) || (k == n - 2 && end_wall) {
            wall_step(l, vals[k], vals[k + 1])
        } else {
            let w = segment_potential(v, &nodes[k], &nodes[k + 1]);
            if !(w > 0.0) {
                return Err(FunctionalError::OutsideDomain { index: k, value: w });
            }
            l / (2.0 * w).sqrt()
        };
        steps.push(dt);
    }
    let anchor = if path.start == EndpointMode::AtOrigin {
        0
    } else {
        (0..n).max_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(b.cmp(&a))).unwrap_or(0)
    };
    let mut times = vec![0.0; n];
    for k in (anchor + 1)..n {
        times[k] = times[k - 1] + steps[k - 1];
    }
    for k in (0..anchor).rev() {
        times[k] = times[k + 1] - steps[k];
    }
    Ok(TimedOrbit::new(nodes.clone(), times)?.with_residuals(v))
}

/// `max |½|u̇|² − V|` over interior nodes with finite neighbouring times.
pub fn energy_residual(orbit: &TimedOrbit, v: &ShiftedPotential) -> Residual {
    let n = orbit.nodes.len();
    let mut worst = 0.0f64;
    let mut vmax = 0.0f64;
    for k in 0..n {
        if orbit.times[k].is_finite() {
            vmax = vmax.max(v.value(&orbit.nodes[k]));
        }
    }
    for k in 1..n.saturating_sub(1) {
        let dt = orbit.times[k + 1] - orbit.times[k - 1];
        if !dt.is_finite() {
            continue;
        }
        let speed2: f64 = (0..orbit.dim())
            .map(|i| {
                let d = (orbit.nodes[k + 1][i] - orbit.nodes[k - 1][i]) / dt;
                d * d
            })
            .sum();
        worst = worst.max((0.5 * speed2 - v.value(&orbit.nodes[k])).abs());
    }
    Residual { absolute: worst, relative: if vmax > 0.0 { worst / vmax } else { worst } }
}

/// `max |ü − ∇V|` over interior nodes, with the three-point stencil on
/// possibly non-uniform steps.
pub fn newton_residual(orbit: &TimedOrbit, v: &ShiftedPotential) -> f64 {
    let n = orbit.nodes.len();
    let d = orbit.dim();
    let mut g = vec![0.0; d];
    let mut worst = 0.0f64;
    for k in 1..n.saturating_sub(1) {
        let h1 = orbit.times[k] - orbit.times[k - 1];
        let h2 = orbit.times[k + 1] - orbit.times[k];
        if !h1.is_finite() || !h2.is_finite() {
            continue;
        }
        v.gradient_into(&orbit.nodes[k], &mut g);
        let mut r2 = 0.0;
        for i in 0..d {
            let (a, b, c) = (orbit.nodes[k - 1][i], orbit.nodes[k][i], orbit.nodes[k + 1][i]);
            let acc = 2.0 * ((c - b) / h2 - (b - a) / h1) / (h1 + h2);
            r2 += (acc - g[i]) * (acc - g[i]);
        }
        worst = worst.max(r2.sqrt());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::potential::{shift, Potential};

    fn half() -> ShiftedPotential {
        shift(&Potential::from_expr("0.5 + 0*x1 + 0*x2", &Params::new(), Some(2)).unwrap(), 0.0)
    }

    fn unit_segment() -> DiscretePath {
        DiscretePath::straight(&[0.0, 0.0], &[1.0, 0.0], 2, EndpointMode::Fixed, EndpointMode::Fixed).unwrap()
    }

    #[test]
    fn constant_potential_examples() {
        let v = half();
        let p = unit_segment();
        assert!((jacobi(&p, &v) - 1.0).abs() < 1e-15);
        assert!((action(&p, &[0.0, 0.5, 1.0], &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((action(&p, &[0.0, 1.0, 2.0], &v).unwrap() - 1.25).abs() < 1e-15);
        assert!(jacobi_action_gap(&p, &[0.0, 0.5, 1.0], &v).unwrap().abs() < 1e-15);
        assert!(jacobi_action_gap(&p, &[0.0, 0.25, 0.5], &v).unwrap() > 0.0);
        assert!(matches!(action(&p, &[0.0, 0.5, 0.5], &v), Err(FunctionalError::NonIncreasingTimes(2))));
        let o = reparametrize(&p, &v, &TimeContext::NONE).unwrap();
        assert!((o.times[2] - o.times[0] - 1.0).abs() < 1e-15);
        assert!(o.energy_residual.absolute < 1e-15);
        assert!(o.newton_residual < 1e-12);
    }

    #[test]
    fn doubled_times_energy_residual() {
        let v = half();
        let p = DiscretePath::straight(&[0.0, 0.0], &[1.0, 0.0], 10, EndpointMode::Fixed, EndpointMode::Fixed).unwrap();
        let times: Vec<f64> = (0..=10).map(|k| 0.2 * k as f64).collect();
        let o = TimedOrbit::new(p.nodes.clone(), times).unwrap().with_residuals(&v);
        assert!((o.energy_residual.absolute - 0.375).abs() < 1e-12);
        assert!((o.energy_residual.relative - 0.75).abs() < 1e-12);
    }

    #[test]
    fn path_validation() {
        assert!(matches!(
            DiscretePath::new(vec![vec![0.0], vec![1.0]], EndpointMode::Fixed, EndpointMode::Fixed),
            Err(FunctionalError::TooShort(2))
        ));
        assert!(matches!(
            DiscretePath::new(vec![vec![0.0], vec![0.0], vec![1.0]], EndpointMode::Fixed, EndpointMode::Fixed),
            Err(FunctionalError::RepeatedNode(0, 1))
        ));
    }

    #[test]
    fn equilibrium_has_zero_newton_residual() {
        let v = shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5);
        let o = TimedOrbit::new(vec![vec![1.0, 0.0]; 5], vec![0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(newton_residual(&o, &v), 0.0);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let v = shift(&Potential::builtin("disk", &Params::new()).unwrap(), 0.0);
        let p = DiscretePath::straight(&[0.0, 0.0], &[1.0, 0.0], 32, EndpointMode::AtOrigin, EndpointMode::OnBoundary(0)).unwrap();
        let o = reparametrize(&p, &v, &TimeContext::NONE).unwrap();
        let text = o.to_csv_string(&v);
        assert!(text.starts_with("t,x1,x2,V,speed\n"));
        let back = TimedOrbit::read_csv(text.as_bytes()).unwrap().with_residuals(&v);
        assert_eq!(back.nodes, o.nodes);
        assert_eq!(back.times, o.times);
        assert_eq!(back.energy_residual, o.energy_residual);
        assert_eq!(back.newton_residual, o.newton_residual);
    }

    #[test]
    fn infinite_ends_survive_csv_and_json() {
        let v = shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5);
        let p = DiscretePath::straight(&[-1.0, 0.0], &[1.0, 0.0], 40, EndpointMode::OnBoundary(0), EndpointMode::OnBoundary(0)).unwrap();
        let crit = vec![vec![-1.0, 0.0], vec![1.0, 0.0]];
        let o = reparametrize(&p, &v, &TimeContext { critical: &crit, snap: 1e-6 }).unwrap();
        assert_eq!(o.t_minus, EndTime::Infinite);
        assert_eq!(o.t_plus, EndTime::Infinite);
        let back = TimedOrbit::read_csv(o.to_csv_string(&v).as_bytes()).unwrap();
        assert_eq!(back.times, o.times);
        let j = o.to_json_value();
        assert!(j["times"][0].is_null());
        assert_eq!(j["t_plus"]["finite"], serde_json::json!(false));
    }
}
