//! Orbit classification, the reflection extensions that turn half orbits
//! into heteroclinic, homoclinic and periodic solutions, and the energy
//! sweep.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::functional::{reparametrize, EndTime, EndpointMode, FunctionalError, TimeContext, TimedOrbit};
use crate::geometry::{attach_critical_points, extract_domain, DomainChart, GeometryError, GridSpec, SignGrid};
use crate::linalg::norm;
use crate::potential::{find_critical_points, shift, CriticalPointOptions, Potential, PotentialError, ShiftedPotential};
use crate::solver::{solve_connecting, solve_symmetric, SolveConfig, SolveResult, SolverError};
use crate::space::{BBox, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("endpoint {end} is at a critical point but is reached in finite time; a quadratic zero of V cannot be reached in finite time")]
    FiniteAtCritical { end: &'static str },
    #[error("endpoint {end} is a regular boundary point but is reached in infinite time")]
    InfiniteAtRegular { end: &'static str },
    #[error("extension needs {0}")]
    Pattern(&'static str),
    #[error("the half orbit does not start at the origin")]
    NotSymmetric,
    #[error(transparent)]
    Functional(#[from] FunctionalError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrbitKind {
    Heteroclinic,
    Homoclinic,
    PeriodicTwoWall,
    PeriodicSymmetric,
    ConnectingFinite,
}

impl fmt::Display for OrbitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            OrbitKind::Heteroclinic => "Heteroclinic",
            OrbitKind::Homoclinic => "Homoclinic",
            OrbitKind::PeriodicTwoWall => "PeriodicTwoWall",
            OrbitKind::PeriodicSymmetric => "PeriodicSymmetric",
            OrbitKind::ConnectingFinite => "ConnectingFinite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndpointKind {
    /// Index into the chart's critical points.
    CriticalPoint(usize),
    /// Regular point of the given component.
    RegularBoundary(usize),
    Origin,
    Interior,
}

impl EndpointKind {
    pub fn is_critical(&self) -> bool {
        matches!(self, EndpointKind::CriticalPoint(_))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedOrbit {
    /// The computed piece, oriented so a critical end (if any) comes first.
    pub orbit: TimedOrbit,
    /// Full solution built by reflection, when the kind admits one.
    pub extended: Option<TimedOrbit>,
    pub kind: OrbitKind,
    pub period: Option<f64>,
    pub endpoint_kinds: [EndpointKind; 2],
    pub jacobi_value: f64,
}

impl ClassifiedOrbit {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind.to_string(),
            "jacobi": self.jacobi_value,
            "period": self.period,
            "t_minus": self.orbit.t_minus.value(),
            "t_plus": self.orbit.t_plus.value(),
            "endpoint_kinds": self.endpoint_kinds,
            "energy_residual": self.orbit.energy_residual,
            "newton_residual": self.orbit.newton_residual,
        })
    }
}

fn attached_locations(chart: &DomainChart) -> Vec<Point> {
    chart.all_attached().into_iter().map(|(_, c)| c.location.clone()).collect()
}

fn endpoint_kind(chart: &DomainChart, x: &[f64], mode: EndpointMode, critical: Option<usize>) -> EndpointKind {
    if mode == EndpointMode::AtOrigin {
        return EndpointKind::Origin;
    }
    if let Some(k) = critical {
        return EndpointKind::CriticalPoint(k);
    }
    let snap = chart.critpoint_snap();
    if let Some((_, k)) = chart
        .components
        .iter()
        .flat_map(|c| c.critical_points.iter().map(move |&k| (c.id, k)))
        .find(|&(_, k)| crate::linalg::dist(&chart.critical_points[k].location, x) <= snap)
    {
        return EndpointKind::CriticalPoint(k);
    }
    match mode {
        EndpointMode::OnBoundary(id) => EndpointKind::RegularBoundary(id),
        _ => EndpointKind::Interior,
    }
}

fn check_consistency(kind: EndpointKind, t: EndTime, end: &'static str) -> Result<(), ClassifyError> {
    match (kind, t) {
        (EndpointKind::CriticalPoint(_), EndTime::Finite(_)) => Err(ClassifyError::FiniteAtCritical { end }),
        (EndpointKind::RegularBoundary(_) | EndpointKind::Origin | EndpointKind::Interior, EndTime::Infinite) => {
            Err(ClassifyError::InfiniteAtRegular { end })
        }
        _ => Ok(()),
    }
}

/// Labels the ends of a converged solve and assigns the orbit kind.
pub fn classify(result: &SolveResult, chart: &DomainChart, v: &ShiftedPotential) -> Result<ClassifiedOrbit, ClassifyError> {
    let crit = attached_locations(chart);
    let ctx = TimeContext { critical: &crit, snap: chart.critpoint_snap() };
    let mut path = result.path.clone();
    let mut k0 = endpoint_kind(chart, path.first(), path.start, result.start_critical);
    let mut k1 = endpoint_kind(chart, path.last(), path.end, result.end_critical);
    // a single critical end goes first
    if !k0.is_critical() && k1.is_critical() && k0 != EndpointKind::Origin {
        path = path.reversed();
        std::mem::swap(&mut k0, &mut k1);
    }
    let orbit = reparametrize(&path, v, &ctx)?;
    check_consistency(k0, orbit.t_minus, "start")?;
    check_consistency(k1, orbit.t_plus, "end")?;
    use EndpointKind::*;
    let (kind, extended, period) = match (k0, k1) {
        (Origin, CriticalPoint(_)) => (OrbitKind::Heteroclinic, Some(extend_odd(&orbit)?), None),
        (Origin, RegularBoundary(_)) => {
            let ext = extend_symmetric(&orbit)?;
            let t = orbit.t_plus.value().expect("finite end");
            (OrbitKind::PeriodicSymmetric, Some(ext), Some(4.0 * t))
        }
        (CriticalPoint(a), CriticalPoint(b)) => {
            if a == b {
                (OrbitKind::Homoclinic, None, None)
            } else {
                (OrbitKind::Heteroclinic, None, None)
            }
        }
        (CriticalPoint(_), RegularBoundary(_)) => (OrbitKind::Homoclinic, Some(extend_homoclinic(&orbit)?), None),
        (RegularBoundary(_), RegularBoundary(_)) => {
            let ext = extend_periodic(&orbit)?;
            let (a, b) = (orbit.t_minus.value().unwrap(), orbit.t_plus.value().unwrap());
            (OrbitKind::PeriodicTwoWall, Some(ext), Some(2.0 * (b - a)))
        }
        _ => (OrbitKind::ConnectingFinite, None, None),
    };
    let extended = extended.map(|o| o.with_residuals(v));
    Ok(ClassifiedOrbit { orbit, extended, kind, period, endpoint_kinds: [k0, k1], jacobi_value: result.jacobi_value })
}

fn build(nodes: Vec<Point>, times: Vec<f64>) -> Result<TimedOrbit, ClassifyError> {
    Ok(TimedOrbit::new(nodes, times)?)
}

/// One period: the orbit followed by its time reversal about `t_plus`.
pub fn extend_periodic(orbit: &TimedOrbit) -> Result<TimedOrbit, ClassifyError> {
    let (EndTime::Finite(_), EndTime::Finite(tp)) = (orbit.t_minus, orbit.t_plus) else {
        return Err(ClassifyError::Pattern("both end times finite"));
    };
    let n = orbit.nodes.len();
    let mut nodes = orbit.nodes.clone();
    let mut times = orbit.times.clone();
    for k in (0..n - 1).rev() {
        nodes.push(orbit.nodes[k].clone());
        times.push(2.0 * tp - orbit.times[k]);
    }
    build(nodes, times)
}

/// Reflection about `t_plus` of an orbit leaving a critical point.
pub fn extend_homoclinic(orbit: &TimedOrbit) -> Result<TimedOrbit, ClassifyError> {
    let (EndTime::Infinite, EndTime::Finite(tp)) = (orbit.t_minus, orbit.t_plus) else {
        return Err(ClassifyError::Pattern("an infinite start and a finite end"));
    };
    let n = orbit.nodes.len();
    let mut nodes = orbit.nodes.clone();
    let mut times = orbit.times.clone();
    for k in (0..n - 1).rev() {
        nodes.push(orbit.nodes[k].clone());
        times.push(2.0 * tp - orbit.times[k]);
    }
    build(nodes, times)
}

fn starts_at_origin(orbit: &TimedOrbit) -> bool {
    norm(&orbit.nodes[0]) == 0.0 && orbit.times[0] == 0.0
}

/// Odd reflection `v(−t) = −v(t)` of a half orbit leaving the origin.
pub fn extend_odd(orbit: &TimedOrbit) -> Result<TimedOrbit, ClassifyError> {
    if !starts_at_origin(orbit) {
        return Err(ClassifyError::NotSymmetric);
    }
    let n = orbit.nodes.len();
    let mut nodes = Vec::with_capacity(2 * n - 1);
    let mut times = Vec::with_capacity(2 * n - 1);
    for k in (1..n).rev() {
        nodes.push(orbit.nodes[k].iter().map(|x| -x).collect());
        times.push(-orbit.times[k]);
    }
    nodes.extend(orbit.nodes.iter().cloned());
    times.extend(orbit.times.iter().copied());
    build(nodes, times)
}

/// Full period on `[−2t₊, 2t₊]` of a half orbit from the origin to a wall.
pub fn extend_symmetric(orbit: &TimedOrbit) -> Result<TimedOrbit, ClassifyError> {
    if !starts_at_origin(orbit) {
        return Err(ClassifyError::NotSymmetric);
    }
    let EndTime::Finite(tp) = orbit.t_plus else {
        return Err(ClassifyError::Pattern("a finite end time (an infinite one is a heteroclinic through the origin)"));
    };
    let n = orbit.nodes.len();
    // half period [0, 2t₊]: out to the wall and back
    let mut hn = orbit.nodes.clone();
    let mut ht = orbit.times.clone();
    for k in (0..n - 1).rev() {
        hn.push(orbit.nodes[k].clone());
        ht.push(2.0 * tp - orbit.times[k]);
    }
    let m = hn.len();
    let mut nodes = Vec::with_capacity(2 * m - 1);
    let mut times = Vec::with_capacity(2 * m - 1);
    for k in (1..m).rev() {
        nodes.push(hn[k].iter().map(|x| -x).collect());
        times.push(-ht[k]);
    }
    nodes.extend(hn);
    times.extend(ht);
    build(nodes, times)
}

// ---------------------------------------------------------------------------
// sweep

/// Settings shared by every α of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub bbox: BBox,
    pub resolution: [usize; 2],
    pub solver: SolveConfig,
    pub critical: CriticalPointOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub n_components: usize,
    pub kind: Option<OrbitKind>,
    pub jacobi: f64,
    /// `None` for non-periodic kinds.
    pub period: Option<f64>,
    pub energy_residual: f64,
    pub newton_residual: f64,
    pub mode: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub const HEADER: [&'static str; 7] = ["alpha", "n_components", "kind", "jacobi", "period", "energy_residual", "newton_residual"];

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.alpha.to_string(),
                r.n_components.to_string(),
                r.kind.map_or_else(|| "failed".to_string(), |k| k.to_string()),
                r.jacobi.to_string(),
                match (r.kind, r.period) {
                    (_, Some(p)) => p.to_string(),
                    (Some(OrbitKind::Heteroclinic | OrbitKind::Homoclinic), None) => "inf".to_string(),
                    _ => String::new(),
                },
                r.energy_residual.to_string(),
                r.newton_residual.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("utf8")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }
}

/// Everything computed for one energy level.
#[derive(Debug, Clone)]
pub struct LevelAnalysis {
    pub alpha: f64,
    pub chart: DomainChart,
    pub result: SolveResult,
    pub classified: ClassifiedOrbit,
    pub symmetric: bool,
}

/// Seed for the chart: the origin when it is inside, otherwise the
/// positive grid node closest to it.
pub fn default_seed(v: &ShiftedPotential, spec: &GridSpec) -> Result<Point, ClassifyError> {
    let origin = vec![0.0; spec.bbox.dim()];
    if v.value(&origin) > 0.0 {
        return Ok(origin);
    }
    let grid = SignGrid::sample(v, spec)?;
    let mut best: Option<(f64, Point)> = None;
    for k in 0..grid.node_count() {
        if grid.values[k] > 0.0 {
            let (i, j) = grid.coords(k);
            let p = grid.node(i, j);
            let d = norm(&p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
    }
    best.map(|(_, p)| p).ok_or(ClassifyError::Geometry(GeometryError::SeedNotPositive { seed: origin, value: v.value(&[0.0, 0.0]) }))
}

/// Chart, solve and classification at one energy level. The solve is
/// symmetric when the origin is in `Ω`, otherwise connecting from the
/// component nearest the origin.
pub fn analyze_level(u: &Potential, alpha: f64, opts: &SweepOptions) -> Result<LevelAnalysis, ClassifyError> {
    let v = shift(u, alpha);
    let cps = find_critical_points(&v, &opts.bbox, &opts.critical)?;
    let spec = GridSpec { bbox: opts.bbox.clone(), resolution: opts.resolution };
    let seed = default_seed(&v, &spec)?;
    let chart = extract_domain(&v, &seed, &spec, &cps)?;
    let chart = attach_critical_points(chart, &cps, 2.0 * spec.cell_diag());
    let origin = vec![0.0; opts.bbox.dim()];
    let symmetric = v.value(&origin) > 0.0;
    let result = if symmetric {
        solve_symmetric(&v, &chart, &opts.solver)?
    } else {
        let (source, _) = chart.nearest_component(&origin).ok_or(SolverError::TooFewComponents(0))?;
        solve_connecting(&v, &chart, source, &opts.solver)?.best
    };
    let classified = classify(&result, &chart, &v)?;
    Ok(LevelAnalysis { alpha, chart, result, classified, symmetric })
}

/// Runs [`analyze_level`] for each α; failures become rows with an error.
pub fn bifurcation_sweep(u: &Potential, alphas: &[f64], opts: &SweepOptions) -> SweepTable {
    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| alphas[a].total_cmp(&alphas[b]));
    let rows = order
        .par_iter()
        .map(|&i| {
            let alpha = alphas[i];
            match analyze_level(u, alpha, opts) {
                Ok(a) => SweepRow {
                    alpha,
                    n_components: a.chart.components.len(),
                    kind: Some(a.classified.kind),
                    jacobi: a.classified.jacobi_value,
                    period: a.classified.period,
                    energy_residual: a.classified.orbit.energy_residual.absolute,
                    newton_residual: a.classified.orbit.newton_residual,
                    mode: if a.symmetric { "symmetric" } else { "connecting" }.to_string(),
                    error: None,
                },
                Err(e) => {
                    log::warn!("sweep at alpha = {alpha}: {e}");
                    SweepRow {
                        alpha,
                        n_components: 0,
                        kind: None,
                        jacobi: f64::NAN,
                        period: None,
                        energy_residual: f64::NAN,
                        newton_residual: f64::NAN,
                        mode: String::new(),
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    SweepTable { rows }
}

/// Default α grid (12 values, ascending) for a potential with a negative
/// global minimum value `c_lo`, a zero critical value, and a lowest positive
/// saddle value `c_hi`: `−α` takes `c_lo`, five values in `(c_lo, 0)`
/// clustered at both ends, `0`, and five values in `(0, c_hi)`.
pub fn auto_alphas(c_lo: f64, c_hi: f64) -> Vec<f64> {
    let fr = [0.02, 0.1, 0.5, 0.9, 0.98];
    let mut minus_alpha = vec![c_lo];
    minus_alpha.extend(fr.iter().map(|f| c_lo * (1.0 - f)));
    minus_alpha.push(0.0);
    minus_alpha.extend(fr.iter().map(|f| c_hi * f));
    let mut a: Vec<f64> = minus_alpha.into_iter().map(|m| -m).collect();
    a.sort_by(f64::total_cmp);
    a
}

/// Critical values `(c_lo, c_hi)` of `u` used by [`auto_alphas`]: the lowest
/// critical value and the lowest positive saddle value.
pub fn regime_thresholds(u: &Potential, bbox: &BBox, opts: &CriticalPointOptions) -> Result<(f64, f64), ClassifyError> {
    let cps = find_critical_points(&shift(u, 0.0), bbox, opts)?;
    let c_lo = cps.iter().map(|c| c.potential_value).fold(f64::INFINITY, f64::min);
    let c_hi = cps.iter().filter(|c| c.is_saddle() && c.potential_value > 0.0).map(|c| c.potential_value).fold(f64::INFINITY, f64::min);
    if !c_lo.is_finite() || !c_hi.is_finite() || c_lo >= 0.0 {
        return Err(ClassifyError::Pattern("a negative minimum and a positive saddle value for the automatic energy grid"));
    }
    Ok((c_lo, c_hi))
}
