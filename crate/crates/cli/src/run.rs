//! Pipelines behind each subcommand.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::anyhow;
use orbitforge::{
    attach_critical_points, auto_alphas, bifurcation_sweep, classify, default_seed, extract_domain, find_critical_points,
    grid_geodesic_oracle, regime_thresholds, shift, solve_connecting, solve_symmetric, ClassifiedOrbit, CriticalPointOptions, DomainChart,
    GeometryError, Potential, ShiftedPotential, SolveResult, SolverError, SweepOptions, Terminal,
};

use crate::config::{AlphaList, Mode, RunConfig, TerminalSpec};
use crate::output::{write_atomic, Svg};

/// Failure with its exit status: 1 for bad input, 2 when the numerics did
/// not deliver.
#[derive(Debug)]
pub enum RunError {
    Config(anyhow::Error),
    Solver(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Solver(_) => 2,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "configuration error: {e:#}"),
            RunError::Solver(e) => write!(f, "solver error: {e:#}"),
        }
    }
}

fn config<E: Into<anyhow::Error>>(e: E) -> RunError {
    RunError::Config(e.into())
}

fn solver_error(e: SolverError) -> RunError {
    match e {
        SolverError::Config(_)
        | SolverError::TooFewComponents(_)
        | SolverError::OriginOutside(_)
        | SolverError::Geometry(GeometryError::UnknownComponent(_)) => RunError::Config(e.into()),
        other => RunError::Solver(other.into()),
    }
}

#[derive(Debug)]
pub struct Outcome {
    /// 0, or 2 when a solve finished without converging.
    pub exit_code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Level {
    label: String,
    v: ShiftedPotential,
    chart: DomainChart,
}

fn potential(cfg: &RunConfig) -> Result<Potential, RunError> {
    let u = cfg.potential.build().map_err(config)?;
    if u.dim() != 2 {
        return Err(config(anyhow!("the command line works in the plane; potential has dimension {}", u.dim())));
    }
    Ok(u)
}

fn level(cfg: &RunConfig) -> Result<Level, RunError> {
    let u = potential(cfg)?;
    let v = shift(&u, cfg.alpha);
    let spec = cfg.grid_spec();
    let cps = find_critical_points(&v, &cfg.bbox, &CriticalPointOptions::default()).map_err(config)?;
    let seed = default_seed(&v, &spec).map_err(config)?;
    let chart = extract_domain(&v, &seed, &spec, &cps).map_err(config)?;
    let chart = attach_critical_points(chart, &cps, 2.0 * spec.cell_diag());
    Ok(Level { label: format!("{} at alpha = {}", u.label(), cfg.alpha), v, chart })
}

struct Writer<'a> {
    cfg: &'a RunConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let p = write_atomic(&self.cfg.out, name, bytes).map_err(config)?;
        self.files.push(p);
        Ok(())
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    match &cfg.mode {
        Mode::Chart => run_chart(cfg),
        Mode::Solve { symmetric, source } => run_solve(cfg, *symmetric, *source),
        Mode::Sweep(list) => run_sweep(cfg, list),
        Mode::Oracle { source, target } => run_oracle(cfg, source, target),
    }
}

fn chart_summary(chart: &DomainChart) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "components: {}", chart.components.len());
    for c in &chart.components {
        let pts: Vec<String> = c
            .critical_points
            .iter()
            .map(|&k| {
                let p = &chart.critical_points[k].location;
                format!("({:.6}, {:.6})", p[0], p[1])
            })
            .collect();
        let _ = writeln!(
            s,
            "  component {}: diameter {:.6}, {} nodes{}{}",
            c.id,
            c.diameter,
            c.polyline.len(),
            if c.is_singleton { ", singleton" } else { "" },
            if pts.is_empty() { String::new() } else { format!(", critical points {}", pts.join(" ")) }
        );
    }
    if chart.components.len() > 1 {
        let _ = writeln!(s, "gap matrix:");
        for row in &chart.gap_matrix {
            let r: Vec<String> = row.iter().map(|g| format!("{g:.6}")).collect();
            let _ = writeln!(s, "  {}", r.join(" "));
        }
    }
    if chart.touches_bbox {
        let _ = writeln!(s, "note: the domain reaches the bounding box");
    }
    for w in &chart.warnings {
        let _ = writeln!(s, "warning: {w}");
    }
    s
}

fn run_chart(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let lv = level(cfg)?;
    let mut w = Writer { cfg, files: Vec::new() };
    if cfg.formats.json {
        w.put("chart.json", lv.chart.to_json().as_bytes())?;
    }
    if cfg.formats.svg {
        w.put("chart.svg", Svg::new(&lv.chart).finish(&lv.label).as_bytes())?;
    }
    Ok(Outcome { exit_code: 0, summary: format!("{}\n{}", lv.label, chart_summary(&lv.chart)), files: w.files })
}

fn fmt_time(t: Option<f64>) -> String {
    t.map_or_else(|| "inf".to_string(), |t| format!("{t:.6}"))
}

fn solve_summary(c: &ClassifiedOrbit, r: &SolveResult) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "kind: {}", c.kind);
    let _ = writeln!(s, "jacobi: {:.10}", c.jacobi_value);
    let _ = writeln!(s, "period: {}", c.period.map_or_else(|| "inf".to_string(), |p| format!("{p:.6}")));
    let _ = writeln!(s, "t_minus: {}  t_plus: {}", fmt_time(c.orbit.t_minus.value()), fmt_time(c.orbit.t_plus.value()));
    let _ = writeln!(s, "endpoints: {:?} -> {:?}", c.endpoint_kinds[0], c.endpoint_kinds[1]);
    let _ = writeln!(
        s,
        "energy residual: {:.3e} (relative {:.3e})  newton residual: {:.3e}",
        c.orbit.energy_residual.absolute, c.orbit.energy_residual.relative, c.orbit.newton_residual
    );
    let _ = writeln!(s, "converged: {}  iterations: {}  nodes: {}", r.converged, r.iterations, r.path.nodes.len());
    if r.leaves_bbox {
        let _ = writeln!(s, "warning: the orbit leaves the bounding box");
    }
    s
}

fn run_solve(cfg: &RunConfig, symmetric: bool, source: Option<usize>) -> Result<Outcome, RunError> {
    let lv = level(cfg)?;
    let (v, chart) = (&lv.v, &lv.chart);
    let origin = [0.0, 0.0];
    let (mode, result) = match (symmetric, source) {
        (true, _) => ("symmetric", solve_symmetric(v, chart, &cfg.solver).map_err(solver_error)?),
        (false, Some(s)) => ("connecting", solve_connecting(v, chart, s, &cfg.solver).map_err(solver_error)?.best),
        (false, None) if v.value(&origin) > 0.0 => ("symmetric", solve_symmetric(v, chart, &cfg.solver).map_err(solver_error)?),
        (false, None) => {
            let (s, _) = chart.nearest_component(&origin).ok_or_else(|| config(anyhow!("the chart has no boundary component")))?;
            ("connecting", solve_connecting(v, chart, s, &cfg.solver).map_err(solver_error)?.best)
        }
    };
    let c = classify(&result, chart, v).map_err(|e| RunError::Solver(e.into()))?;

    let mut w = Writer { cfg, files: Vec::new() };
    if cfg.formats.csv {
        w.put("orbit.csv", c.orbit.to_csv_string(v).as_bytes())?;
        if let Some(ext) = &c.extended {
            w.put("orbit_extended.csv", ext.to_csv_string(v).as_bytes())?;
        }
    }
    if cfg.formats.json {
        let doc = serde_json::json!({
            "potential": lv.label,
            "alpha": cfg.alpha,
            "mode": mode,
            "summary": c.summary_json(),
            "solve": result.to_json_value(),
            "orbit": c.orbit.to_json_value(),
            "extended": c.extended.as_ref().map(|e| e.to_json_value()),
        });
        w.put("orbit.json", serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
        w.put("chart.json", chart.to_json().as_bytes())?;
    }
    if cfg.formats.svg {
        let mut svg = Svg::new(chart);
        if let Some(ext) = &c.extended {
            svg.orbit(&ext.nodes, "gray", true);
        }
        svg.orbit(&c.orbit.nodes, "black", false);
        svg.marker(c.orbit.nodes.last().expect("nonempty"), "black");
        w.put("orbit.svg", svg.finish(&format!("{} ({})", lv.label, c.kind)).as_bytes())?;
    }
    let summary = format!("{} ({mode})\n{}", lv.label, solve_summary(&c, &result));
    Ok(Outcome { exit_code: if result.converged { 0 } else { 2 }, summary, files: w.files })
}

fn run_sweep(cfg: &RunConfig, list: &AlphaList) -> Result<Outcome, RunError> {
    let u = potential(cfg)?;
    let opts = SweepOptions {
        bbox: cfg.bbox.clone(),
        resolution: cfg.grid,
        solver: cfg.solver.clone(),
        critical: CriticalPointOptions::default(),
    };
    let alphas = match list {
        AlphaList::Values(a) => a.clone(),
        AlphaList::Auto => {
            let (lo, hi) = regime_thresholds(&u, &cfg.bbox, &opts.critical).map_err(config)?;
            auto_alphas(lo, hi)
        }
    };
    let table = bifurcation_sweep(&u, &alphas, &opts);
    let mut w = Writer { cfg, files: Vec::new() };
    let csv = table.to_csv_string();
    if cfg.formats.csv {
        w.put("sweep.csv", csv.as_bytes())?;
    }
    if cfg.formats.json {
        w.put("sweep.json", table.to_json().as_bytes())?;
    }
    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    let mut summary = format!("{} sweep over {} alpha values\n{csv}", u.label(), alphas.len());
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        let _ = writeln!(summary, "alpha = {}: {}", r.alpha, r.error.as_deref().unwrap_or(""));
    }
    Ok(Outcome { exit_code: if failed > 0 { 2 } else { 0 }, summary, files: w.files })
}

fn terminal(t: &TerminalSpec, lv: &Level) -> Result<Terminal, RunError> {
    Ok(match t {
        TerminalSpec::Origin => {
            let v0 = lv.v.value(&[0.0, 0.0]);
            if v0.is_nan() || v0 <= 0.0 {
                return Err(config(anyhow!("the origin is outside the domain (V(0) = {v0})")));
            }
            Terminal::Point(vec![0.0, 0.0])
        }
        TerminalSpec::Component(id) => {
            let c = lv.chart.component(*id).map_err(config)?;
            if c.is_singleton {
                Terminal::Point(c.polyline[0].clone())
            } else {
                Terminal::Component(*id)
            }
        }
    })
}

fn run_oracle(cfg: &RunConfig, source: &TerminalSpec, target: &TerminalSpec) -> Result<Outcome, RunError> {
    let lv = level(cfg)?;
    let (s, t) = (terminal(source, &lv)?, terminal(target, &lv)?);
    let o = grid_geodesic_oracle(&lv.v, &lv.chart, &s, &t, &cfg.grid_spec()).map_err(solver_error)?;
    let mut w = Writer { cfg, files: Vec::new() };
    if cfg.formats.json {
        let doc = serde_json::json!({
            "potential": lv.label,
            "alpha": cfg.alpha,
            "grid": cfg.grid,
            "value": o.value,
            "path": o.path,
        });
        w.put("oracle.json", serde_json::to_string_pretty(&doc).expect("json").as_bytes())?;
    }
    if cfg.formats.svg {
        let mut svg = Svg::new(&lv.chart);
        svg.orbit(&o.path, "darkgreen", false);
        w.put("oracle.svg", svg.finish(&format!("{} grid geodesic", lv.label)).as_bytes())?;
    }
    let summary =
        format!("{}\ngrid geodesic on {}x{}: jacobi {:.10} over {} nodes\n", lv.label, cfg.grid[0], cfg.grid[1], o.value, o.path.len());
    Ok(Outcome { exit_code: 0, summary, files: w.files })
}
