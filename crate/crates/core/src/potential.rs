//! Potentials `U`, the energy shift `V_α = U + α`, and critical points.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, BoundExpr, Dual, ExprError, HyperDual, Params, Scalar};
use crate::linalg::{norm, SymMatrix};
use crate::space::{BBox, Point};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PotentialError {
    #[error("unknown built-in potential '{0}' (expected ex2, perturbed, disk or polar_oscillatory)")]
    UnknownBuiltin(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("potential '{0}' is only C0; Hessian-based features are unavailable")]
    NotSmooth(String),
}

/// Regularity class. `C0` potentials use finite-difference gradients and
/// have no Hessian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C2,
    C0,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Builtin {
    /// `½(1−x₁²)² + ½(1−4x₂²)²`
    Ex2,
    /// `2λ⁴x₁² + x₂² − 2λ²x₁x₂ − 3λ²x₁⁴ + x₁⁶`
    Perturbed { lambda: f64 },
    /// `1 − |x|²`
    Disk { dim: usize },
    /// `−r² + ½ tanh⁴(r) cos²(1/r) cos^{2k}(2θ)` in polar coordinates.
    PolarOscillatory { k: f64 },
}

pub const BUILTIN_NAMES: [&str; 4] = ["ex2", "perturbed", "disk", "polar_oscillatory"];

impl Builtin {
    pub fn describe(name: &str) -> Option<&'static str> {
        Some(match name {
            "ex2" => "0.5*(1-x1^2)^2 + 0.5*(1-4*x2^2)^2; four hyperbolic saddles on the level alpha=-1/2",
            "perturbed" => "2*lambda^4*x1^2 + x2^2 - 2*lambda^2*x1*x2 - 3*lambda^2*x1^4 + x1^6 (param lambda, default 0.5)",
            "disk" => "1 - |x|^2 (param dim, default 2)",
            "polar_oscillatory" => "-r^2 + 0.5*tanh(r)^4*cos(1/r)^2*cos(2*theta)^(2k) (param k, default 4)",
            _ => return None,
        })
    }

    fn dim(&self) -> usize {
        match self {
            Builtin::Disk { dim } => *dim,
            _ => 2,
        }
    }

    fn label(&self) -> String {
        match self {
            Builtin::Ex2 => "ex2".into(),
            Builtin::Perturbed { lambda } => format!("perturbed(lambda={lambda})"),
            Builtin::Disk { dim } => format!("disk(dim={dim})"),
            Builtin::PolarOscillatory { k } => format!("polar_oscillatory(k={k})"),
        }
    }

    /// Generic evaluation; used for AD derivatives and as the independent
    /// route against the hand-written derivatives below.
    pub fn eval_scalar<S: Scalar>(&self, x: &[S]) -> S {
        let c = S::constant;
        match self {
            Builtin::Ex2 => {
                let a = c(1.0) - x[0] * x[0];
                let b = c(1.0) - c(4.0) * x[1] * x[1];
                c(0.5) * a * a + c(0.5) * b * b
            }
            Builtin::Perturbed { lambda } => {
                let l2 = lambda * lambda;
                let (x1, x2) = (x[0], x[1]);
                c(2.0 * l2 * l2) * x1 * x1 + x2 * x2 - c(2.0 * l2) * x1 * x2 - c(3.0 * l2) * x1.powi(4) + x1.powi(6)
            }
            Builtin::Disk { .. } => x.iter().fold(c(1.0), |acc, &v| acc - v * v),
            Builtin::PolarOscillatory { k } => {
                let r2 = x[0] * x[0] + x[1] * x[1];
                if r2.re() < 1e-12 {
                    // perturbation is O(r⁴); drop it at the origin where θ is undefined
                    return -r2;
                }
                let r = r2.sqrt();
                let cos2t = (x[0] * x[0] - x[1] * x[1]) / r2;
                let ang = (cos2t * cos2t).powf(*k);
                let th = r.tanh();
                let osc = (c(1.0) / r).cos();
                -r2 + c(0.5) * th.powi(4) * osc * osc * ang
            }
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval_scalar(x)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Builtin::Ex2 => {
                out[0] = -2.0 * x[0] * (1.0 - x[0] * x[0]);
                out[1] = -8.0 * x[1] * (1.0 - 4.0 * x[1] * x[1]);
            }
            Builtin::Perturbed { lambda } => {
                let l2 = lambda * lambda;
                let (x1, x2) = (x[0], x[1]);
                out[0] = 4.0 * l2 * l2 * x1 - 2.0 * l2 * x2 - 12.0 * l2 * x1.powi(3) + 6.0 * x1.powi(5);
                out[1] = 2.0 * x2 - 2.0 * l2 * x1;
            }
            Builtin::Disk { .. } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -2.0 * v;
                }
            }
            Builtin::PolarOscillatory { .. } => ad_gradient_into(|y| self.eval_scalar(y), x, out),
        }
    }

    fn hessian(&self, x: &[f64]) -> SymMatrix {
        match self {
            Builtin::Ex2 => SymMatrix::diag(&[-2.0 + 6.0 * x[0] * x[0], -8.0 + 96.0 * x[1] * x[1]]),
            Builtin::Perturbed { lambda } => {
                let l2 = lambda * lambda;
                let x1 = x[0];
                let mut h = SymMatrix::zeros(2);
                h.set(0, 0, 4.0 * l2 * l2 - 36.0 * l2 * x1 * x1 + 30.0 * x1.powi(4));
                h.set(0, 1, -2.0 * l2);
                h.set(1, 1, 2.0);
                h
            }
            Builtin::Disk { dim } => SymMatrix::diag(&vec![-2.0; *dim]),
            Builtin::PolarOscillatory { .. } => ad_hessian(|y| self.eval_scalar(y), x),
        }
    }
}

/// Gradient by one dual pass per coordinate.
pub fn ad_gradient_into<F: Fn(&[Dual]) -> Dual>(f: F, x: &[f64], out: &mut [f64]) {
    let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    for i in 0..x.len() {
        seeded[i].du = 1.0;
        out[i] = f(&seeded).du;
        seeded[i].du = 0.0;
    }
}

/// Hessian by hyper-dual passes over the upper triangle.
pub fn ad_hessian<F: Fn(&[HyperDual]) -> HyperDual>(f: F, x: &[f64]) -> SymMatrix {
    let n = x.len();
    let mut h = SymMatrix::zeros(n);
    let mut seeded: Vec<HyperDual> = x.iter().map(|&v| HyperDual::constant(v)).collect();
    for i in 0..n {
        for j in i..n {
            seeded[i].e1 = 1.0;
            seeded[j].e2 = 1.0;
            h.set(i, j, f(&seeded).e12);
            seeded[i].e1 = 0.0;
            seeded[j].e2 = 0.0;
        }
    }
    h
}

enum Source {
    Builtin(Builtin),
    Expression { expr: BoundExpr, text: String },
}

/// A scalar field `U: ℝⁿ → ℝ` with gradient and (for C2 fields) Hessian.
///
/// Cheap to clone; the evaluator is shared.
#[derive(Clone)]
pub struct Potential {
    dim: usize,
    label: String,
    smoothness: Smoothness,
    source: Arc<Source>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential").field("label", &self.label).field("dim", &self.dim).field("smoothness", &self.smoothness).finish()
    }
}

impl Potential {
    /// Look up a built-in by name. Parameters: `lambda` for `perturbed`
    /// (default 0.5), `k` for `polar_oscillatory` (default 4), `dim` for
    /// `disk` (default 2).
    pub fn builtin(name: &str, params: &Params) -> Result<Potential, PotentialError> {
        let b = match name {
            "ex2" => Builtin::Ex2,
            "perturbed" => {
                let lambda = params.get("lambda").copied().unwrap_or(0.5);
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(PotentialError::BadParam(format!("lambda must be positive, got {lambda}")));
                }
                Builtin::Perturbed { lambda }
            }
            "disk" => {
                let dim = params.get("dim").copied().unwrap_or(2.0);
                if dim < 1.0 || dim.fract() != 0.0 {
                    return Err(PotentialError::BadParam(format!("dim must be a positive integer, got {dim}")));
                }
                Builtin::Disk { dim: dim as usize }
            }
            "polar_oscillatory" => {
                let k = params.get("k").copied().unwrap_or(4.0);
                if !(k >= 1.0 && k.is_finite()) {
                    return Err(PotentialError::BadParam(format!("k must be >= 1, got {k}")));
                }
                Builtin::PolarOscillatory { k }
            }
            other => return Err(PotentialError::UnknownBuiltin(other.to_string())),
        };
        Ok(Potential::from_builtin(b))
    }

    pub fn from_builtin(b: Builtin) -> Potential {
        Potential { dim: b.dim(), label: b.label(), smoothness: Smoothness::C2, source: Arc::new(Source::Builtin(b)) }
    }

    /// Build a potential from expression text. `dim` may raise the dimension
    /// above the largest variable index (e.g. a constant potential on ℝ²).
    /// Expressions containing `abs` are treated as C0.
    pub fn from_expr(text: &str, params: &Params, dim: Option<usize>) -> Result<Potential, PotentialError> {
        let parsed = expr::parse(text)?;
        let bound = parsed.bind(params)?;
        let dim = dim.unwrap_or(0).max(parsed.dim());
        if dim == 0 {
            return Err(PotentialError::BadParam("expression has no variables; pass a dimension".into()));
        }
        let smoothness = if bound.uses_abs() { Smoothness::C0 } else { Smoothness::C2 };
        Ok(Potential {
            dim,
            label: parsed.to_string(),
            smoothness,
            source: Arc::new(Source::Expression { expr: bound, text: text.to_string() }),
        })
    }

    pub fn with_smoothness(mut self, s: Smoothness) -> Self {
        self.smoothness = s;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn builtin_kind(&self) -> Option<&Builtin> {
        match &*self.source {
            Source::Builtin(b) => Some(b),
            Source::Expression { .. } => None,
        }
    }

    pub fn expression_text(&self) -> Option<&str> {
        match &*self.source {
            Source::Expression { text, .. } => Some(text),
            Source::Builtin(_) => None,
        }
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64, PotentialError> {
        match &*self.source {
            Source::Builtin(b) => Ok(b.value(x)),
            Source::Expression { expr, .. } => Ok(expr.eval(x)?),
        }
    }

    /// Value, or NaN where the expression is undefined.
    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        match &*self.source {
            Source::Builtin(b) => b.value(x),
            Source::Expression { expr, .. } => expr.eval(x).unwrap_or(f64::NAN),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        self.gradient_into(x, &mut g);
        g
    }

    /// Gradient written into `out` (NaN entries on domain errors).
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        if self.smoothness == Smoothness::C0 {
            self.fd_gradient_into(x, out);
            return;
        }
        match &*self.source {
            Source::Builtin(b) => b.gradient_into(x, out),
            Source::Expression { expr, .. } => {
                let mut seeded: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
                for i in 0..x.len() {
                    seeded[i].du = 1.0;
                    out[i] = expr.eval_scalar(&seeded).map(|d| d.du).unwrap_or(f64::NAN);
                    seeded[i].du = 0.0;
                }
            }
        }
    }

    fn fd_gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let mut y = x.to_vec();
        for i in 0..x.len() {
            let h = 1e-6 * (1.0 + x[i].abs());
            y[i] = x[i] + h;
            let fp = self.value(&y);
            y[i] = x[i] - h;
            let fm = self.value(&y);
            y[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix, PotentialError> {
        if self.smoothness == Smoothness::C0 {
            return Err(PotentialError::NotSmooth(self.label.clone()));
        }
        match &*self.source {
            Source::Builtin(b) => Ok(b.hessian(x)),
            Source::Expression { expr, .. } => Ok(expr.hessian(x)?),
        }
    }

    /// `U(−x) = U(x)` at the given sample points, to `tol`.
    pub fn is_antipodal_symmetric(&self, samples: &[Point], tol: f64) -> bool {
        samples.iter().all(|x| {
            let mx: Vec<f64> = x.iter().map(|v| -v).collect();
            let (a, b) = (self.value(x), self.value(&mx));
            (a - b).abs() <= tol * (1.0 + a.abs())
        })
    }
}

/// `V_α = U + α`. Derivatives are delegated to the base unchanged.
#[derive(Debug, Clone)]
pub struct ShiftedPotential {
    pub base: Potential,
    pub alpha: f64,
}

pub fn shift(base: &Potential, alpha: f64) -> ShiftedPotential {
    ShiftedPotential { base: base.clone(), alpha }
}

impl ShiftedPotential {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    #[inline]
    pub fn value(&self, x: &[f64]) -> f64 {
        self.base.value(x) + self.alpha
    }

    pub fn try_value(&self, x: &[f64]) -> Result<f64, PotentialError> {
        Ok(self.base.try_value(x)? + self.alpha)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.base.gradient(x)
    }

    #[inline]
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.base.gradient_into(x, out)
    }

    pub fn hessian(&self, x: &[f64]) -> Result<SymMatrix, PotentialError> {
        self.base.hessian(x)
    }

    pub fn smoothness(&self) -> Smoothness {
        self.base.smoothness()
    }

    pub fn label(&self) -> String {
        format!("{} + ({})", self.base.label(), self.alpha)
    }
}

/// A zero of `∇V` with its Hessian classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Point,
    pub grad_norm: f64,
    /// Hessian eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub hyperbolic: bool,
    /// Number of negative eigenvalues.
    pub morse_index: usize,
    /// `V` at the point (shifted value).
    pub potential_value: f64,
}

impl CriticalPoint {
    pub fn is_local_min(&self) -> bool {
        self.eigenvalues.iter().all(|&e| e > 0.0)
    }

    pub fn is_saddle(&self) -> bool {
        self.eigenvalues.iter().any(|&e| e > 0.0) && self.eigenvalues.iter().any(|&e| e < 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointOptions {
    /// Seeds per axis on a tensor grid over the box.
    pub seeds_per_axis: usize,
    pub newton_tol: f64,
    pub degeneracy_tol: f64,
    /// Absolute dedupe radius; `None` means `1e-6 × bbox diagonal`.
    pub dedupe_radius: Option<f64>,
    pub max_iter: usize,
}

impl Default for CriticalPointOptions {
    fn default() -> Self {
        CriticalPointOptions { seeds_per_axis: 25, newton_tol: 1e-10, degeneracy_tol: 1e-6, dedupe_radius: None, max_iter: 80 }
    }
}

/// Newton from `x0` on `∇V = 0`; `None` if it fails, leaves the box or
/// meets a singular Hessian.
/// Damped Newton on `∇V = 0` from `x0`; `None` if it leaves the box or stalls.
pub fn newton_critical(v: &ShiftedPotential, bbox: &BBox, x0: &[f64], opts: &CriticalPointOptions) -> Option<Point> {
    let max_step = 0.25 * bbox.diag();
    let mut x = x0.to_vec();
    let mut g = vec![0.0; x.len()];
    for _ in 0..opts.max_iter {
        v.gradient_into(&x, &mut g);
        let gn = norm(&g);
        if !gn.is_finite() {
            return None;
        }
        if gn <= opts.newton_tol {
            return Some(x);
        }
        let h = v.hessian(&x).ok()?;
        let mut step = h.solve(&g)?;
        let sn = norm(&step);
        if sn > max_step {
            step.iter_mut().for_each(|s| *s *= max_step / sn);
        }
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi -= si;
        }
        if !bbox.contains(&x) {
            return None;
        }
    }
    v.gradient_into(&x, &mut g);
    (norm(&g) <= opts.newton_tol).then_some(x)
}

/// Classify a converged location.
pub fn classify_point(v: &ShiftedPotential, x: Point, degeneracy_tol: f64) -> Result<CriticalPoint, PotentialError> {
    let h = v.hessian(&x)?;
    let eigenvalues = h.eigenvalues();
    let hyperbolic = eigenvalues.iter().all(|e| e.abs() > degeneracy_tol);
    let morse_index = eigenvalues.iter().filter(|&&e| e < 0.0).count();
    Ok(CriticalPoint { grad_norm: norm(&v.gradient(&x)), potential_value: v.value(&x), location: x, eigenvalues, hyperbolic, morse_index })
}

fn seed_grid(bbox: &BBox, per_axis: usize) -> Vec<Point> {
    let n = bbox.dim();
    let per_axis = per_axis.max(1);
    let total = per_axis.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            (0..n)
                .map(|axis| {
                    let k = idx % per_axis;
                    idx /= per_axis;
                    let t = (k as f64 + 0.5) / per_axis as f64;
                    bbox.lo[axis] + t * (bbox.hi[axis] - bbox.lo[axis])
                })
                .collect()
        })
        .collect()
}

/// Locate the critical points of `V` inside `bbox` by Newton iteration from
/// a tensor grid of seeds. Non-convergent seeds are dropped; results are
/// deduplicated and sorted lexicographically by location.
pub fn find_critical_points(v: &ShiftedPotential, bbox: &BBox, opts: &CriticalPointOptions) -> Result<Vec<CriticalPoint>, PotentialError> {
    if v.smoothness() != Smoothness::C2 {
        return Err(PotentialError::NotSmooth(v.base.label().to_string()));
    }
    let radius = opts.dedupe_radius.unwrap_or(1e-6 * bbox.diag());
    let found: Vec<Point> = seed_grid(bbox, opts.seeds_per_axis).par_iter().filter_map(|s| newton_critical(v, bbox, s, opts)).collect();

    let mut accepted: Vec<Point> = Vec::new();
    for x in found {
        if accepted.iter().any(|a| crate::linalg::dist(a, &x) <= radius) {
            continue;
        }
        accepted.push(x);
    }
    accepted.sort_by(|a, b| a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal));
    for (i, a) in accepted.iter().enumerate() {
        for b in &accepted[i + 1..] {
            if crate::linalg::dist(a, b) <= 3.0 * radius {
                log::warn!("critical points {a:?} and {b:?} are within 3x the dedupe radius");
            }
        }
    }
    accepted.into_iter().map(|x| classify_point(v, x, opts.degeneracy_tol)).collect()
}
