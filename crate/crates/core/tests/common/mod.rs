#![allow(dead_code)]

use orbitforge::{attach_critical_points, extract_domain, find_critical_points, BBox, DomainChart, GridSpec};
use orbitforge::{shift, CriticalPointOptions, Params, Potential, ShiftedPotential};

pub fn ex2() -> ShiftedPotential {
    shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5)
}

pub fn disk() -> ShiftedPotential {
    shift(&Potential::builtin("disk", &Params::new()).unwrap(), 0.0)
}

pub fn perturbed() -> Potential {
    Potential::builtin("perturbed", &Params::new()).unwrap()
}

pub fn chart_for(v: &ShiftedPotential, bbox: BBox, nx: usize, ny: usize, seed: &[f64]) -> DomainChart {
    let cps = find_critical_points(v, &bbox, &CriticalPointOptions::default()).unwrap();
    let spec = GridSpec::new(bbox, nx, ny);
    let chart = extract_domain(v, seed, &spec, &cps).unwrap();
    attach_critical_points(chart, &cps, 2.0 * spec.cell_diag())
}

/// Samples of `f(t)` on `m + 1` uniform times in `[a, b]`.
pub fn sample(f: impl Fn(f64) -> Vec<f64>, a: f64, b: f64, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let times: Vec<f64> = (0..=m).map(|k| a + (b - a) * k as f64 / m as f64).collect();
    (times.iter().map(|&t| f(t)).collect(), times)
}

pub fn u1(t: f64) -> Vec<f64> {
    vec![t.tanh(), 0.0]
}

pub fn u2(t: f64) -> Vec<f64> {
    vec![0.0, 0.5 * (2.0 * t).tanh()]
}

/// Classical RK4 for `ü = ∇V(u)`, returning positions at every step.
pub fn rk4(v: &ShiftedPotential, x0: &[f64], p0: &[f64], dt: f64, steps: usize) -> Vec<Vec<f64>> {
    let n = x0.len();
    let f = |x: &[f64], p: &[f64]| -> (Vec<f64>, Vec<f64>) { (p.to_vec(), v.gradient(x)) };
    let mut x = x0.to_vec();
    let mut p = p0.to_vec();
    let mut out = vec![x.clone()];
    let add = |a: &[f64], b: &[f64], s: f64| -> Vec<f64> { a.iter().zip(b).map(|(u, w)| u + s * w).collect() };
    for _ in 0..steps {
        let (k1x, k1p) = f(&x, &p);
        let (k2x, k2p) = f(&add(&x, &k1x, dt / 2.0), &add(&p, &k1p, dt / 2.0));
        let (k3x, k3p) = f(&add(&x, &k2x, dt / 2.0), &add(&p, &k2p, dt / 2.0));
        let (k4x, k4p) = f(&add(&x, &k3x, dt), &add(&p, &k3p, dt));
        for i in 0..n {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            p[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
        }
        out.push(x.clone());
    }
    out
}
