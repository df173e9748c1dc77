//! Benchmark fixtures shared by the criterion benches.

use orbitforge::{
    attach_critical_points, extract_domain, find_critical_points, shift, BBox, CriticalPointOptions, DomainChart, GridSpec, Params,
    Potential, ShiftedPotential,
};

pub fn ex2() -> ShiftedPotential {
    shift(&Potential::builtin("ex2", &Params::new()).unwrap(), -0.5)
}

pub fn disk() -> ShiftedPotential {
    shift(&Potential::builtin("disk", &Params::new()).unwrap(), 0.0)
}

/// The ex2 polynomial written out, to compare the expression evaluator with
/// the built-in.
pub fn ex2_expr() -> ShiftedPotential {
    let u = Potential::from_expr("0.5*(1-x1^2)^2 + 0.5*(1-4*x2^2)^2", &Params::new(), Some(2)).unwrap();
    shift(&u, -0.5)
}

pub fn chart(v: &ShiftedPotential, bbox: BBox, n: [usize; 2]) -> DomainChart {
    let spec = GridSpec::new(bbox, n[0], n[1]);
    let cps = find_critical_points(v, &spec.bbox, &CriticalPointOptions::default()).unwrap();
    let c = extract_domain(v, &[0.0, 0.0], &spec, &cps).unwrap();
    attach_critical_points(c, &cps, 2.0 * spec.cell_diag())
}
