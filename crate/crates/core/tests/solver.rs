mod common;

use common::*;
use orbitforge::{
    connection_gate, default_seed, grid_geodesic_oracle, jacobi, minimize_jacobi, regime_thresholds, reparametrize, shift,
    solve_connecting, solve_symmetric, BBox, CriticalPointOptions, GridSpec, SolveConfig, Terminal, TimeContext,
};
use std::f64::consts::{PI, SQRT_2};

fn perturbed_bbox() -> BBox {
    BBox::planar(-1.2, 1.2, -0.6, 0.6)
}

#[test]
fn disk_radial_value_and_time() {
    let v = disk();
    let chart = chart_for(&v, BBox::planar(-1.5, 1.5, -1.5, 1.5), 64, 64, &[0.0, 0.0]);
    let cfg = SolveConfig { nodes: 256, ..Default::default() };
    let r = solve_symmetric(&v, &chart, &cfg).unwrap();
    assert!((r.jacobi_value - SQRT_2 * PI / 4.0).abs() < 1e-3, "{}", r.jacobi_value);
    assert!(r.path.nodes[1..r.path.nodes.len() - 1].iter().all(|x| v.value(x) > 0.0));
    let orbit = reparametrize(&r.path, &v, &TimeContext::NONE).unwrap();
    let tp = orbit.t_plus.value().unwrap();
    assert!((tp - PI / (2.0 * SQRT_2)).abs() < 1e-2, "{tp}");
}

#[test]
fn ex2_symmetric_is_squeezed_by_the_oracle() {
    let v = ex2();
    let bbox = BBox::planar(-1.5, 1.5, -1.0, 1.0);
    let chart = chart_for(&v, bbox.clone(), 128, 128, &[0.0, 0.0]);
    let r = solve_symmetric(&v, &chart, &SolveConfig { nodes: 192, ..Default::default() }).unwrap();
    assert!(r.converged);
    let spec = GridSpec::new(bbox, 384, 256);
    let o = grid_geodesic_oracle(&v, &chart, &Terminal::Point(vec![0.0, 0.0]), &Terminal::Component(0), &spec).unwrap();
    assert!(r.jacobi_value <= o.value + 1e-6, "{} vs {}", r.jacobi_value, o.value);
    assert!(o.value - r.jacobi_value < 0.02, "{} vs {}", r.jacobi_value, o.value);
    // a straight ray to a far wall point is worse
    let far =
        orbitforge::seed_path(&v, &[0.0, 0.0], orbitforge::EndpointMode::AtOrigin, &[0.999, 0.0], orbitforge::EndpointMode::Fixed, 192)
            .unwrap();
    assert!(jacobi(&far, &v) > r.jacobi_value);
}

#[test]
fn rerun_without_regularization_is_a_fixed_point() {
    let v = ex2();
    let chart = chart_for(&v, BBox::planar(-1.5, 1.5, -1.0, 1.0), 128, 128, &[0.0, 0.0]);
    let r = solve_symmetric(&v, &chart, &SolveConfig { nodes: 128, ..Default::default() }).unwrap();
    let cfg = SolveConfig { nodes: 128, eps_schedule: vec![0.0], ..Default::default() };
    let again = minimize_jacobi(&v, &chart, &r.path, &cfg).unwrap();
    assert!(again.jacobi_value <= r.jacobi_value + 1e-9);
    assert!((again.jacobi_value - r.jacobi_value).abs() < 1e-6 * r.jacobi_value, "{} vs {}", again.jacobi_value, r.jacobi_value);
}

#[test]
fn two_wall_targets_are_mirror_images() {
    let u = perturbed();
    let (_, hi) = regime_thresholds(&u, &perturbed_bbox(), &CriticalPointOptions::default()).unwrap();
    let v = shift(&u, -0.5 * hi);
    let seed = default_seed(&v, &GridSpec::new(perturbed_bbox(), 256, 128)).unwrap();
    let chart = chart_for(&v, perturbed_bbox(), 256, 128, &seed);
    assert_eq!(chart.components.len(), 3);
    let cfg = SolveConfig { nodes: 96, ..Default::default() };
    let out = solve_connecting(&v, &chart, 1, &cfg).unwrap();
    let (d0, d2) = (out.distance_row[0], out.distance_row[2]);
    assert!(d0.is_finite() && d2.is_finite());
    assert!((d0 - d2).abs() < 1e-6 * d0.max(1.0), "{d0} vs {d2}");
    // the chosen target is the cheapest
    let min = out.distance_row.iter().enumerate().filter(|(j, _)| *j != 1).map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best.jacobi_value, min);
    assert_eq!(out.best.source_component, Some(1));
    let p = &out.best.path;
    assert!(p.nodes[1..p.nodes.len() - 1].iter().all(|x| v.value(x) > 0.0));
    assert!(v.value(p.first()).abs() < 1e-10 && v.value(p.last()).abs() < 1e-10);
}

#[test]
fn gate_holds_for_the_middle_curve() {
    let u = perturbed();
    let (_, hi) = regime_thresholds(&u, &perturbed_bbox(), &CriticalPointOptions::default()).unwrap();
    let v = shift(&u, -0.5 * hi);
    let seed = default_seed(&v, &GridSpec::new(perturbed_bbox(), 256, 128)).unwrap();
    let chart = chart_for(&v, perturbed_bbox(), 256, 128, &seed);
    let d = orbitforge::jacobi_distance_matrix(&v, &chart, &SolveConfig { nodes: 96, ..Default::default() }).unwrap();
    assert!(connection_gate(&d, 1, 0));
    assert!(connection_gate(&d, 1, 2));
    // the outer pair has to pass the middle curve
    assert!(!connection_gate(&d, 0, 2));
}
