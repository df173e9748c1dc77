//! Zero-energy connecting orbits of `ü = U_x(u)` computed as geodesics of the
//! Jacobi metric `√(2V)|dx|` on the positivity domain of `V = U + α`.
//!
//! Pipeline: [`potential`] (expressions, built-ins, critical points) →
//! [`geometry`] (domain chart) → [`solver`] (Jacobi minimization) →
//! [`classify`] (orbit kind, reflections, energy sweep).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod classify;
pub mod expr;
pub mod functional;
pub mod geometry;
pub mod linalg;
pub mod potential;
pub mod solver;
pub mod space;

pub use classify::{
    analyze_level, auto_alphas, bifurcation_sweep, classify, default_seed, extend_homoclinic, extend_odd, extend_periodic,
    extend_symmetric, regime_thresholds, ClassifiedOrbit, ClassifyError, EndpointKind, LevelAnalysis, OrbitKind, SweepOptions, SweepRow,
    SweepTable,
};
pub use expr::{parse, Expr, ExprError, Params};
pub use functional::{
    action, energy_residual, is_endpoint_time_infinite, jacobi, jacobi_action_gap, newton_residual, reparametrize, DiscretePath, EndTime,
    EndpointMode, FunctionalError, Residual, TimeContext, TimedOrbit,
};
pub use geometry::{
    attach_critical_points, connection_gate, extract_domain, project_to_boundary, BoundaryComponent, DomainChart, GeometryError, GridSpec,
    SignGrid,
};
pub use potential::{
    find_critical_points, shift, Builtin, CriticalPoint, CriticalPointOptions, Potential, PotentialError, ShiftedPotential, Smoothness,
};
pub use solver::{
    grid_geodesic_oracle, jacobi_distance_matrix, minimize_jacobi, seed_between_components, seed_path, solve_connecting, solve_symmetric,
    ConnectingOutcome, OracleResult, SolveConfig, SolveResult, SolverError, Terminal,
};
pub use space::{BBox, Point};
