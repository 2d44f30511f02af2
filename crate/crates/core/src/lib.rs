//! Quasi-static manipulation planning over potential-driven systems.
//!
//! A mechanical system with internal state `z` and agent controls `u` is
//! described by a potential `W(z, u)` with analytic derivative blocks. This
//! crate finds and classifies the equilibria of `W` over fixed controls,
//! builds the control-space metric induced by the squared Schur-complement
//! Hessian, lifts control grids onto the set of stable equilibria, and plans
//! minimum-effort quasi-static paths over the lift.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion CLI crate
//! carries all IO and file formats.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod equilibrium;
pub mod error;
pub mod graph;
pub mod metric;
pub mod pendulum;
pub mod potential;

pub use equilibrium::{
    classify_stability, find_equilibria, solve_equilibrium, tangent_map, tangent_step,
    EquilibriumPoint, SolverConfig, Stability,
};
pub use error::{Error, Result};
pub use graph::{
    build_bottom_grid, lift, match_branch, shortest_path, BottomGraph, LiftConfig,
    MultiBranchPath, TopEdge, TopGraph, TopNode,
};
pub use metric::{
    control_force, control_hessian, path_cost, path_length, quadratic_cost, squared_hessian,
    ControlMetric, RotatedControls,
};
pub use pendulum::{
    frames, optimal_control_curve, optimal_lambda, piecewise_action, ContactPendulum, CurveSample,
    Frame2D, LambdaCurve, LinearSpringPendulum,
};
pub use potential::{
    evaluate_full, fd_check_derivatives, Configuration, DerivativeReport, PotentialOutput,
    PotentialSystem,
};
