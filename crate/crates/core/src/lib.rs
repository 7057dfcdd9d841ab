//! Numerical solver and asymptotic predictions for the radially symmetric
//! charge-conserving Poisson-Boltzmann boundary-layer problem
//!
//! ```text
//! eps^2 (g r^{N-1} U')' / r^{N-1} = (R^N / N) (A e^{pU} / I_p - B e^{-qU} / I_q)
//! I_p = int_0^R s^{N-1} e^{pU} ds,  I_q = int_0^R s^{N-1} e^{-qU} ds
//! ```
//!
//! on `[0, R]` with `U'(0) = 0` and the boundary flux fixed by total charge.
//!
//! - [`model`]: parameters and validation
//! - [`mesh`]: boundary-graded radial meshes and quadrature
//! - [`solver`]: finite-volume discretization, Newton and continuation
//! - [`asymptotics`]: closed-form predictions as `eps -> 0`
//! - [`diagnostics`]: identities, bounds and comparison reports

// negated comparisons are how NaN inputs get rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod model;
pub mod solver;

pub use error::{Error, ParamViolation, Result};
pub use mesh::{build_mesh, Mesh, MeshSpec, Weight};
pub use model::{
    derived_constants, validate_params, DielectricProfile, ModelParams, RawParams, Regime,
};
pub use solver::{
    assemble_system, evaluate_solution, robin_transform, solve_continuation, solve_newton, Gauge,
    MeshPolicy, NewtonOptions, Seed, Solution,
};
