//! Bounded weak solutions of the weighted quasi-linear elliptic system
//!
//! ```text
//! -e^{-f(U)} div(e^{f(U)} ∇U) + ½ f'(U) |∇U|^2 = 0   in Ω,   U = φ on ∂Ω
//! ```
//!
//! computed by minimizing the discrete energy `∫ e^{f(U)} |DU|^2` over the
//! box-constrained set `{ -C <= U <= C, U = φ on ∂Ω }`.
//!
//! Modules:
//!
//! - [`grid`]: lattices over boxes, masked boxes and half-balls; fields.
//! - [`weights`]: weights `f` with `f'(U) = -U g(U)`.
//! - [`energy`]: energy, exact gradient, strong residual, ellipticity.
//! - [`optimizer`]: projected Barzilai-Borwein descent with Armijo search.
//! - [`oracle`]: scalar solutions through the half-weight (Cole-Hopf type)
//!   transform, plus a conjugate-gradient Poisson solver.
//! - [`sphere`]: harmonic maps into `S^N` through stereographic charts.
//! - [`halfspace`]: half-ball exhaustion of the half-space problem.
//! - [`cli`]: problem files, field dumps and summaries for the binary.
//!
//! See the `examples/` directory for one runnable program per capability.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod energy;
pub mod error;
pub mod grid;
pub mod halfspace;
mod lowdisc;
pub mod optimizer;
pub mod oracle;
pub mod sphere;
pub mod weights;

pub use energy::{
    el_residual, ellipticity_bounds, energy, grad_energy, gradient_check, CoefficientTensor,
    EnergyValue, GradientCheck,
};
pub use error::{Error, Result};
pub use grid::{
    build_grid, restrict, sample_boundary, BoundaryData, DomainSpec, Field, Grid, NodeClass,
};
pub use optimizer::{
    kkt_residual, minimize, project_admissible, AdmissibleSet, Init, SolveOptions, SolveReport,
    StepRule,
};
pub use oracle::{
    halfweight_table, poisson_dirichlet, solve_scalar_exact, solve_scalar_source, SourceField,
    TransformTable,
};
pub use weights::{eval_weight, make_weight, validate_weight, Weight, WeightSpec};
