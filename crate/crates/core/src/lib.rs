//! Hybrid discontinuous Galerkin solver for two-dimensional second-order
//! elliptic interface problems with prescribed jumps of the solution and of
//! the conormal flux across a polygonal interface.
//!
//! The discrete unknowns are element polynomials plus single-valued edge
//! traces; the element unknowns are eliminated element by element (static
//! condensation) and the symmetric positive definite trace system is solved
//! directly or by conjugate gradients. The crate also ships the error
//! norms and convergence-rate tooling used to study the method, and dense
//! eigenvalue certificates for coercivity, boundedness, norm equivalence,
//! and the local inverse/trace inequalities.
//!
//! Modules:
//! - [`mesh`]: interface-aligned uniform meshes, edge classification
//! - [`fem`]: reference bases, element maps, quadrature
//! - [`problem`]: PDE data and the built-in presets
//! - [`assembly`]: local and global systems of the two scheme variants
//! - [`solver`]: condensation, direct/CG solves, recovery
//! - [`norms`]: error measures, discrete norms, convergence records
//! - [`verify`]: eigenvalue certificates on concrete meshes

pub mod assembly;
pub mod error;
pub mod fem;
pub mod linalg;
mod local;
pub mod mesh;
pub mod norms;
pub mod problem;
pub mod solver;
pub mod verify;

pub use assembly::{
    assemble, local_system, local_systems, sigma_factor, DofMap, GlobalSystem, LocalSystem,
    Penalty, SchemeParams, SchemeVariant,
};
pub use error::{Error, Result};
pub use fem::{BasisSet, ElementKind, QuadRule1d, QuadRule2d};
pub use mesh::{build_mesh, mesh_metrics, Edge, EdgeClass, Element, Geometry, Mesh, MeshMetrics};
pub use norms::{
    h1_broken_error, hdg_norm, l2_error, rates, ConvergenceRecord, ErrorTarget, HdgNormKind,
    RateRow,
};
pub use problem::{preset, CoefficientField, ExactSolution, Preset, PresetName, ProblemData};
pub use solver::{
    condense, exact_interpolant, full_residual, recover, solve, solve_monolithic, solve_problem,
    CondensedSystem, DiscreteSolution, SolveInfo, SolveMethod,
};
pub use verify::{
    boundedness_max_eig, coercivity_min_eig, eta_star_estimate, inequality_probe, mesh_id,
    norm_equivalence_max_eig, norm_gram, CoercivityReport, InequalityKind,
};
