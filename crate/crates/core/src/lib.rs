//! Parabolic final value problems `u' + Au = f`, `u(T) = u_T`, for Lax–Milgram
//! operators on finite-dimensional Gelfand triples.
//!
//! The crate checks the compatibility condition `u_T - y_f ∈ D(e^{TA})` on
//! truncated models, reconstructs `u(0)`, solves backwards in time and measures
//! the graph norms of the data spaces. The [`heat`] module instantiates the
//! Dirichlet heat equation on intervals and rectangles, including the boundary
//! yield `z_g`.

pub mod duhamel;
pub mod error;
pub mod expm;
pub mod fvp;
pub mod heat;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod semigroup;

pub use duhamel::{
    duhamel_path, graded_bochner_integral, source_yield, BochnerIntegral, ClusterEnd,
    Interpolation, SolutionPath, SourceTerm, TimeGrid,
};
pub use error::{Error, Result};
pub use linalg::{CMatrix, Coefficients};
pub use num_complex::Complex64;
pub use operator::{GelfandTriple, LaxMilgramOperator, Operator, SpectralModel, TripleNorms};
pub use semigroup::{
    domain_membership, evolve, height_profile, inverse_evolve, CoefficientRule, DomainDiagnostic,
    DomainSettings, HeightProfile, LogValue, Verdict,
};
pub use fvp::{
    compatibility_check, instability_table, solve_final_value, stability_probe, x_norm, y_norm,
    CompatibilityOptions, CompatibilityReport, FinalValueProblem, InstabilityRow, ProbeResult,
};
pub use heat::{
    forward_heat,
    boundary_h_half_norm, boundary_yield, eigenbasis, heat_compatibility, poisson_lift,
    solve_heat_fvp, weyl_count, x1_norm, y1_norm, BoundaryData, BoundaryYield, Domain1D,
    Domain2DRect, HeatBasis, HeatDomain, HeatProblem, HeatReport, HeatSolution, PoissonLift,
    TraceKind, WeylRow,
};
pub use problem::{parse_problem, FinalData, Params, ProblemSpec};
