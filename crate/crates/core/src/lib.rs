//! Set-valued Hamilton-Jacobi equations by the method of characteristics.
//!
//! The crate solves, along sampled directions of a dual-cone base, the
//! scalarized characteristic system of a Hamilton-Jacobi equation whose
//! unknown takes values in the lattice of closed convex upper sets for an
//! ordering cone. Each scalar value function is recovered in closed form
//! along characteristic lines and reassembled into a set-valued solution
//! as an intersection of half-spaces; the same machinery verifies the
//! structural hypotheses behind that reassembly, estimates the horizon up
//! to which the characteristic flow stays invertible, and cross-checks
//! the result against a Hopf-Lax formula through Legendre-Fenchel
//! conjugation.

pub mod assembler;
pub mod characteristics;
pub mod cone;
pub mod error;
pub mod fenchel;
pub mod halfspace;
pub mod hopflax;
pub mod numerics;
pub mod problem;

pub use assembler::{
    assemble_solution, check_pairwise_minimality, check_support_gaps, hj_residual,
    solution_curve, solution_halfspace, solution_support_point, space_set_derivative,
    time_set_derivative, transported_halfspace, GapRecord, PairwiseReport, SupportGapReport,
};
pub use characteristics::{
    characteristic_closed_form, characteristic_rk4, characteristic_rk4_trajectory,
    estimate_horizon, estimate_horizon_over_base, horizon_lower_bound, hypercube_grid,
    invert_flow, scalar_solution, BaseHorizonReport, CharacteristicState, HorizonReport,
};
pub use cone::{make_base, BaseSampling, BaseSpec, Cone};
pub use error::{Error, Result};
pub use fenchel::{
    biconjugate_check, check_conjugate_identities, conjugate_derivatives, conjugate_halfspace,
    conjugate_scalar, BiconjugateRecord, BiconjugateReport, ConjugateIdentityReport,
    ConjugateResult, IdentityRecord,
};
pub use halfspace::{
    linear_halfspace, support_of_intersection, zeta_difference, HalfSpace, SetScalarization,
    SupportedSet, TranslatedCone,
};
pub use hopflax::{
    cost_functional, hopflax_value, scalarization_solution, verify_characteristic_link,
    zeta_minimizer, Arc, DirectionRecord, ScalarizationSolution,
};
pub use problem::{BuiltinParams, ProblemInstance, ProblemKind, ScalarField, ScalarizedProblem};
