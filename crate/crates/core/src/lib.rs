//! Contracted generalized polarization tensors (GPTs) of inhomogeneous
//! conductivity distributions supported in a disk.
//!
//! The crate is organised bottom-up:
//!
//! * [`basis`]: disk geometry, trigonometric boundary functions, harmonic
//!   polynomials and volume quadrature.
//! * [`conductivity`]: radial and gridded conductivity fields.
//! * [`ntd`]: Neumann-to-Dirichlet operators (closed forms, per-mode radial
//!   solves, Fourier–Galerkin finite elements for general fields).
//! * [`gpt`]: contracted GPT tables, far-field expansion, volume and boundary
//!   identities, positivity bounds.
//! * [`sensitivity`]: interior states, Fréchet derivative and adjoint,
//!   linearized resolution analysis.
//! * [`inversion`]: least-squares reconstruction by recursive Landweber
//!   iteration.

pub mod basis;
pub mod conductivity;
pub mod error;
pub mod gpt;
pub mod inversion;
pub mod ntd;
mod ode;
pub mod sensitivity;

pub use basis::{
    harmonic_normal_derivative, harmonic_trace, volume_integrate, BoundaryFunction, DiskGeometry,
    DiskGrid, GridField, HarmonicMode, HarmonicPolynomial, Parity,
};
pub use conductivity::{ConductivityField, GriddedField, RadialProfile};
pub use error::{GptError, Result};
pub use gpt::{
    contracted_gpts, contracted_gpts_from_ntd, contracted_gpts_with, default_grid, far_field_eval,
    far_field_from_table, first_order_pt, gpt_boundary_formula, gpt_homogeneous_disk,
    gpt_table_boundary_formula, gpt_volume_identity, positivity_bounds, quadratic_form,
    ContractedGptTable, FarFieldValue, FirstOrderPt, ForwardOptions,
};
pub use inversion::{
    default_schedule, default_weights, discrepancies, discrepancy_functional, initial_guess,
    landweber_step, recursive_reconstruct, relative_l2_error, HistoryEntry, Parametrization,
    ReconstructionConfig, ReconstructionOutcome, ReconstructionState, StageSpec,
};
pub use ntd::{
    ntd_difference_inverse_apply, ntd_difference_inverse_landweber, ntd_exterior, ntd_harmonic,
    ntd_sigma, ntd_sigma_general, ntd_sigma_radial, FemOptions, NtDOperator,
};
pub use sensitivity::{
    frechet_adjoint, frechet_derivative, interior_state, linearized_derivative,
    linearized_perturbation_map, radial_resolution, GradientField, LinearizedDerivative,
    StateCache,
};
