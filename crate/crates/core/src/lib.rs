//! Multipoint density-matrix perturbation theory.
//!
//! Given the k-th eigenmode of `H(G_j) = H0 + G_j` at several points
//! `G_1, ..., G_n`, approximate the spectral projector of `H(G)` at a new
//! point through the multipoint resolvent identity, and compare with
//! single-point (standard) perturbation theory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alpha_fit;
pub mod contour;
pub mod error;
pub mod multipoint;
pub mod operator;
pub mod random;
pub mod schrodinger;
pub mod standard;

pub use alpha_fit::{fit_alpha, AlphaFitResult, XiMode};
pub use contour::{contour_integrate, default_contour, Contour};
pub use error::{Error, Result};
pub use multipoint::{
    build_setup, conjugate_setup, expansion_terms, expansion_terms_with, integral_i2, integral_i3,
    multipoint_resolvent, operators_at_z, smallness, Assembly, MultipointExpansion, MultipointSetup,
    SmallnessParameters,
};
pub use operator::{
    cross_pseudo_inverse, decompose, gap_check, kij_from_kj, norm_a, norm_e, relative_distance, resolvent,
    resolvent_bound_rhs, resolvent_bound_shift, CMat, DistanceWeight, GapWindow, HermitianOperator, NormContext,
    SpectralData,
};
pub use schrodinger::{
    builtin_potentials, laplacian_matrix, potential_matrix, PlanewaveBasis, PotentialKind, PotentialSpec,
    SchrodingerModel,
};
pub use standard::{
    choose_closest, standard_terms, standard_terms_from, term_word_shapes, ClosestRule, StandardExpansion, WordShape,
};
