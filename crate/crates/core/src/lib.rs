//! Ideal-fluid vortex pairs in the half-plane `Π = {x₂ > 0}`.
//!
//! Steady translating vortex pairs are computed as maximizers of kinetic
//! energy penalised by impulse, `E − λI`, over rearrangement classes of a
//! prescribed vorticity profile. Their orbital stability is probed
//! empirically by evolving perturbed states under the vorticity transport
//! equation while auditing the conserved quantities (`E`, `I`, the Lebesgue
//! norms and the rearrangement class itself).
//!
//! Module layout:
//! - [`field`]: uniform half-plane grids, scalar fields, elementary functionals.
//! - [`greens`]: method-of-images kernel, the operator `G`, energy, velocity,
//!   and the computable sup bound for `‖Gζ‖∞`.
//! - [`rearrange`]: decreasing rearrangements, class membership, monotone
//!   transport placement, Steiner symmetrization, curtailment.
//! - [`maximizer`]: the ascent iteration `ζ ← rearrange(profile, Gζ − λx₂)`.
//! - [`evolution`]: semi-Lagrangian transport with conservation audits.
//! - [`stability`]: perturb-and-evolve orbital stability experiments.
//! - [`cli`]: configuration ingestion and experiment orchestration.

pub mod cli;
pub mod error;
pub mod evolution;
pub mod field;
pub mod greens;
pub mod maximizer;
pub mod rearrange;
pub mod stability;

pub use error::Error;
pub use field::{dist2, dist_y, GridSpec, NormReport, ScalarField};
pub use greens::GreenOperator;
pub use maximizer::{MaximizerConfig, MaximizerResult};
pub use rearrange::RearrangementProfile;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
