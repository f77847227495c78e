//! Quantization of in-homogeneous self-similar measures (ISMs).
//!
//! An ISM is the fixed point `μ = p₀ν + Σ pᵢ μ∘fᵢ⁻¹` of a contractive
//! similitude family `(fᵢ)` mixed with a condensation measure `ν`. This crate
//! computes the two competing exponents `ξ₁,ᵣ` and `ξ₂,ᵣ` whose maximum is the
//! quantization dimension, builds the threshold antichains over the symbolic
//! word space that control the quantization error, and provides an
//! independent Monte-Carlo Lloyd quantizer to check the antichain bounds
//! against.
//!
//! Module map:
//!
//! * [`words`]: finite words, prefix order, maximal antichain checks.
//! * [`model`]: similitudes, the two ISM configurations, cylinder masses,
//!   normalization, separation checks and seeded sampling.
//! * [`dims`]: the defining equations for `ξ₁,ᵣ`/`ξ₂,ᵣ` and regime
//!   classification.
//! * [`antichain`]: the Case-(i) antichains `Λₖ,ᵣ` and their sums.
//! * [`antichain2`]: the Case-(ii) antichains `Γₖ,ᵣ`, `Γₖ,ᵣ(σ)`, `Ψₖ,ᵣ`.
//! * [`quantizer`]: empirical `eₙ,ᵣʳ` estimates and convergence-order fits.
//! * [`solver`]: root solvers, selectable by name.

pub mod antichain;
pub mod antichain2;
pub mod dims;
pub mod error;
pub mod model;
pub mod numeric;
pub mod quantizer;
pub mod registry;
pub mod solver;
mod tree;
pub mod words;

pub use error::{Error, Result};
pub use model::{IsmSystem, Point, Similitude};
pub use words::{AntichainSet, Word, MAX_DEPTH};
