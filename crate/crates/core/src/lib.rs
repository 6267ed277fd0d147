//! Discretized magnetic Dirac operators with a field of constant direction.
//!
//! The crate builds finite hermitian realizations of the internal two-dimensional
//! operator `H⁰ = σ₁Π₁ + σ₂Π₂ + σ₃m`, its momentum fibers `H₀(ξ)` and the
//! three-dimensional operator `H₀ = α₁Π₁ + α₂Π₂ + α₃P₃ + βm`, then analyses
//! them: symmetrized internal spectrum and its gaps, the conjugate operator
//! `A` and the commutator `T = (P₃H₀⁻¹)²`, the optimal Mourre constants, a
//! set of commutator identities checked under mesh refinement, and matrix
//! perturbations `H = H₀ + V` whose point spectrum is tracked inside gaps.
//!
//! Two transverse discretizations are provided:
//!
//! * a Dirichlet grid with Peierls link phases, valid for any continuous field;
//! * a Landau-level basis (ladder plus guiding-centre index) for constant fields,
//!   exact up to level truncation and free of box edge states.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the command line live in the `magdirac` companion crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod clifford;
pub mod discretize;
pub mod eigensolve;
pub mod error;
pub mod field;
pub mod linalg;
pub mod mourre;
pub mod perturbation;
pub mod potential;
pub mod rng;
#[cfg(feature = "serde")]
pub mod serde_float;
pub mod spectrum;

pub use error::{Error, Result};
pub use linalg::C64;
