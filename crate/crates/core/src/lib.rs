//! Numerical noncommutative n-torus at finite Fourier truncation.
//!
//! The crate computes the Yang–Mills functional of a connection on a
//! projective module `p A_Θ^q` in two ways: through the derivations of the
//! torus action (the dynamical form) and through the differential forms
//! induced by the Dirac operator `D = Σ δ_j ⊗ γ_j` (the spectral form).
//! The two values agree up to the constant returned by
//! [`forms::dixmier_constant`].

pub mod clifford;
pub mod connection;
pub mod error;
pub mod forms;
pub mod matrix;
pub mod optimize;
pub mod random;
pub mod serial;
pub mod torus;

pub use clifford::CliffordRep;
pub use connection::{Connection, Convention, CurvatureForm, ProjectiveModule};
pub use error::{Error, Result};
pub use forms::{OmegaD1Element, OmegaD2Element, SpectralCurvature};
pub use matrix::{ModuleVector, TorusMatrix};
pub use optimize::{DescentParams, DescentTrace};
pub use torus::{DeformationMatrix, Exponent, TorusElement, TruncationMode, TruncationPolicy};

pub use num_complex::Complex64;
