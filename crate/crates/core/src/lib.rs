#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Acoustic scattering by small impedance obstacles through the
//! Neumann-to-Dirichlet operator of the exterior Helmholtz problem.

pub mod bie;
mod complex_serde;
pub mod error;
pub mod geometry;
pub mod impedance;
pub mod linalg;
pub mod ntd;
pub mod quadrature;
pub mod resonance;
pub mod scatter;
pub mod smatrix;
pub mod sphere_oracle;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
