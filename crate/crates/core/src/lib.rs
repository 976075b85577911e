//! Truncated Toeplitz operators with measure symbols on the Fock space
//! `F²(Cⁿ)`.

pub mod basis;
pub mod carleson;
pub mod cli;
pub mod error;
pub mod index;
pub mod lagrangian;
pub mod measures;
pub mod quadrature;
pub mod spectral;
pub mod toeplitz;

pub use error::{FockError, Result};
pub use num_complex::Complex64;
