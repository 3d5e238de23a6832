//! Apparent conductivity of random fiber microstructures by FFT homogenization,
//! with symmetry-class projection as a variance-reduction postprocess.

pub mod analysis;
pub mod error;
pub mod microgen;
pub mod quadrature;
pub mod seed;
pub mod solver;
pub mod study;
pub mod tensor;

pub use error::{Error, Result};

/// Embedded in every microstructure and study metadata file.
pub const GENERATOR_VERSION: &str = concat!("homsym-microgen/", env!("CARGO_PKG_VERSION"), "+rsa-migration");
pub const SOLVER_VERSION: &str = concat!("homsym-solver/", env!("CARGO_PKG_VERSION"), "+rotated-staggered-cg");
