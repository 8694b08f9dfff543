//! Shared numerical kernels: quadrature, interpolation, dense Hermitian
//! eigensolver, QR/SVD, special functions, oscillatory integrals.
//!
//! Everything here is deterministic: no system BLAS/LAPACK, no threads,
//! identical results across runs for identical inputs.

pub mod eigen;
pub mod fourier;
pub mod interp;
pub mod linalg;
pub mod quad;
pub mod special;

pub use num_complex::Complex64 as C64;

pub const I: C64 = C64::new(0.0, 1.0);

/// Relative tolerance scale used for Hermiticity and degeneracy checks.
pub const HERMITICITY_RTOL: f64 = 1e-12;
pub const DEGENERACY_RTOL: f64 = 1e-12;

/// Default absolute tolerance for adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;
