//! Gamma and the two Gauss hypergeometric evaluations used by the
//! closed-form adiabaticity expressions.
//!
//! Both 2F1 cases reduce to smooth one-dimensional integrals valid for all
//! w > -1, which sidesteps series-convergence bookkeeping near |z| = 1:
//!   2F1(1/2, p/2; 3/2; -w)     = int_0^1 (1 + w u^2)^{-p/2} du
//!   2F1(1, (3-p)/2; 3/2; -w)   = int_0^1 (1 + w (1 - u^2))^{(p-3)/2} du

use crate::error::Result;
use crate::numerics::quad;

pub fn gamma(x: f64) -> f64 {
    statrs::function::gamma::gamma(x)
}

/// 2F1(1/2, p/2; 3/2; -w) for w > -1.
pub fn hyp2f1_half(p: f64, w: f64) -> Result<f64> {
    quad::integrate(&|u: f64| (1.0 + w * u * u).powf(-p / 2.0), 0.0, 1.0, 1e-12)
}

/// 2F1(1, (3-p)/2; 3/2; -w) for w > -1.
pub fn hyp2f1_one(p: f64, w: f64) -> Result<f64> {
    quad::integrate(
        &|u: f64| (1.0 + w * (1.0 - u * u)).powf((p - 3.0) / 2.0),
        0.0,
        1.0,
        1e-12,
    )
}
