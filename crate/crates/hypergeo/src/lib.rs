//! Pulse synthesis and analysis toolkit for parametric quantum Hamiltonians.
//!
//! The core object is a two-index generalization of the quantum geometric
//! tensor: matrix elements of parameter derivatives raised to a tunable
//! power `beta`, divided by energy gaps raised to a power `alpha`. Its real
//! part defines a family of metrics on control space; geodesic ("constant
//! speed") pulses with respect to such a metric interpolate between known
//! adiabatic protocols (linear ramps, local adiabatic driving, FAQUAD, and
//! the pi-pulse limit) as `alpha + beta` varies.
//!
//! Modules:
//! - [`models`]: built-in Hamiltonian families with analytic derivatives
//! - [`hypergeometry`]: tensor/metric/curvature evaluation and sphere geometry
//! - [`synthesis`]: constant-speed pulse construction by arclength inversion
//! - [`dynamics`]: unitary and dephasing-Lindblad propagation of pulses
//! - [`adiabatic`]: perturbative traces, fidelity bounds, resonance predictions
//! - [`noise`]: quasistatic Monte Carlo, robustness constraint, filter functions
//! - [`basis`]: pulse-family function bases, Gram/QR pruning, expansions
//! - [`signal`]: Butterworth conditioning, slew and bandwidth feasibility
//! - [`bench`]: synthesis timing harness with linear-scaling fits

pub mod adiabatic;
pub mod basis;
pub mod bench;
pub mod dynamics;
pub mod error;
pub mod hypergeometry;
pub mod models;
pub mod noise;
pub mod numerics;
pub mod signal;
pub mod synthesis;

pub use error::{Error, Result};
