//! Numerical laboratory for truncated Toeplitz operators on the finite
//! dimensional model spaces `K_B = H² ⊖ B H²` of finite Blaschke products.
//!
//! The crate builds, in the Takenaka–Malmquist–Walsh (TMW) basis of `K_B`:
//!
//! - truncated Toeplitz matrices `T_B(φ)` for trigonometric-polynomial and
//!   sampled symbols,
//! - Clark unitaries `U_α` and their spectral (Clark) measures,
//! - functions of these matrices, traces and Schatten norms,
//! - the Fejér-type averaging operator `E_N`,
//!
//! and runs convergence sweeps over `N` for the Szegő-type trace
//! asymptotics of `T_{B_N}(φ)` (see [`experiments`]).
//!
//! All integrals over the circle use the normalized Lebesgue measure `m`.

pub mod blaschke;
pub mod clark;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod operators;
pub mod quadrature;
pub mod symbol;

pub use num_complex::Complex64;

pub use blaschke::{
    generate_zeros, normalized_szego_kernel, szego_kernel, AngularDiagnostics, CirclePoint,
    FiniteBlaschke, PhaseRule, ZeroSequence,
};
pub use clark::{ClarkAtom, ClarkMeasure, PhaseFunction};
pub use error::{Error, Result};
pub use experiments::{ConvergenceRecord, ExperimentConfig, SweepRecord};
pub use linalg::{CMatrix, SpectralData};
pub use operators::OperatorMatrix;
pub use quadrature::{GridKind, IntegralResult, QuadratureConfig};
pub use symbol::{ScalarFunction, SymbolRep, TrigPoly};

/// Shorthand used throughout the crate.
pub type C64 = Complex64;
