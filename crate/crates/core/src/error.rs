use thiserror::Error;

use crate::C64;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{key}`: {message}")]
    InvalidParameter { key: String, message: String },

    #[error("unknown generator tag `{0}`; valid tags: {tags}", tags = crate::blaschke::GENERATOR_TAGS.join(", "))]
    UnknownGenerator(String),

    #[error("point {point} lies outside the closed unit disk")]
    OutsideDisk { point: C64 },

    #[error("zero {point} is not strictly inside the unit disk")]
    ZeroNotInDisk { point: C64 },

    #[error("basis index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("non-finite sample at angle {angle}")]
    NonFiniteSample { angle: f64 },

    #[error("matrix is not self-adjoint (relative defect {defect:e})")]
    NotSelfAdjoint { defect: f64 },

    #[error("|alpha| = {modulus} is not 1")]
    NotUnimodular { modulus: f64 },

    #[error("Blaschke product does not vanish at the origin")]
    NoZeroAtOrigin,

    #[error("operands belong to different TMW bases")]
    BasisMismatch,

    #[error("empty evaluation grid")]
    EmptyGrid,

    #[error("root refinement failed for phase target {target} in bracket [{lo}, {hi}]")]
    RootFinding { target: f64, lo: f64, hi: f64 },

    #[error("invalid function/symbol pairing: {0}")]
    InvalidPairing(String),

    #[error("symbol must be a trigonometric polynomial: {0}")]
    NotTrigPoly(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

impl Error {
    pub fn param(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
            message: message.into(),
        }
    }
}
