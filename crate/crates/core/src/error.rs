use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the library. Every variant names the operation that
/// failed so CLI messages stay actionable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("singular matrix (condition number {condition:e})")]
    SingularMatrix { condition: f64 },

    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("slice has {0} samples, at least 2 are required")]
    TooFewSamples(usize),

    #[error("field has no exact metadata; use the sampled slice path")]
    MissingMetadata,

    #[error("point {0:?} lies outside the unit cube")]
    OutsideCube(Vec<f64>),

    #[error("direction {0:?} is not a lattice direction of the direction set")]
    NotLatticeDirection(Vec<f64>),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("overlapping regions {0} and {1}")]
    OverlappingRegions(usize, usize),

    #[error("rigid kernel violation: fd_rhs vanishes on a non-rigid direction (eigenvalue {0:e})")]
    RigidKernelViolation(f64),

    #[error("no feasible anchor among {tried} candidates (best phi {best_phi:e} vs threshold {threshold:e}, best energy {best_energy:e} vs 2M {two_m:e})")]
    NoFeasibleAnchor {
        tried: usize,
        best_phi: f64,
        threshold: f64,
        best_energy: f64,
        two_m: f64,
    },

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
