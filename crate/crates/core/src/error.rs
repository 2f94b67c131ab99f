//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by samplers, geometric queries, estimators and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration field failed validation.
    #[error("invalid config field `{field}`: {message}")]
    InvalidConfig { field: String, message: String },

    /// Operation requires a non-empty point set.
    #[error("point set is empty")]
    EmptyPointSet,

    /// Mixed dimensions between arguments.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// The operation is only implemented for certain dimensions.
    #[error("dimension {dim} not supported for {context}")]
    UnsupportedDimension { dim: usize, context: &'static str },

    /// Rejection sampling acceptance rate collapsed; the density is badly
    /// scaled relative to its bounding box proposal.
    #[error("rejection sampling acceptance rate {rate:.3e} below 1e-6; density badly scaled")]
    RejectionRate { rate: f64 },

    /// The homogeneous Poisson sampler only accepts axis-aligned boxes.
    #[error("region is not an axis-aligned box; use the inhomogeneous sampler")]
    NotABox,

    /// The region has no known volume (not a box and `exact_volume` unset).
    #[error("region volume unknown; supply an axis box or set exact_volume")]
    UnknownVolume,

    /// Too few observations for the requested neighbour rank.
    #[error("need n > k: n = {n}, k = {k}")]
    InsufficientSample { n: usize, k: usize },

    /// A data file row failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// I/O failure, annotated with the path where available.
    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidConfig { field: field.into(), message: message.into() }
    }
}
