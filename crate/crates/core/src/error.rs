use std::fmt;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every violation found while validating a scenario, in discovery order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<Violation>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violation(s)", self.0.len())?;
        for v in &self.0 {
            write!(f, "\n  - {v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Validation(ValidationErrors),

    #[error("sum of droop gains is not positive")]
    ZeroDroopSum,

    #[error("{what} must be positive, got {value}")]
    NonPositiveInput { what: &'static str, value: f64 },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("state became non-finite at t = {t} s")]
    NonFiniteState { t: f64 },

    #[error("all secondary gains are zero; system matrix is zero (zero eigenvalue multiplicity {zero_multiplicity})")]
    ZeroSecondaryGains { zero_multiplicity: usize },

    #[error("damping gains are not uniform (found {min} .. {max})")]
    NonUniformDamping { min: f64, max: f64 },

    #[error(
        "secondary gain of component {index} is zero; the sqrt(k_s) transformation is singular"
    )]
    ZeroGainComponent { index: usize },

    #[error("damping gain is zero for inverter(s) {ids:?}; no finite steady state")]
    ZeroDamping { ids: Vec<usize> },

    #[error("line {line} ({from}-{to}) has zero impedance")]
    ZeroImpedanceLine { line: usize, from: usize, to: usize },

    #[error("network is disconnected: bus(es) {unreached:?} unreachable from bus {root}")]
    DisconnectedGraph { root: usize, unreached: Vec<usize> },

    #[error("load-bus Newton solve did not converge after {iterations} iterations (max mismatch {mismatch:.3e} W)")]
    NoConvergence { iterations: usize, mismatch: f64 },

    #[error("scenario has no network")]
    MissingNetwork,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("scenario file: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<ValidationErrors> for Error {
    fn from(e: ValidationErrors) -> Self {
        Error::Validation(e)
    }
}
