use thiserror::Error;

use crate::kernels::KernelId;

/// Errors raised by the statistical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel `{kernel}` expects {expected} points, got {got}")]
    PointMismatch {
        kernel: KernelId,
        expected: &'static str,
        got: &'static str,
    },

    #[error("statistic undefined for n = {0}; at least two observations are required")]
    TooFewPoints(usize),

    #[error("n = {n} precedes the cold-start index m = {m}")]
    BeforeColdStart { n: u64, m: u64 },

    #[error("{name} = {value} is out of domain (expected {expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("data-driven weights need at least one positive eigenvalue")]
    NoPositiveEigenvalue,

    #[error("spectrum estimated at alpha = {estimate} but boundary requested at alpha = {boundary}")]
    AlphaMismatch { estimate: f64, boundary: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Error {
    Error::Domain {
        name,
        value,
        expected,
    }
}
