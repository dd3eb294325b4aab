//! Anytime-valid confidence sequences and sequential tests for degree-two
//! U-statistics.
//!
//! * [`accumulator`]: streaming `U_n`, leave-one-out row sums and the
//!   jackknife variance.
//! * [`boundaries`]: stitched LIL and Gaussian-mixture boundaries.
//! * [`spectral`]: centered Gram spectrum, weight allocation and the SAGE
//!   boundary for degenerate kernels.
//! * [`sequences`]: two-sided and one-sided confidence sequences, the
//!   sequential test and fixed-time baselines.
//! * [`simharness`]: seeded Monte Carlo experiments.

pub mod accumulator;
pub mod boundaries;
pub mod error;
pub mod kernels;
pub mod sequences;
pub mod simharness;
pub mod special;
pub mod spectral;

pub use accumulator::{batch_ustat, UStatState};
pub use boundaries::{Boundary, BoundaryKind, BoundaryParams};
pub use error::{Error, Result};
pub use kernels::{true_sigma2, true_theta, DistParams, Family, KernelId, Mixer, Point};
pub use sequences::{CsRecord, Method, SequentialTest, TestDecision};
pub use spectral::{estimate_spectrum, SpectrumConfig, SpectrumEstimate, WeightScheme};
