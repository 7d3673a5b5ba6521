//! Banded inverse square root (BISR) matrix-factorization mechanisms for
//! differentially private iterative training.
//!
//! Every matrix in this crate is lower-triangular Toeplitz and is carried
//! around as its first column ([`ToeplitzCoeffs`]). The pieces are:
//!
//! - [`toeplitz`]: convolution, inversion and square roots of coefficient vectors.
//! - [`workload`]: closed-form coefficients of the SGD workload `A`, its square
//!   root `C` and inverse square root `C^-1`.
//! - [`factorization`]: BISR, BSR, identity and optimized factorizations `A = B C`.
//! - [`sensitivity`]: sensitivity of `C` under b-min-separated participation.
//! - [`metrics`]: expected error, bandwidth sweeps and bandwidth selection.
//! - [`optimizer`]: numerical optimization of banded inverse coefficients.
//! - [`privacy`]: Gaussian calibration, the streaming noise engine and a DP-SGD harness.
//!
//! Data-parallel loops (sweeps, brute-force enumeration, Monte Carlo runs,
//! offline noise columns) go through [`Execution`]; with the default
//! `parallel` feature they run on rayon, otherwise sequentially.

// Negated float comparisons are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod factorization;
pub mod format;
pub mod metrics;
pub mod optimizer;
pub mod privacy;
pub mod sensitivity;
pub mod toeplitz;
pub mod workload;

pub use error::{Error, Result};
pub use exec::Execution;
pub use factorization::{Factorization, FactorizationKind};
pub use metrics::ErrorReport;
pub use optimizer::{OptimizerConfig, OptimizedBand};
pub use sensitivity::ParticipationSchema;
pub use toeplitz::ToeplitzCoeffs;
pub use workload::WorkloadParams;
