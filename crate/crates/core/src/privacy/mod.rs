//! Noise calibration and correlated-noise generation.

pub mod calibrate;
pub mod noise;
pub mod sgd;

pub use calibrate::{analytic_gaussian_delta, calibrate_sigma, PrivacyParams};
pub use noise::{noise_offline, noise_offline_with, NoiseBlock, NoiseStreamState};
pub use sgd::{
    dp_sgd_run, final_params_over_seeds, GradientOracle, LinearRegression, QuadraticBowl, SgdConfig, SgdOutcome,
    TrajectoryRow,
};
