//! Correlated noise `(C^p)^{-1} Z` for a banded inverse, streamed with a
//! buffer of at most `p` noise vectors or materialized offline by FFT.
//!
//! `Z[i][j]` comes from a counter-based generator keyed by
//! `(seed, step, coordinate)`, so both paths see identical noise without
//! sharing any state.

use std::collections::VecDeque;

use statrs::function::erf::erfc_inv;

use crate::exec::Execution;
use crate::toeplitz::{convolve_fft, ToeplitzCoeffs};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const COORD_KEY: u64 = 0xD1B5_4A32_D192_ED03;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random 64 bits for `(seed, step, coord)`.
pub fn counter_bits(seed: u64, step: u64, coord: u64) -> u64 {
    let k = mix64(seed.wrapping_add(GOLDEN));
    let k = mix64(k ^ step.wrapping_mul(GOLDEN).wrapping_add(1));
    mix64(k ^ coord.wrapping_mul(COORD_KEY).wrapping_add(2))
}

/// Uniform in the open interval `(0, 1)`.
pub fn counter_uniform(seed: u64, step: u64, coord: u64) -> f64 {
    ((counter_bits(seed, step, coord) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by inverse CDF of [`counter_uniform`].
pub fn counter_gaussian(seed: u64, step: u64, coord: u64) -> f64 {
    let u = counter_uniform(seed, step, coord);
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

/// Streaming state of the correlated noise engine.
#[derive(Debug, Clone)]
pub struct NoiseStreamState {
    coefficients: Vec<f64>,
    dimension: usize,
    seed: u64,
    step: u64,
    /// Most recent first; never longer than the bandwidth.
    buffer: VecDeque<Vec<f64>>,
}

impl NoiseStreamState {
    pub fn new(band: &ToeplitzCoeffs, dimension: usize, seed: u64) -> Self {
        Self {
            coefficients: band.to_vec(),
            dimension,
            seed,
            step: 0,
            buffer: VecDeque::with_capacity(band.len()),
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.coefficients.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of noise vectors emitted so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// Draws `Z_i ~ N(0, sigma^2 I)` and returns `sum_t c_t Z_{i-t}` over the buffered history.
    pub fn next(&mut self, sigma: f64) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dimension as u64)
            .map(|j| sigma * counter_gaussian(self.seed, self.step, j))
            .collect();
        if self.buffer.len() == self.coefficients.len() {
            self.buffer.pop_back();
        }
        self.buffer.push_front(z);
        self.step += 1;

        let mut out = vec![0.0; self.dimension];
        for (c, past) in self.coefficients.iter().zip(&self.buffer) {
            for (o, &x) in out.iter_mut().zip(past) {
                *o += c * x;
            }
        }
        out
    }
}

/// Row-major `steps x dimension` block.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBlock {
    pub steps: usize,
    pub dimension: usize,
    pub data: Vec<f64>,
}

impl NoiseBlock {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dimension..(i + 1) * self.dimension]
    }
}

/// The whole correlated noise block at once, one FFT convolution per coordinate.
pub fn noise_offline(band: &ToeplitzCoeffs, steps: usize, dimension: usize, sigma: f64, seed: u64) -> NoiseBlock {
    noise_offline_with(band, steps, dimension, sigma, seed, Execution::default())
}

pub fn noise_offline_with(
    band: &ToeplitzCoeffs,
    steps: usize,
    dimension: usize,
    sigma: f64,
    seed: u64,
    exec: Execution,
) -> NoiseBlock {
    let columns = exec.map_range(dimension, |j| {
        let z: Vec<f64> = (0..steps as u64)
            .map(|i| sigma * counter_gaussian(seed, i, j as u64))
            .collect();
        convolve_fft(band, &z, steps)
    });
    let mut data = vec![0.0; steps * dimension];
    for (j, col) in columns.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * dimension + j] = x;
        }
    }
    NoiseBlock { steps, dimension, data }
}
