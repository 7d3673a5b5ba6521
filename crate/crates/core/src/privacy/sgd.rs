//! DP-SGD with banded-inverse correlated noise, on synthetic tasks.
//!
//! Each step clips per-example gradients to norm `clip_norm`, sums them, adds
//! `clip_norm` times the streamed correlated noise, then applies momentum and
//! weight decay:
//!
//! ```text
//! x^_i = x_i + clip * sum_{t < min(p, i)} c_t Z_{i-t}
//! m_i  = beta m_{i-1} + x^_i
//! th_i = alpha th_{i-1} - lr m_i
//! ```

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::format::sig;
use crate::privacy::noise::{counter_bits, counter_gaussian, NoiseStreamState};
use crate::toeplitz::ToeplitzCoeffs;

const BATCH_KEY: u64 = 0x5851_F42D_4C95_7F2D;

/// Supplies per-example gradients for a task.
pub trait GradientOracle: Sync {
    fn dimension(&self) -> usize;

    /// Gradients of the `batch_size` examples sampled at `step`.
    fn per_example_gradients(&self, theta: &[f64], step: usize, batch_size: usize, seed: u64) -> Vec<Vec<f64>>;

    /// Full objective at `theta`.
    fn loss(&self, theta: &[f64]) -> f64;
}

/// `l(theta) = 0.5 ‖theta - center‖^2` for every example.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    pub center: Vec<f64>,
}

impl QuadraticBowl {
    pub fn centered(dimension: usize) -> Self {
        Self { center: vec![0.0; dimension] }
    }
}

impl GradientOracle for QuadraticBowl {
    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn per_example_gradients(&self, theta: &[f64], _step: usize, batch_size: usize, _seed: u64) -> Vec<Vec<f64>> {
        let g: Vec<f64> = theta.iter().zip(&self.center).map(|(t, c)| t - c).collect();
        vec![g; batch_size]
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        0.5 * theta.iter().zip(&self.center).map(|(t, c)| (t - c).powi(2)).sum::<f64>()
    }
}

/// Least squares on generated data, `l(w, (x, y)) = 0.5 (w.x - y)^2`.
#[derive(Debug, Clone)]
pub struct LinearRegression {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
}

impl LinearRegression {
    /// `examples` points with standard normal features, targets from a random
    /// weight vector plus `label_noise`-scaled Gaussian noise.
    pub fn synthetic(examples: usize, dimension: usize, label_noise: f64, seed: u64) -> Self {
        let data_seed = seed ^ 0xA076_1D64_78BD_642F;
        let truth: Vec<f64> = (0..dimension as u64).map(|j| counter_gaussian(data_seed, u64::MAX, j)).collect();
        let features: Vec<Vec<f64>> = (0..examples as u64)
            .map(|i| (0..dimension as u64).map(|j| counter_gaussian(data_seed, i, j)).collect())
            .collect();
        let targets = features
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let clean: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
                clean + label_noise * counter_gaussian(data_seed, i as u64, dimension as u64)
            })
            .collect();
        Self { features, targets }
    }
}

impl GradientOracle for LinearRegression {
    fn dimension(&self) -> usize {
        self.features.first().map_or(0, |x| x.len())
    }

    fn per_example_gradients(&self, theta: &[f64], step: usize, batch_size: usize, seed: u64) -> Vec<Vec<f64>> {
        let m = self.features.len() as u64;
        (0..batch_size as u64)
            .map(|j| {
                let idx = (counter_bits(seed ^ BATCH_KEY, step as u64, j) % m) as usize;
                let x = &self.features[idx];
                let residual: f64 = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - self.targets[idx];
                x.iter().map(|a| residual * a).collect()
            })
            .collect()
    }

    fn loss(&self, theta: &[f64]) -> f64 {
        let total: f64 = self
            .features
            .iter()
            .zip(&self.targets)
            .map(|(x, y)| {
                let r = x.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>() - y;
                0.5 * r * r
            })
            .sum();
        total / self.features.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub dimension: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub clip_norm: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub noise_multiplier: f64,
    /// `theta_0`; must have `dimension` entries.
    pub initial_params: Vec<f64>,
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.steps == 0 || self.batch_size == 0 {
            return Err(invalid("dimension, steps and batch_size must be positive"));
        }
        if self.initial_params.len() != self.dimension {
            return Err(invalid(format!(
                "initial_params has {} entries, expected {}",
                self.initial_params.len(),
                self.dimension
            )));
        }
        if !(self.clip_norm > 0.0) || !(self.learning_rate > 0.0) {
            return Err(invalid("clip_norm and learning_rate must be positive"));
        }
        if !(self.weight_decay > 0.0 && self.weight_decay <= 1.0) {
            return Err(invalid("weight_decay must lie in (0, 1]"));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(invalid("momentum must lie in [0, 1)"));
        }
        if !(self.noise_multiplier >= 0.0) {
            return Err(invalid("noise_multiplier must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub loss: f64,
    pub param_norm: f64,
    pub update_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub params: Vec<f64>,
    /// Row 0 is the initialization.
    pub trajectory: Vec<TrajectoryRow>,
}

impl SgdOutcome {
    /// Writes `step,loss,param_norm,update_norm`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "loss", "param_norm", "update_norm"])?;
        for r in &self.trajectory {
            w.write_record([r.step.to_string(), sig(r.loss, 12), sig(r.param_norm, 12), sig(r.update_norm, 12)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Runs DP-SGD with the given banded inverse. Deterministic in `seed`.
pub fn dp_sgd_run(
    config: &SgdConfig,
    band: &ToeplitzCoeffs,
    oracle: &dyn GradientOracle,
    seed: u64,
) -> Result<SgdOutcome> {
    config.validate()?;
    if oracle.dimension() != config.dimension {
        return Err(invalid(format!(
            "task dimension {} does not match config dimension {}",
            oracle.dimension(),
            config.dimension
        )));
    }
    let d = config.dimension;
    let mut noise = NoiseStreamState::new(band, d, seed);
    let mut theta = config.initial_params.clone();
    let mut momentum = vec![0.0; d];
    let mut trajectory = Vec::with_capacity(config.steps + 1);
    trajectory.push(TrajectoryRow {
        step: 0,
        loss: oracle.loss(&theta),
        param_norm: norm(&theta),
        update_norm: 0.0,
    });

    for step in 1..=config.steps {
        let grads = oracle.per_example_gradients(&theta, step, config.batch_size, seed);
        let mut x = vec![0.0; d];
        for g in &grads {
            if g.len() != d || g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { step });
            }
            let gn = norm(g);
            let scale = if gn > config.clip_norm { config.clip_norm / gn } else { 1.0 };
            for (xi, gi) in x.iter_mut().zip(g) {
                *xi += scale * gi;
            }
        }
        let z = noise.next(config.noise_multiplier);
        let mut update_sq = 0.0;
        for j in 0..d {
            let noisy = x[j] + config.clip_norm * z[j];
            momentum[j] = config.momentum * momentum[j] + noisy;
            let next = config.weight_decay * theta[j] - config.learning_rate * momentum[j];
            update_sq += (next - theta[j]).powi(2);
            theta[j] = next;
        }
        trajectory.push(TrajectoryRow {
            step,
            loss: oracle.loss(&theta),
            param_norm: norm(&theta),
            update_norm: update_sq.sqrt(),
        });
    }
    Ok(SgdOutcome { params: theta, trajectory })
}

/// Final parameters of independent runs, one per seed, in seed order.
pub fn final_params_over_seeds(
    config: &SgdConfig,
    band: &ToeplitzCoeffs,
    oracle: &dyn GradientOracle,
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    exec.map(seeds, |&s| dp_sgd_run(config, band, oracle, s).map(|o| o.params))
        .into_iter()
        .collect()
}
