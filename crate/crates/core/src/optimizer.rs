//! Numerical optimization of the banded inverse coefficients (BandInvMF).
//!
//! The loss is `sens_{k,b}(C)^2 * ‖B‖_F^2 / n` with `C = band^{-1}` and
//! `B = A band`. Sensitivity uses the canonical participation pattern and the
//! majorized envelope whenever `C` is not monotone. The leading coefficient is
//! pinned to one; the remaining `p - 1` are moved by gradient descent with
//! central finite-difference gradients, Barzilai-Borwein trial steps and a
//! backtracking line search, starting from BISR.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::exec::Execution;
use crate::factorization::{bisr, from_inverse_band, Factorization};
use crate::format::sig;
use crate::sensitivity::{canonical_sens_sq_majorized, monotone_violation, ParticipationSchema};
use crate::toeplitz::{convolve, ltt_inverse, ToeplitzCoeffs};
use crate::workload::{workload_coeffs, WorkloadParams};

/// Halvings tried by the line search before an iteration gives up.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub steps: usize,
    pub fd_step: f64,
    pub step_size: f64,
    pub shrink: f64,
    /// Stop once the relative loss improvement of an iteration drops below this.
    pub min_improvement: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            steps: 20,
            fd_step: 1e-6,
            step_size: 0.1,
            shrink: 0.5,
            min_improvement: 1e-12,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(invalid("optimizer steps must be positive"));
        }
        if !(self.fd_step > 0.0) || !(self.step_size > 0.0) {
            return Err(invalid("fd_step and step_size must be positive"));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(invalid("shrink must lie in (0, 1)"));
        }
        if !(self.min_improvement >= 0.0) {
            return Err(invalid("min_improvement must be non-negative"));
        }
        Ok(())
    }
}

/// Precomputed pieces shared by every loss evaluation for one problem.
pub struct BandLoss {
    params: WorkloadParams,
    schema: ParticipationSchema,
    workload: ToeplitzCoeffs,
}

impl BandLoss {
    pub fn new(params: &WorkloadParams, schema: &ParticipationSchema) -> Result<Self> {
        if schema.n() != params.n() {
            return Err(invalid("schema and workload disagree on n"));
        }
        Ok(Self {
            params: *params,
            schema: *schema,
            workload: workload_coeffs(params),
        })
    }

    /// Loss of a full band (leading coefficient included).
    pub fn eval(&self, band: &[f64]) -> Result<f64> {
        let lead = *band.first().ok_or_else(|| invalid("band must be non-empty"))?;
        if lead != 1.0 {
            return Err(Error::UnnormalizedBand(lead));
        }
        if band.len() > self.params.n() {
            return Err(invalid("band longer than n"));
        }
        Ok(self.eval_unchecked(band))
    }

    fn eval_unchecked(&self, band: &[f64]) -> f64 {
        let n = self.params.n();
        let c = ltt_inverse(band, n).expect("unit leading coefficient");
        let (sens_sq, _) = canonical_sens_sq_majorized(&c, &self.schema);
        let b = convolve(&self.workload, band, n);
        let frob: f64 = b.iter().enumerate().map(|(i, &x)| (n - i) as f64 * x * x).sum();
        let loss = sens_sq * frob / n as f64;
        if loss.is_finite() {
            loss
        } else {
            f64::INFINITY
        }
    }

    fn eval_free(&self, free: &[f64]) -> f64 {
        let mut band = Vec::with_capacity(free.len() + 1);
        band.push(1.0);
        band.extend_from_slice(free);
        self.eval_unchecked(&band)
    }
}

/// `sens^2 * ‖B‖_F^2 / n` for the given normalized band.
pub fn band_inv_loss(
    band: &[f64],
    params: &WorkloadParams,
    schema: &ParticipationSchema,
) -> Result<f64> {
    BandLoss::new(params, schema)?.eval(band)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub loss: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizedBand {
    pub factorization: Factorization,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Iteration 0 is the BISR initialization; later entries are accepted steps.
    pub trace: Vec<TraceEntry>,
    /// Stopped on `min_improvement` or a failed line search rather than the step cap.
    pub converged: bool,
    /// The optimized `C` has non-negative, non-increasing coefficients, in
    /// which case the canonical-pattern sensitivity is exact.
    pub positive_decreasing: bool,
}

impl OptimizedBand {
    pub fn band(&self) -> &[f64] {
        self.factorization.c_inv_band()
    }

    /// Writes `iteration,loss,step_size`.
    pub fn write_trace_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["iteration", "loss", "step_size"])?;
        for e in &self.trace {
            w.write_record([e.iteration.to_string(), sig(e.loss, 12), sig(e.step_size, 12)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Central finite-difference gradient over the free coefficients.
pub fn finite_difference_gradient(
    loss: &BandLoss,
    free: &[f64],
    h: f64,
    exec: Execution,
) -> Vec<f64> {
    exec.map_range(free.len(), |i| {
        let mut x = free.to_vec();
        x[i] = free[i] + h;
        let up = loss.eval_free(&x);
        x[i] = free[i] - h;
        let down = loss.eval_free(&x);
        (up - down) / (2.0 * h)
    })
}

/// Optimizes a `p`-band inverse starting from BISR.
pub fn optimize_band(
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    p: usize,
    config: &OptimizerConfig,
) -> Result<OptimizedBand> {
    optimize_band_with(params, schema, p, config, Execution::default())
}

pub fn optimize_band_with(
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    p: usize,
    config: &OptimizerConfig,
    exec: Execution,
) -> Result<OptimizedBand> {
    config.validate()?;
    let init = bisr(params, p)?;
    let loss = BandLoss::new(params, schema)?;
    let mut free: Vec<f64> = init.c_inv_band()[1..].to_vec();
    let initial_loss = loss.eval_free(&free);
    let mut current = initial_loss;
    let mut trace = vec![TraceEntry {
        iteration: 0,
        loss: initial_loss,
        step_size: 0.0,
    }];
    let mut converged = free.is_empty();
    // Previous accepted point and gradient, for the Barzilai-Borwein trial step.
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;

    for iteration in 1..=config.steps {
        if converged {
            break;
        }
        let grad = finite_difference_gradient(&loss, &free, config.fd_step, exec);
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(gnorm > 0.0) || !gnorm.is_finite() {
            converged = true;
            break;
        }
        // Trial multiplier on -grad: the first iteration moves `step_size` in
        // coefficient space, later ones use the BB1 step when it is positive.
        let mut t = config.step_size / gnorm;
        if let Some((x_prev, g_prev)) = &previous {
            let (mut ss, mut sy) = (0.0, 0.0);
            for i in 0..free.len() {
                let s = free[i] - x_prev[i];
                ss += s * s;
                sy += s * (grad[i] - g_prev[i]);
            }
            if sy > 0.0 && (ss / sy).is_finite() {
                t = ss / sy;
            }
        }
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = free.iter().zip(&grad).map(|(x, g)| x - t * g).collect();
            let value = loss.eval_free(&candidate);
            if value < current {
                accepted = Some((candidate, value));
                break;
            }
            t *= config.shrink;
        }
        let Some((candidate, value)) = accepted else {
            converged = true;
            break;
        };
        let improvement = (current - value) / current;
        previous = Some((std::mem::replace(&mut free, candidate), grad));
        current = value;
        trace.push(TraceEntry {
            iteration,
            loss: value,
            step_size: t * gnorm,
        });
        if improvement < config.min_improvement {
            converged = true;
        }
    }

    let mut band = Vec::with_capacity(p);
    band.push(1.0);
    band.extend_from_slice(&free);
    let factorization = from_inverse_band(params, &band)?;
    let positive_decreasing = monotone_violation(factorization.c_coeffs()).is_none();
    Ok(OptimizedBand {
        factorization,
        initial_loss,
        final_loss: current,
        trace,
        converged,
        positive_decreasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::FactorizationKind;
    use crate::metrics::expected_error;

    #[test]
    fn identity_band_loss() {
        let params = WorkloadParams::prefix_sum(7).unwrap();
        let schema = ParticipationSchema::new(7, 7, 1).unwrap();
        let l = band_inv_loss(&[1.0], &params, &schema).unwrap();
        assert!((l - 4.0).abs() < 1e-14);
        assert!(matches!(
            band_inv_loss(&[0.5, 0.1], &params, &schema),
            Err(Error::UnnormalizedBand(_))
        ));
    }

    #[test]
    fn bisr_band_loss_is_squared_rmse() {
        let params = WorkloadParams::new(512, 1.0, 0.9).unwrap();
        let schema = ParticipationSchema::from_participations(512, 4).unwrap();
        let f = bisr(&params, 6).unwrap();
        let rmse = expected_error(&f, &schema).unwrap().rmse;
        let l = band_inv_loss(f.c_inv_band(), &params, &schema).unwrap();
        assert!((l - rmse * rmse).abs() <= 1e-10 * l);
    }

    #[test]
    fn single_band_optimum_beats_identity() {
        let n = 1024usize;
        let params = WorkloadParams::prefix_sum(n).unwrap();
        let schema = ParticipationSchema::new(n, n, 1).unwrap();
        let lambda = (1.0 - 1.0 / (n as f64).sqrt()).sqrt();
        let tuned = band_inv_loss(&[1.0, -lambda], &params, &schema).unwrap();
        let flat = band_inv_loss(&[1.0, 0.0], &params, &schema).unwrap();
        assert!(tuned.is_finite() && tuned <= flat);
    }

    #[test]
    fn single_band_is_returned_unchanged() {
        let params = WorkloadParams::prefix_sum(64).unwrap();
        let schema = ParticipationSchema::from_participations(64, 4).unwrap();
        let out = optimize_band(&params, &schema, 1, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.band(), &[1.0]);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.factorization.kind(), FactorizationKind::Optimized);
    }

    #[test]
    fn two_bands_reach_quarter_power_rate() {
        let n = 1024usize;
        let params = WorkloadParams::prefix_sum(n).unwrap();
        let schema = ParticipationSchema::new(n, n, 1).unwrap();
        let out = optimize_band(&params, &schema, 2, &OptimizerConfig::default()).unwrap();
        let rmse = expected_error(&out.factorization, &schema).unwrap().rmse;
        let init = expected_error(&bisr(&params, 2).unwrap(), &schema).unwrap().rmse;
        assert!(rmse <= 2.0 * (n as f64).powf(0.25), "{rmse}");
        assert!(rmse <= init);
    }

    #[test]
    fn trace_is_non_increasing() {
        let params = WorkloadParams::new(2048, 1.0, 0.9).unwrap();
        let schema = ParticipationSchema::from_participations(2048, 4).unwrap();
        let out = optimize_band(&params, &schema, 8, &OptimizerConfig::default()).unwrap();
        assert!(out.trace.windows(2).all(|w| w[1].loss <= w[0].loss));
        assert!(out.final_loss <= out.initial_loss);
        assert!(out.trace.len() <= 21);
    }

    #[test]
    fn central_and_forward_differences_agree() {
        let params = WorkloadParams::new(512, 0.999, 0.0).unwrap();
        let schema = ParticipationSchema::from_participations(512, 4).unwrap();
        let loss = BandLoss::new(&params, &schema).unwrap();
        let free = bisr(&params, 5).unwrap().c_inv_band()[1..].to_vec();
        let h = 1e-6;
        let central = finite_difference_gradient(&loss, &free, h, Execution::Sequential);
        let base = loss.eval_free(&free);
        for i in 0..free.len() {
            let mut x = free.clone();
            x[i] += 2.0 * h;
            let forward = (loss.eval_free(&x) - base) / (2.0 * h);
            assert!(
                (forward - central[i]).abs() <= 0.05 * central[i].abs().max(1e-8),
                "coordinate {i}: {forward} vs {}",
                central[i]
            );
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let params = WorkloadParams::prefix_sum(16).unwrap();
        let schema = ParticipationSchema::from_participations(16, 2).unwrap();
        let cfg = OptimizerConfig { shrink: 1.5, ..OptimizerConfig::default() };
        assert!(optimize_band(&params, &schema, 2, &cfg).is_err());
    }
}
