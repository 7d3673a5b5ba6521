//! Expected factorization error and the sweeps built on it.
//!
//! With unit noise multiplier the noise scale equals the sensitivity, so
//! `E(B, C) = sens_{k,b}(C) * ‖B‖_F / sqrt(n)`.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::Execution;
use crate::factorization::{self, Factorization, FactorizationKind};
use crate::format::sig;
use crate::optimizer::{optimize_band, OptimizerConfig};
use crate::sensitivity::{sens_toeplitz, Monotonicity, ParticipationSchema};
use crate::workload::WorkloadParams;

pub const CSV_HEADER: [&str; 10] =
    ["kind", "n", "alpha", "beta", "k", "b", "p", "sensitivity", "b_frob_sq", "rmse"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub rmse: f64,
    pub b_frobenius_sq: f64,
    pub sensitivity: f64,
    pub schema: ParticipationSchema,
    pub factorization_kind: FactorizationKind,
    pub bandwidth: usize,
    pub noise_scale: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Sensitivity came from the majorized envelope (an upper bound).
    pub majorized: bool,
}

impl ErrorReport {
    pub fn n(&self) -> usize {
        self.schema.n()
    }
}

/// `E(B, C)` for a factorization under the given participation schema.
pub fn expected_error(f: &Factorization, schema: &ParticipationSchema) -> Result<ErrorReport> {
    if schema.n() != f.n() {
        return Err(invalid(format!(
            "schema n = {} does not match factorization n = {}",
            schema.n(),
            f.n()
        )));
    }
    let mode = match f.kind() {
        FactorizationKind::Optimized => Monotonicity::Majorize,
        _ => Monotonicity::Strict,
    };
    let sens = sens_toeplitz(f.c_coeffs(), schema, mode)?;
    let b_frobenius_sq = f.b_frobenius_sq();
    Ok(ErrorReport {
        rmse: sens.value * (b_frobenius_sq / f.n() as f64).sqrt(),
        b_frobenius_sq,
        sensitivity: sens.value,
        schema: *schema,
        factorization_kind: f.kind(),
        bandwidth: f.bandwidth(),
        noise_scale: sens.value,
        alpha: f.params().alpha(),
        beta: f.params().beta(),
        majorized: sens.majorized,
    })
}

fn report_for(
    kind: FactorizationKind,
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    p: usize,
) -> Result<ErrorReport> {
    let f = match kind {
        FactorizationKind::Optimized => {
            optimize_band(params, schema, p, &OptimizerConfig::default())?.factorization
        }
        _ => factorization::build(kind, params, p)?,
    };
    expected_error(&f, schema)
}

/// One report per bandwidth, sorted by bandwidth.
pub fn rmse_bandwidth_sweep(
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    kind: FactorizationKind,
    bandwidths: &[usize],
) -> Result<Vec<ErrorReport>> {
    rmse_bandwidth_sweep_with(params, schema, kind, bandwidths, Execution::default())
}

pub fn rmse_bandwidth_sweep_with(
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    kind: FactorizationKind,
    bandwidths: &[usize],
    exec: Execution,
) -> Result<Vec<ErrorReport>> {
    if bandwidths.is_empty() {
        return Err(invalid("bandwidth list must be non-empty"));
    }
    if let Some(&p) = bandwidths.iter().find(|&&p| p == 0 || p > params.n()) {
        return Err(invalid(format!("bandwidth {p} outside [1, {}]", params.n())));
    }
    let mut ps = bandwidths.to_vec();
    ps.sort_unstable();
    ps.dedup();
    exec.map(&ps, |&p| report_for(kind, params, schema, p))
        .into_iter()
        .collect()
}

/// `{1, 2, 4, ...} ∪ {n}`, capped at `n`.
pub fn dyadic_grid(n: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |&p| p.checked_mul(2))
        .take_while(|&p| p <= n)
        .collect();
    if grid.last() != Some(&n) {
        grid.push(n);
    }
    grid
}

/// Candidate bandwidths for BISR: the dyadic grid plus `b` and `ceil(b ln b)`.
pub fn bandwidth_candidates(n: usize, b: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = std::iter::successors(Some(1usize), |&p| p.checked_mul(2))
        .take_while(|&p| p <= n)
        .collect();
    let b_log_b = (b as f64 * (b.max(2) as f64).ln()).ceil() as usize;
    grid.push(b.min(n));
    grid.push(b_log_b.clamp(1, n));
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Bandwidth minimizing BISR rmse over [`bandwidth_candidates`], ties to the smaller.
pub fn select_bandwidth(params: &WorkloadParams, schema: &ParticipationSchema) -> Result<usize> {
    Ok(best_bisr(params, schema, Execution::default())?.bandwidth)
}

/// The report at the selected bandwidth.
pub fn best_bisr(
    params: &WorkloadParams,
    schema: &ParticipationSchema,
    exec: Execution,
) -> Result<ErrorReport> {
    let grid = bandwidth_candidates(params.n(), schema.b());
    let reports = rmse_bandwidth_sweep_with(params, schema, FactorizationKind::Bisr, &grid, exec)?;
    Ok(argmin(reports))
}

fn argmin(reports: Vec<ErrorReport>) -> ErrorReport {
    // Sorted by bandwidth, so a strict comparison keeps the smaller p on ties.
    reports
        .into_iter()
        .reduce(|best, r| if r.rmse < best.rmse { r } else { best })
        .expect("non-empty sweep")
}

/// How each size in a size sweep picks its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthRule {
    /// BISR at the selected `p*`.
    Selected,
    /// `p = b`.
    Separation,
    Fixed(usize),
}

/// RMSE as the number of steps grows with `k` fixed and `b = n / k`.
pub fn rmse_size_sweep(
    alpha: f64,
    beta: f64,
    k: usize,
    sizes: &[usize],
    kind: FactorizationKind,
    rule: BandwidthRule,
) -> Result<Vec<ErrorReport>> {
    rmse_size_sweep_with(alpha, beta, k, sizes, kind, rule, Execution::default())
}

pub fn rmse_size_sweep_with(
    alpha: f64,
    beta: f64,
    k: usize,
    sizes: &[usize],
    kind: FactorizationKind,
    rule: BandwidthRule,
    exec: Execution,
) -> Result<Vec<ErrorReport>> {
    if sizes.is_empty() {
        return Err(invalid("size list must be non-empty"));
    }
    let mut ns = sizes.to_vec();
    ns.sort_unstable();
    ns.dedup();
    exec.map(&ns, |&n| {
        let params = WorkloadParams::new(n, alpha, beta)?;
        let schema = ParticipationSchema::from_participations(n, k)?;
        match (kind, rule) {
            (FactorizationKind::Bisr, BandwidthRule::Selected) => {
                // Inner sweep stays sequential; parallelism is across sizes.
                best_bisr(&params, &schema, Execution::Sequential)
            }
            (_, BandwidthRule::Selected) | (_, BandwidthRule::Separation) => {
                report_for(kind, &params, &schema, schema.b())
            }
            (_, BandwidthRule::Fixed(p)) => report_for(kind, &params, &schema, p.min(n)),
        }
    })
    .into_iter()
    .collect()
}

/// Writes reports as CSV, floats with 12 significant digits.
pub fn write_reports_csv<W: Write>(writer: W, reports: &[ErrorReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for r in reports {
        w.write_record([
            r.factorization_kind.as_str().to_string(),
            r.n().to_string(),
            sig(r.alpha, 12),
            sig(r.beta, 12),
            r.schema.k().to_string(),
            r.schema.b().to_string(),
            r.bandwidth.to_string(),
            sig(r.sensitivity, 12),
            sig(r.b_frobenius_sq, 12),
            sig(r.rmse, 12),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{bisr, from_inverse_band, identity_factorization};
    use crate::toeplitz::r_sequence;

    #[test]
    fn identity_prefix_sum_error() {
        let params = WorkloadParams::prefix_sum(7).unwrap();
        let schema = ParticipationSchema::new(7, 7, 1).unwrap();
        let r = expected_error(&identity_factorization(&params), &schema).unwrap();
        assert_eq!(r.b_frobenius_sq, 28.0);
        assert!((r.rmse - 2.0).abs() < 1e-15);
        assert_eq!(r.noise_scale, r.sensitivity);
    }

    #[test]
    fn full_square_root_error_by_direct_sum() {
        let n = 64;
        let params = WorkloadParams::prefix_sum(n).unwrap();
        let schema = ParticipationSchema::new(n, n, 1).unwrap();
        let r = expected_error(&bisr(&params, n).unwrap(), &schema).unwrap();
        let rs = r_sequence(n);
        let frob: f64 = (0..n).map(|i| (n - i) as f64 * rs[i] * rs[i]).sum();
        let sens: f64 = rs.iter().map(|x| x * x).sum::<f64>().sqrt();
        let oracle = (frob / n as f64).sqrt() * sens;
        assert!((r.rmse - oracle).abs() <= 1e-12 * oracle);
        assert!((r.rmse - r.sensitivity * (r.b_frobenius_sq / n as f64).sqrt()).abs() <= 1e-12 * r.rmse);
    }

    #[test]
    fn single_band_quarter_power_scaling() {
        let n = 256usize;
        let params = WorkloadParams::prefix_sum(n).unwrap();
        let schema = ParticipationSchema::new(n, n, 1).unwrap();
        let lambda = (1.0 - 1.0 / (n as f64).sqrt()).sqrt();
        let f = from_inverse_band(&params, &[1.0, -lambda]).unwrap();
        let r = expected_error(&f, &schema).unwrap();
        assert!(r.rmse <= 2.0 * (n as f64).powf(0.25), "{}", r.rmse);
    }

    #[test]
    fn schema_mismatch_rejected() {
        let params = WorkloadParams::prefix_sum(8).unwrap();
        let schema = ParticipationSchema::new(9, 3, 1).unwrap();
        assert!(expected_error(&identity_factorization(&params), &schema).is_err());
    }

    #[test]
    fn sweep_sorted_and_rejects_bad_input() {
        let params = WorkloadParams::prefix_sum(64).unwrap();
        let schema = ParticipationSchema::from_participations(64, 4).unwrap();
        let reps = rmse_bandwidth_sweep(&params, &schema, FactorizationKind::Bisr, &[8, 2, 4, 2]).unwrap();
        assert_eq!(reps.iter().map(|r| r.bandwidth).collect::<Vec<_>>(), vec![2, 4, 8]);
        assert!(rmse_bandwidth_sweep(&params, &schema, FactorizationKind::Bisr, &[]).is_err());
        assert!(rmse_bandwidth_sweep(&params, &schema, FactorizationKind::Bisr, &[65]).is_err());
    }

    #[test]
    fn sequential_and_parallel_sweeps_agree() {
        let params = WorkloadParams::new(256, 1.0, 0.9).unwrap();
        let schema = ParticipationSchema::from_participations(256, 4).unwrap();
        let grid = dyadic_grid(256);
        let a = rmse_bandwidth_sweep_with(&params, &schema, FactorizationKind::Bsr, &grid, Execution::Sequential).unwrap();
        let b = rmse_bandwidth_sweep_with(&params, &schema, FactorizationKind::Bsr, &grid, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn candidates_include_distinguished_points() {
        let c = bandwidth_candidates(1024, 128);
        assert!(c.contains(&128));
        assert!(c.contains(&((128.0 * 128f64.ln()).ceil() as usize).min(1024)));
        assert_eq!(*c.last().unwrap(), 1024);
        assert_eq!(bandwidth_candidates(8, 1), vec![1, 2, 4, 8]);
    }

    #[test]
    fn selected_bandwidth_is_grid_minimum() {
        let params = WorkloadParams::prefix_sum(1024).unwrap();
        let schema = ParticipationSchema::from_participations(1024, 8).unwrap();
        let p = select_bandwidth(&params, &schema).unwrap();
        let grid = bandwidth_candidates(1024, 128);
        let reps = rmse_bandwidth_sweep(&params, &schema, FactorizationKind::Bisr, &grid).unwrap();
        let best = reps.iter().find(|r| r.bandwidth == p).unwrap().rmse;
        assert!(reps.iter().all(|r| best <= r.rmse));
    }

    #[test]
    fn single_participation_selection_beats_full_root() {
        let params = WorkloadParams::prefix_sum(256).unwrap();
        let schema = ParticipationSchema::new(256, 256, 1).unwrap();
        let best = best_bisr(&params, &schema, Execution::default()).unwrap();
        let full = expected_error(&bisr(&params, 256).unwrap(), &schema).unwrap();
        assert!(best.rmse <= full.rmse);
    }

    #[test]
    fn csv_format() {
        let params = WorkloadParams::prefix_sum(7).unwrap();
        let schema = ParticipationSchema::new(7, 7, 1).unwrap();
        let r = expected_error(&identity_factorization(&params), &schema).unwrap();
        let mut buf = Vec::new();
        write_reports_csv(&mut buf, &[r]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "kind,n,alpha,beta,k,b,p,sensitivity,b_frob_sq,rmse");
        assert_eq!(
            lines.next().unwrap(),
            "identity,7,1.00000000000e0,0.00000000000e0,1,7,1,1.00000000000e0,2.80000000000e1,2.00000000000e0"
        );
    }
}
