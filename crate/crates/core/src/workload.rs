//! The SGD workload `A_{alpha,beta}` (weight decay `alpha`, momentum `beta`)
//! and the closed forms of its square root and inverse square root.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::toeplitz::{convolve, r_sequence, r_tilde_sequence, ToeplitzCoeffs};

/// `|alpha - beta|` below this is treated as the forbidden `alpha == beta` case.
pub const ALPHA_BETA_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkloadParams {
    n: usize,
    alpha: f64,
    beta: f64,
}

impl WorkloadParams {
    /// Requires `n >= 1` and `0 <= beta < alpha <= 1`.
    pub fn new(n: usize, alpha: f64, beta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidWorkload("n must be positive".into()));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidWorkload(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(0.0..1.0).contains(&beta) {
            return Err(Error::InvalidWorkload(format!("beta must lie in [0, 1), got {beta}")));
        }
        if beta >= alpha || alpha - beta < ALPHA_BETA_GAP {
            return Err(Error::InvalidWorkload(format!(
                "beta must be strictly below alpha, got alpha={alpha}, beta={beta}"
            )));
        }
        Ok(Self { n, alpha, beta })
    }

    /// Prefix-sum workload (`alpha = 1`, `beta = 0`).
    pub fn prefix_sum(n: usize) -> Result<Self> {
        Self::new(n, 1.0, 0.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(n, self.alpha, self.beta)
    }
}

fn scaled(seq: Vec<f64>, factor: f64) -> Vec<f64> {
    if factor == 1.0 {
        return seq;
    }
    let mut pow = 1.0;
    seq.into_iter()
        .map(|x| {
            let v = x * pow;
            pow *= factor;
            v
        })
        .collect()
}

/// `a[k] = sum_{j<=k} alpha^j beta^(k-j) = (alpha^(k+1) - beta^(k+1)) / (alpha - beta)`.
pub fn workload_coeffs(params: &WorkloadParams) -> ToeplitzCoeffs {
    let (a, b) = (params.alpha, params.beta);
    let coeffs = if b == 0.0 {
        scaled(vec![1.0; params.n], a)
    } else {
        let denom = a - b;
        let (mut pa, mut pb) = (a, b);
        (0..params.n)
            .map(|_| {
                let v = (pa - pb) / denom;
                pa *= a;
                pb *= b;
                v
            })
            .collect()
    };
    ToeplitzCoeffs::new(coeffs).expect("n >= 1")
}

/// Coefficients of `C = A^{1/2}`: `c_k = sum_j alpha^j beta^(k-j) r_j r_(k-j)`.
pub fn sqrt_coeffs(params: &WorkloadParams) -> ToeplitzCoeffs {
    family(params, r_sequence(params.n))
}

/// Coefficients of `C^{-1} = A^{-1/2}`: `c~_k = sum_j r~_j beta^j r~_(k-j) alpha^(k-j)`.
pub fn inv_sqrt_coeffs(params: &WorkloadParams) -> ToeplitzCoeffs {
    family(params, r_tilde_sequence(params.n))
}

// Convolution of (alpha^j s_j) with (beta^j s_j), evaluated as
// alpha^k * conv(s, (beta/alpha)^j s_j)[k]. Pulling alpha^k out of the
// transform keeps FFT round-off from swamping the geometrically small tail.
fn family(params: &WorkloadParams, seq: Vec<f64>) -> ToeplitzCoeffs {
    let n = params.n;
    let base = if params.beta == 0.0 {
        seq
    } else {
        let ratio = params.beta / params.alpha;
        convolve(&seq, &scaled(seq.clone(), ratio), n)
    };
    ToeplitzCoeffs::new(scaled(base, params.alpha)).expect("n >= 1")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::{convolve_direct, ltt_sqrt};

    const GRID: [(f64, f64); 7] = [
        (1.0, 0.0),
        (1.0, 0.5),
        (1.0, 0.9),
        (0.999, 0.0),
        (0.999, 0.5),
        (0.99, 0.9),
        (0.99, 0.0),
    ];

    #[test]
    fn params_validation() {
        assert!(WorkloadParams::new(0, 1.0, 0.0).is_err());
        assert!(WorkloadParams::new(4, 0.0, 0.0).is_err());
        assert!(WorkloadParams::new(4, 1.1, 0.0).is_err());
        assert!(WorkloadParams::new(4, 0.9, 0.9).is_err());
        assert!(WorkloadParams::new(4, 0.9, 0.95).is_err());
        assert!(WorkloadParams::new(4, 0.9, 0.9 - 1e-13).is_err());
        assert!(WorkloadParams::new(4, 1.0, -0.1).is_err());
        assert!(WorkloadParams::new(4, 1.0, 0.999).is_ok());
    }

    #[test]
    fn workload_examples() {
        let p = WorkloadParams::prefix_sum(4).unwrap();
        assert_eq!(workload_coeffs(&p).as_slice(), &[1.0, 1.0, 1.0, 1.0]);
        let p = WorkloadParams::new(3, 1.0, 0.9).unwrap();
        assert!((workload_coeffs(&p)[1] - 1.9).abs() < 1e-15);
        let p = WorkloadParams::new(3, 0.999, 0.0).unwrap();
        let a = workload_coeffs(&p);
        assert!((a[1] - 0.999).abs() < 1e-15 && (a[2] - 0.998001).abs() < 1e-15);
    }

    #[test]
    fn workload_matches_direct_sum() {
        for &(alpha, beta) in &GRID {
            let p = WorkloadParams::new(50, alpha, beta).unwrap();
            let a = workload_coeffs(&p);
            for k in 0..50 {
                let direct: f64 =
                    (0..=k).map(|j| alpha.powi(j as i32) * beta.powi((k - j) as i32)).sum();
                assert!((a[k] - direct).abs() <= 1e-12 * direct.max(1.0));
            }
        }
    }

    #[test]
    fn fast_paths_return_raw_sequences() {
        let p = WorkloadParams::prefix_sum(32).unwrap();
        assert_eq!(sqrt_coeffs(&p).as_slice(), r_sequence(32).as_slice());
        assert_eq!(inv_sqrt_coeffs(&p).as_slice(), r_tilde_sequence(32).as_slice());
    }

    #[test]
    fn first_coefficients_closed_form() {
        let p = WorkloadParams::new(8, 1.0, 0.9).unwrap();
        assert!((sqrt_coeffs(&p)[1] - 0.95).abs() < 1e-15);
        for beta in [0.0, 0.3, 0.9] {
            let p = WorkloadParams::new(8, 1.0, beta).unwrap();
            assert!((inv_sqrt_coeffs(&p)[1] + (1.0 + beta) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn sqrt_squares_to_workload() {
        for &(alpha, beta) in &GRID {
            let p = WorkloadParams::new(64, alpha, beta).unwrap();
            let c = sqrt_coeffs(&p);
            let sq = convolve_direct(&c, &c, 64);
            let a = workload_coeffs(&p);
            for k in 0..64 {
                assert!((sq[k] - a[k]).abs() <= 1e-9 * a[k].max(1.0));
            }
            let oracle = ltt_sqrt(&a, 64).unwrap();
            for k in 0..64 {
                assert!((oracle[k] - c[k]).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn inverse_sqrt_inverts_sqrt() {
        let p = WorkloadParams::new(128, 0.999, 0.5).unwrap();
        let prod = convolve(&sqrt_coeffs(&p), &inv_sqrt_coeffs(&p), 128);
        assert!((prod[0] - 1.0).abs() <= 1e-10);
        assert!(prod[1..].iter().all(|x| x.abs() <= 1e-10));
    }

    #[test]
    fn sqrt_coeffs_positive_decreasing() {
        for &(alpha, beta) in &GRID {
            let c = sqrt_coeffs(&WorkloadParams::new(2048, alpha, beta).unwrap());
            assert!(c.iter().all(|&x| x > 0.0));
            assert!(c.windows(2).all(|w| w[1] < w[0]));
        }
    }
}
