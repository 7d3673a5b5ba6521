//! Analytic Gaussian mechanism: the smallest `sigma` for which
//! `Phi(D/2s - e s/D) - e^e Phi(-D/2s - e s/D) <= delta`.

use statrs::function::erf::erfc;

use crate::error::{invalid, Error, Result};

const MAX_BRACKET_STEPS: usize = 200;
const BISECTION_REL_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    epsilon: f64,
    delta: f64,
    sensitivity: f64,
}

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, sensitivity: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(sensitivity > 0.0 && sensitivity.is_finite()) {
            return Err(invalid(format!("sensitivity must be positive, got {sensitivity}")));
        }
        Ok(Self { epsilon, delta, sensitivity })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sensitivity(&self) -> f64 {
        self.sensitivity
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Left-hand side of the analytic Gaussian condition: the smallest delta
/// achieved at `(epsilon, sensitivity, sigma)`.
pub fn analytic_gaussian_delta(epsilon: f64, sensitivity: f64, sigma: f64) -> f64 {
    let a = sensitivity / (2.0 * sigma);
    let b = epsilon * sigma / sensitivity;
    normal_cdf(a - b) - epsilon.exp() * normal_cdf(-a - b)
}

/// Smallest `sigma` satisfying the condition, by bisection.
pub fn calibrate_sigma(pp: &PrivacyParams) -> Result<f64> {
    let (eps, delta, sens) = (pp.epsilon, pp.delta, pp.sensitivity);
    let lhs = |s: f64| analytic_gaussian_delta(eps, sens, s);

    let mut hi = 10.0 * sens;
    let mut steps = 0;
    while lhs(hi) > delta {
        hi *= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || !hi.is_finite() {
            return Err(Error::Bracketing(format!("no feasible sigma found for {pp:?}")));
        }
    }
    let mut lo = (sens / 10.0).min(hi);
    steps = 0;
    while lhs(lo) <= delta {
        lo /= 2.0;
        steps += 1;
        if steps > MAX_BRACKET_STEPS || lo == 0.0 {
            return Err(Error::Bracketing(format!("no infeasible sigma found for {pp:?}")));
        }
    }
    // Invariant: lhs(lo) > delta >= lhs(hi).
    for _ in 0..400 {
        if hi - lo <= BISECTION_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if lhs(mid) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
