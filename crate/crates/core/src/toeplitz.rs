//! Algebra on lower-triangular Toeplitz (LTT) matrices stored as first-column
//! coefficients.
//!
//! An LTT matrix `M` of size `n` is determined by `m[i] = M[i][0]`; the product
//! of two LTT matrices is the truncated convolution of their coefficients, so
//! all of the routines here are power-series operations modulo `x^n`.

use std::ops::Deref;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Below this operand length convolution is done directly.
pub const FFT_THRESHOLD: usize = 128;

/// First-column coefficients of a lower-triangular Toeplitz matrix.
///
/// Entry `i` is the value on the `i`-th subdiagonal. A vector shorter than the
/// matrix size is implicitly zero-padded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ToeplitzCoeffs(Vec<f64>);

impl ToeplitzCoeffs {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(invalid("Toeplitz coefficients must be non-empty"));
        }
        Ok(Self(coeffs))
    }

    /// The identity `e_0` of length `n`.
    pub fn identity(n: usize) -> Self {
        let mut v = vec![0.0; n.max(1)];
        v[0] = 1.0;
        Self(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Copy truncated or zero-padded to exactly `n` entries.
    pub fn resized(&self, n: usize) -> Self {
        let mut v = self.0.clone();
        v.resize(n.max(1), 0.0);
        Self(v)
    }

    /// Dense `n x n` materialization. Only meant for small oracles.
    pub fn to_dense(&self, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i >= j { self.get(i - j) } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    /// Coefficient `i`, zero beyond the stored length.
    pub fn get(&self, i: usize) -> f64 {
        self.0.get(i).copied().unwrap_or(0.0)
    }
}

impl Deref for ToeplitzCoeffs {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ToeplitzCoeffs {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ToeplitzCoeffs> for Vec<f64> {
    fn from(c: ToeplitzCoeffs) -> Self {
        c.0
    }
}

/// Product of two LTT matrices of size `n`.
pub fn ltt_mul(a: &[f64], b: &[f64], n: usize) -> Result<ToeplitzCoeffs> {
    if n == 0 {
        return Err(invalid("matrix size n must be positive"));
    }
    if a.is_empty() || b.is_empty() {
        return Err(invalid("Toeplitz coefficients must be non-empty"));
    }
    Ok(ToeplitzCoeffs(convolve(a, b, n)))
}

/// Truncated convolution `c[k] = sum_j a[j] b[k-j]` for `k < n`, picking the
/// direct or FFT path by the shorter operand's effective length.
pub fn convolve(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let la = a.len().min(n);
    let lb = b.len().min(n);
    if la.min(lb) < FFT_THRESHOLD {
        convolve_direct(a, b, n)
    } else {
        convolve_fft(a, b, n)
    }
}

/// `O(n * min(len))` convolution.
pub fn convolve_direct(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let mut out = vec![0.0; n];
    for (j, &s) in short.iter().enumerate().take(n) {
        if s == 0.0 {
            continue;
        }
        let end = (n - j).min(long.len());
        for (o, &l) in out[j..j + end].iter_mut().zip(&long[..end]) {
            *o += s * l;
        }
    }
    out
}

/// `O(n log n)` convolution through a zero-padded complex FFT.
pub fn convolve_fft(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let a = &a[..a.len().min(n)];
    let b = &b[..b.len().min(n)];
    // The packed transform leaks rounding between its two halves, so an
    // all-zero operand is answered exactly.
    let zero = |v: &[f64]| v.iter().all(|&x| x == 0.0);
    if n == 0 || zero(a) || zero(b) {
        return vec![0.0; n];
    }
    let size = (a.len() + b.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    // Pack both real inputs into one complex transform: z = a + i b.
    let mut z = vec![Complex::new(0.0, 0.0); size];
    for (slot, &x) in z.iter_mut().zip(a) {
        slot.re = x;
    }
    for (slot, &x) in z.iter_mut().zip(b) {
        slot.im = x;
    }
    fwd.process(&mut z);

    // A[k] = (Z[k] + conj Z[-k]) / 2, B[k] = (Z[k] - conj Z[-k]) / 2i,
    // so A[k] B[k] = (Z[k]^2 - conj(Z[-k])^2) / 4i.
    let mut prod = vec![Complex::new(0.0, 0.0); size];
    for k in 0..size {
        let zk = z[k];
        let zm = z[(size - k) % size].conj();
        prod[k] = (zk * zk - zm * zm) * Complex::new(0.0, -0.25);
    }
    inv.process(&mut prod);

    let scale = 1.0 / size as f64;
    let mut out: Vec<f64> = prod.iter().take(n).map(|c| c.re * scale).collect();
    out.resize(n, 0.0);
    out
}

/// Inverse of an LTT matrix of size `n` via the forward substitution recurrence.
pub fn ltt_inverse(a: &[f64], n: usize) -> Result<ToeplitzCoeffs> {
    ltt_inverse_seeded(a, &[], n)
}

/// Forward substitution with the first `seed.len()` inverse coefficients
/// already known. Used when a closed form exists for a prefix of the inverse.
pub(crate) fn ltt_inverse_seeded(a: &[f64], seed: &[f64], n: usize) -> Result<ToeplitzCoeffs> {
    if n == 0 {
        return Err(invalid("matrix size n must be positive"));
    }
    let a0 = *a.first().ok_or_else(|| invalid("Toeplitz coefficients must be non-empty"))?;
    if a0 == 0.0 || !a0.is_finite() {
        return Err(Error::Singular(a0));
    }
    // Trailing zeros do not contribute to the recurrence.
    let len = a.iter().rposition(|&x| x != 0.0).map_or(1, |i| i + 1);
    let a = &a[..len];
    let inv0 = 1.0 / a0;
    let mut x = vec![0.0; n];
    let start = seed.len().min(n);
    x[..start].copy_from_slice(&seed[..start]);
    if start == 0 {
        x[0] = inv0;
    }
    for k in start.max(1)..n {
        let upper = k.min(len - 1);
        let mut acc = 0.0;
        for j in 1..=upper {
            acc += a[j] * x[k - j];
        }
        x[k] = -inv0 * acc;
    }
    Ok(ToeplitzCoeffs(x))
}

/// The LTT square root with positive diagonal, `O(n^2)`.
pub fn ltt_sqrt(a: &[f64], n: usize) -> Result<ToeplitzCoeffs> {
    if n == 0 {
        return Err(invalid("matrix size n must be positive"));
    }
    let a0 = *a.first().ok_or_else(|| invalid("Toeplitz coefficients must be non-empty"))?;
    if !(a0 > 0.0) {
        return Err(Error::NonPositiveDiagonal(a0));
    }
    let mut y = vec![0.0; n];
    y[0] = a0.sqrt();
    let denom = 2.0 * y[0];
    for k in 1..n {
        let cross: f64 = (1..k).map(|j| y[j] * y[k - j]).sum();
        let ak = a.get(k).copied().unwrap_or(0.0);
        y[k] = (ak - cross) / denom;
    }
    Ok(ToeplitzCoeffs(y))
}

/// `r_k = binom(2k, k) / 4^k`, the coefficients of `(1 - x)^{-1/2}`.
pub fn r_sequence(n: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(n);
    let mut cur = 1.0;
    for j in 0..n {
        if j > 0 {
            cur *= (2 * j - 1) as f64 / (2 * j) as f64;
        }
        r.push(cur);
    }
    r
}

/// `r~_k`, the coefficients of `(1 - x)^{1/2}`.
pub fn r_tilde_sequence(n: usize) -> Vec<f64> {
    let mut r = Vec::with_capacity(n);
    let mut cur = 1.0;
    for j in 0..n {
        if j > 0 {
            cur *= (j as f64 - 1.5) / j as f64;
        }
        r.push(cur);
    }
    r
}
