//! Factorizations `A = B C` of the workload, all in coefficient form.
//!
//! - BISR bands `C^{-1} = A^{-1/2}` to `p` diagonals and re-inverts.
//! - BSR bands `C = A^{1/2}` to `p` diagonals; its inverse is dense.
//! - Identity uses `C = I`, `B = A`.
//! - Optimized assembles a factorization from any normalized inverse band.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::write_json;
use crate::toeplitz::{ltt_inverse, ltt_inverse_seeded, ltt_mul, ToeplitzCoeffs};
use crate::workload::{inv_sqrt_coeffs, sqrt_coeffs, workload_coeffs, WorkloadParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorizationKind {
    Bisr,
    Bsr,
    Identity,
    Optimized,
}

impl FactorizationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactorizationKind::Bisr => "bisr",
            FactorizationKind::Bsr => "bsr",
            FactorizationKind::Identity => "identity",
            FactorizationKind::Optimized => "optimized",
        }
    }

    /// Whether `c_inv_band` of this kind is genuinely banded.
    pub fn has_banded_inverse(self) -> bool {
        !matches!(self, FactorizationKind::Bsr)
    }
}

impl fmt::Display for FactorizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FactorizationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bisr" => Ok(FactorizationKind::Bisr),
            "bsr" => Ok(FactorizationKind::Bsr),
            "identity" => Ok(FactorizationKind::Identity),
            "optimized" | "bandinvmf" => Ok(FactorizationKind::Optimized),
            other => Err(invalid(format!("unknown factorization kind '{other}'"))),
        }
    }
}

/// A factorization `A = B C` with `C^{-1}` stored as `c_inv_band`.
///
/// For BSR the inverse is not banded and `c_inv_band` holds all `n`
/// coefficients; every other kind stores exactly `bandwidth` of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization {
    params: WorkloadParams,
    bandwidth: usize,
    kind: FactorizationKind,
    c_inv_band: ToeplitzCoeffs,
    c_coeffs: ToeplitzCoeffs,
    b_coeffs: ToeplitzCoeffs,
}

fn check_bandwidth(params: &WorkloadParams, p: usize) -> Result<()> {
    if p == 0 || p > params.n() {
        return Err(invalid(format!(
            "bandwidth p must satisfy 1 <= p <= n = {}, got {p}",
            params.n()
        )));
    }
    Ok(())
}

/// Banded inverse square root factorization with `p` bands.
pub fn bisr(params: &WorkloadParams, p: usize) -> Result<Factorization> {
    check_bandwidth(params, p)?;
    let n = params.n();
    let band = inv_sqrt_coeffs(&params.with_n(p)?);
    // The first p coefficients of C coincide with those of A^{1/2}; seed the
    // recurrence with the closed form and continue past the band.
    let head = sqrt_coeffs(&params.with_n(p)?);
    let c_coeffs = ltt_inverse_seeded(&band, &head, n)?;
    let b_coeffs = ltt_mul(&workload_coeffs(params), &band, n)?;
    Ok(Factorization {
        params: *params,
        bandwidth: p,
        kind: FactorizationKind::Bisr,
        c_inv_band: band,
        c_coeffs,
        b_coeffs,
    })
}

/// Banded square root factorization with `p` bands.
pub fn bsr(params: &WorkloadParams, p: usize) -> Result<Factorization> {
    check_bandwidth(params, p)?;
    let n = params.n();
    let head = sqrt_coeffs(&params.with_n(p)?);
    let c_inv = ltt_inverse(&head, n)?;
    let b_coeffs = ltt_mul(&workload_coeffs(params), &c_inv, n)?;
    Ok(Factorization {
        params: *params,
        bandwidth: p,
        kind: FactorizationKind::Bsr,
        c_inv_band: c_inv,
        c_coeffs: head.resized(n),
        b_coeffs,
    })
}

/// `C = I`, `B = A`.
pub fn identity_factorization(params: &WorkloadParams) -> Factorization {
    let n = params.n();
    Factorization {
        params: *params,
        bandwidth: 1,
        kind: FactorizationKind::Identity,
        c_inv_band: ToeplitzCoeffs::identity(1),
        c_coeffs: ToeplitzCoeffs::identity(n),
        b_coeffs: workload_coeffs(params),
    }
}

/// Assembles the factorization whose `C^{-1}` is the given normalized band.
pub fn from_inverse_band(params: &WorkloadParams, band: &[f64]) -> Result<Factorization> {
    let lead = *band.first().ok_or_else(|| invalid("band must be non-empty"))?;
    if lead != 1.0 {
        return Err(Error::UnnormalizedBand(lead));
    }
    check_bandwidth(params, band.len())?;
    let n = params.n();
    let c_coeffs = ltt_inverse(band, n)?;
    let b_coeffs = ltt_mul(&workload_coeffs(params), band, n)?;
    Ok(Factorization {
        params: *params,
        bandwidth: band.len(),
        kind: FactorizationKind::Optimized,
        c_inv_band: ToeplitzCoeffs::new(band.to_vec())?,
        c_coeffs,
        b_coeffs,
    })
}

/// Builds a factorization of the requested kind. `Optimized` is not
/// constructible from a bandwidth alone; see [`crate::optimizer::optimize_band`].
pub fn build(kind: FactorizationKind, params: &WorkloadParams, p: usize) -> Result<Factorization> {
    match kind {
        FactorizationKind::Bisr => bisr(params, p),
        FactorizationKind::Bsr => bsr(params, p),
        FactorizationKind::Identity => Ok(identity_factorization(params)),
        FactorizationKind::Optimized => Err(invalid(
            "optimized factorizations are produced by the optimizer, not by bandwidth",
        )),
    }
}

impl Factorization {
    pub fn params(&self) -> &WorkloadParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn kind(&self) -> FactorizationKind {
        self.kind
    }

    pub fn c_inv_band(&self) -> &ToeplitzCoeffs {
        &self.c_inv_band
    }

    pub fn c_coeffs(&self) -> &ToeplitzCoeffs {
        &self.c_coeffs
    }

    pub fn b_coeffs(&self) -> &ToeplitzCoeffs {
        &self.b_coeffs
    }

    /// `‖B‖_F^2`; subdiagonal `i` occurs `n - i` times.
    pub fn b_frobenius_sq(&self) -> f64 {
        let n = self.n();
        self.b_coeffs
            .iter()
            .take(n)
            .enumerate()
            .map(|(i, &b)| (n - i) as f64 * b * b)
            .sum()
    }

    /// Max absolute deviation of `B C` from the workload.
    pub fn reconstruction_error(&self) -> f64 {
        let n = self.n();
        let prod = crate::toeplitz::convolve(&self.b_coeffs, &self.c_coeffs, n);
        let a = workload_coeffs(&self.params);
        prod.iter().zip(a.iter()).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
    }

    /// Max absolute deviation of `C C^{-1}` from the identity.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n();
        let prod = crate::toeplitz::convolve(&self.c_coeffs, &self.c_inv_band, n);
        prod.iter()
            .enumerate()
            .fold(0.0, |m, (i, &x)| f64::max(m, (x - if i == 0 { 1.0 } else { 0.0 }).abs()))
    }

    pub fn to_document(&self) -> FactorizationDoc {
        FactorizationDoc {
            kind: self.kind,
            n: self.n(),
            alpha: self.params.alpha(),
            beta: self.params.beta(),
            p: self.bandwidth,
            c_inv_band: self.c_inv_band.to_vec(),
            c_coeffs: self.c_coeffs.to_vec(),
            b_coeffs: self.b_coeffs.to_vec(),
        }
    }

    /// Writes the JSON document with 17 significant digits per float.
    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        write_json(writer, &self.to_document())?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: FactorizationDoc = serde_json::from_str(s)?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: FactorizationDoc) -> Result<Self> {
        let params = WorkloadParams::new(doc.n, doc.alpha, doc.beta)?;
        check_bandwidth(&params, doc.p)?;
        if doc.c_coeffs.len() != doc.n || doc.b_coeffs.len() != doc.n {
            return Err(invalid("c_coeffs and b_coeffs must have length n"));
        }
        let expected_band = if doc.kind == FactorizationKind::Bsr { doc.n } else { doc.p };
        if doc.c_inv_band.len() != expected_band {
            return Err(invalid(format!(
                "c_inv_band must have length {expected_band} for kind {}",
                doc.kind
            )));
        }
        Ok(Self {
            params,
            bandwidth: doc.p,
            kind: doc.kind,
            c_inv_band: ToeplitzCoeffs::new(doc.c_inv_band)?,
            c_coeffs: ToeplitzCoeffs::new(doc.c_coeffs)?,
            b_coeffs: ToeplitzCoeffs::new(doc.b_coeffs)?,
        })
    }
}

/// Serialized form of a [`Factorization`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationDoc {
    pub kind: FactorizationKind,
    pub n: usize,
    pub alpha: f64,
    pub beta: f64,
    pub p: usize,
    pub c_inv_band: Vec<f64>,
    pub c_coeffs: Vec<f64>,
    pub b_coeffs: Vec<f64>,
}
