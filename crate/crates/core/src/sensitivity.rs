//! Sensitivity of a lower-triangular Toeplitz strategy `C` under
//! b-min-separated participation: at most `k` participations, any two at
//! least `b` steps apart.
//!
//! Three routes are provided:
//!
//! - [`sens_monotone_toeplitz`]: the column-sum formula, exact when the
//!   coefficients are non-negative and non-increasing.
//! - [`sens_gram_upper_bound`]: `max_pi sqrt(sum_{i,j in pi} |(C^T C)_{ij}|)`,
//!   a bound for any `C`.
//! - [`brute_force_sensitivity`]: exhaustive search over participation sets,
//!   for small `n` only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;

/// Slack allowed when checking monotonicity, relative to the leading coefficient.
pub const MONOTONE_TOL: f64 = 1e-12;

/// Largest `n` accepted by [`brute_force_sensitivity`].
pub const BRUTE_FORCE_MAX_N: usize = 24;

/// Largest number of patterns [`sens_gram_upper_bound`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipationSchema {
    n: usize,
    b: usize,
    k: usize,
}

impl ParticipationSchema {
    /// Requires `1 <= b <= n` and `1 <= k <= ceil(n / b)`.
    pub fn new(n: usize, b: usize, k: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSchema("n must be positive".into()));
        }
        if b == 0 || b > n {
            return Err(Error::InvalidSchema(format!("separation b must lie in [1, {n}], got {b}")));
        }
        let max_k = n.div_ceil(b);
        if k == 0 || k > max_k {
            return Err(Error::InvalidSchema(format!(
                "participations k must lie in [1, {max_k}] for n={n}, b={b}, got {k}"
            )));
        }
        Ok(Self { n, b, k })
    }

    /// `b = n / k`, the usual convention `k = ceil(n / b)`.
    pub fn from_participations(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidSchema(format!("k must lie in [1, {n}], got {k}")));
        }
        Self::new(n, n / k, k)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Zero-based columns `0, b, 2b, ..., (k-1)b`.
    pub fn canonical_pattern(&self) -> Vec<usize> {
        (0..self.k).map(|j| j * self.b).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monotonicity {
    /// Reject coefficients that are not non-negative and non-increasing.
    Strict,
    /// Replace `|c|` by its running suffix maximum when needed, giving an upper bound.
    Majorize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sensitivity {
    pub value: f64,
    /// The majorized envelope was used, so `value` is an upper bound.
    pub majorized: bool,
}

/// Index of the first violation of non-negative, non-increasing order.
pub fn monotone_violation(c: &[f64]) -> Option<usize> {
    let scale = c.first().map_or(0.0, |x| x.abs()).max(f64::MIN_POSITIVE);
    let tol = MONOTONE_TOL * scale;
    for (i, &x) in c.iter().enumerate() {
        if x < -tol {
            return Some(i);
        }
        if i > 0 && x > c[i - 1] + tol {
            return Some(i);
        }
    }
    None
}

/// `m_j = max_{t >= j} |c_t|`, the smallest non-increasing majorant of `|c|`.
pub fn majorant(c: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; c.len()];
    let mut running = 0.0f64;
    for i in (0..c.len()).rev() {
        running = running.max(c[i].abs());
        out[i] = running;
    }
    out
}

/// Sum of the columns `0, b, ..., (k-1)b` of the LTT matrix.
fn canonical_column_sum(c: &[f64], schema: &ParticipationSchema) -> Vec<f64> {
    let n = schema.n;
    let c = &c[..c.len().min(n)];
    let mut v = vec![0.0; n];
    for start in schema.canonical_pattern() {
        let len = (n - start).min(c.len());
        for (o, &x) in v[start..start + len].iter_mut().zip(&c[..len]) {
            *o += x;
        }
    }
    v
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Exact sensitivity for non-negative, non-increasing coefficients.
pub fn sens_monotone_toeplitz(c: &[f64], schema: &ParticipationSchema) -> Result<f64> {
    Ok(sens_toeplitz(c, schema, Monotonicity::Strict)?.value)
}

/// Column-sum sensitivity, falling back to the majorant when allowed.
pub fn sens_toeplitz(c: &[f64], schema: &ParticipationSchema, mode: Monotonicity) -> Result<Sensitivity> {
    let c = &c[..c.len().min(schema.n)];
    match (monotone_violation(c), mode) {
        (None, _) => Ok(Sensitivity {
            value: norm(&canonical_column_sum(c, schema)),
            majorized: false,
        }),
        (Some(index), Monotonicity::Strict) => Err(Error::NotMonotone { index }),
        (Some(_), Monotonicity::Majorize) => Ok(Sensitivity {
            value: norm(&canonical_column_sum(&majorant(c), schema)),
            majorized: true,
        }),
    }
}

/// Squared norm of the canonical column sum, with the majorant applied when
/// `c` is not monotone. Used by the optimizer's loss.
pub(crate) fn canonical_sens_sq_majorized(c: &[f64], schema: &ParticipationSchema) -> (f64, bool) {
    let c = &c[..c.len().min(schema.n)];
    match monotone_violation(c) {
        None => (canonical_column_sum(c, schema).iter().map(|x| x * x).sum(), false),
        Some(_) => (
            canonical_column_sum(&majorant(c), schema).iter().map(|x| x * x).sum(),
            true,
        ),
    }
}

/// Entries of `C^T C` for a Toeplitz `C` of size `n`.
///
/// Small `n` gets a dense table filled by the diagonal recurrence
/// `G(i,j) = G(i+1,j+1) + c[n-1-i] c[n-1-j]`; larger sizes compute on demand.
pub struct Gram<'a> {
    c: &'a [f64],
    n: usize,
    dense: Option<Vec<f64>>,
}

const DENSE_GRAM_MAX_N: usize = 1024;

impl<'a> Gram<'a> {
    pub fn new(c: &'a [f64], n: usize) -> Self {
        let c = &c[..c.len().min(n)];
        let dense = (n <= DENSE_GRAM_MAX_N).then(|| {
            let at = |t: usize| c.get(t).copied().unwrap_or(0.0);
            let mut g = vec![0.0; n * n];
            for i in (0..n).rev() {
                for j in (i..n).rev() {
                    let tail = if j + 1 < n { g[(i + 1) * n + j + 1] } else { 0.0 };
                    let v = tail + at(n - 1 - i) * at(n - 1 - j);
                    g[i * n + j] = v;
                    g[j * n + i] = v;
                }
            }
            g
        });
        Self { c, n, dense }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if let Some(g) = &self.dense {
            return g[i * self.n + j];
        }
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let d = hi - lo;
        let len = (self.n - hi).min(self.c.len().saturating_sub(d));
        (0..len).map(|s| self.c[s + d] * self.c[s]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternMode {
    /// Every b-separated set of at most `k` columns.
    Enumerate,
    /// Only `{0, b, ..., (k-1)b}`.
    Canonical,
}

/// Number of non-empty b-separated column sets of size at most `k`, saturating.
pub fn pattern_count(schema: &ParticipationSchema) -> u128 {
    let (n, b, k) = (schema.n, schema.b, schema.k);
    // f[i][r]: sets (including empty) drawn from columns >= i with at most r elements.
    let mut f = vec![vec![1u128; k + 1]; n + b + 1];
    for i in (0..n).rev() {
        for r in 1..=k {
            f[i][r] = f[i + 1][r].saturating_add(f[i + b][r - 1]);
        }
    }
    f[0][k] - 1
}

/// Upper bound `max_pi sqrt(sum_{i,j in pi} |G_ij|)`.
pub fn sens_gram_upper_bound(c: &[f64], schema: &ParticipationSchema, mode: PatternMode) -> Result<f64> {
    let gram = Gram::new(c, schema.n);
    match mode {
        PatternMode::Canonical => {
            let pat = schema.canonical_pattern();
            let total: f64 = pat
                .iter()
                .flat_map(|&i| pat.iter().map(move |&j| (i, j)))
                .map(|(i, j)| gram.get(i, j).abs())
                .sum();
            Ok(total.sqrt())
        }
        PatternMode::Enumerate => {
            let patterns = pattern_count(schema);
            if patterns > ENUMERATION_LIMIT {
                return Err(Error::EnumerationTooLarge {
                    patterns,
                    limit: ENUMERATION_LIMIT,
                });
            }
            let mut best = 0.0f64;
            let mut chosen = Vec::with_capacity(schema.k);
            gram_dfs(&gram, schema, 0, 0.0, &mut chosen, &mut best);
            Ok(best.sqrt())
        }
    }
}

fn gram_dfs(
    gram: &Gram<'_>,
    schema: &ParticipationSchema,
    next: usize,
    total: f64,
    chosen: &mut Vec<usize>,
    best: &mut f64,
) {
    if chosen.len() == schema.k {
        return;
    }
    for t in next..schema.n {
        let added = gram.get(t, t).abs()
            + 2.0 * chosen.iter().map(|&s| gram.get(s, t).abs()).sum::<f64>();
        let new_total = total + added;
        *best = best.max(new_total);
        chosen.push(t);
        gram_dfs(gram, schema, t + schema.b, new_total, chosen, best);
        chosen.pop();
    }
}

/// Exhaustive `max_pi ‖C pi‖_2` over b-separated 0/1 participation vectors
/// with at most `k` ones. Requires `n <= 24`.
pub fn brute_force_sensitivity(c: &[f64], schema: &ParticipationSchema) -> Result<f64> {
    brute_force_sensitivity_with(c, schema, Execution::default())
}

pub fn brute_force_sensitivity_with(
    c: &[f64],
    schema: &ParticipationSchema,
    exec: Execution,
) -> Result<f64> {
    let n = schema.n;
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::InvalidArgument(format!(
            "brute force enumeration supports n <= {BRUTE_FORCE_MAX_N}, got {n}"
        )));
    }
    let dense = crate::toeplitz::ToeplitzCoeffs::new(c.to_vec())?.to_dense(n);
    let columns: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| dense[i][j]).collect()).collect();
    let col_norms: Vec<f64> = columns.iter().map(|col| norm(col)).collect();
    let search = Search {
        columns: &columns,
        col_norms: &col_norms,
        b: schema.b,
        k: schema.k,
    };
    // Split on the first chosen column; each branch is independent.
    let per_first = exec.map_range(n, |first| {
        let mut best = 0.0;
        let mut acc = columns[first].clone();
        best = f64::max(best, norm(&acc));
        search.dfs(first + schema.b, 1, &mut acc, &mut best);
        best
    });
    Ok(per_first.into_iter().fold(0.0, f64::max))
}

struct Search<'a> {
    columns: &'a [Vec<f64>],
    col_norms: &'a [f64],
    b: usize,
    k: usize,
}

impl Search<'_> {
    fn dfs(&self, next: usize, used: usize, acc: &mut Vec<f64>, best: &mut f64) {
        if used == self.k || next >= self.columns.len() {
            return;
        }
        // Column norms shrink with the index, so the earliest admissible
        // columns bound any completion.
        let remaining = self.k - used;
        let optimistic = norm(acc)
            + (0..remaining)
                .map(|r| next + r * self.b)
                .take_while(|&t| t < self.columns.len())
                .map(|t| self.col_norms[t])
                .sum::<f64>();
        if optimistic <= *best {
            return;
        }
        for t in next..self.columns.len() {
            for (a, &x) in acc.iter_mut().zip(&self.columns[t]) {
                *a += x;
            }
            *best = best.max(norm(acc));
            self.dfs(t + self.b, used + 1, acc, best);
            for (a, &x) in acc.iter_mut().zip(&self.columns[t]) {
                *a -= x;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorization::{bisr, bsr};
    use crate::toeplitz::r_sequence;
    use crate::workload::{workload_coeffs, WorkloadParams};
    use proptest::prelude::*;

    fn schema(n: usize, b: usize, k: usize) -> ParticipationSchema {
        ParticipationSchema::new(n, b, k).unwrap()
    }

    #[test]
    fn schema_validation() {
        assert!(ParticipationSchema::new(0, 1, 1).is_err());
        assert!(ParticipationSchema::new(6, 0, 1).is_err());
        assert!(ParticipationSchema::new(6, 7, 1).is_err());
        assert!(ParticipationSchema::new(6, 2, 4).is_err());
        assert!(ParticipationSchema::new(7, 2, 4).is_ok());
        assert_eq!(ParticipationSchema::from_participations(1024, 8).unwrap().b(), 128);
    }

    #[test]
    fn identity_strategy_is_sqrt_k() {
        for (b, k) in [(1, 3), (2, 3), (3, 2)] {
            let s = sens_monotone_toeplitz(&[1.0], &schema(9, b, k)).unwrap();
            assert!((s - (k as f64).sqrt()).abs() < 1e-15);
            let g = sens_gram_upper_bound(&[1.0], &schema(9, b, k), PatternMode::Enumerate).unwrap();
            assert!((g - (k as f64).sqrt()).abs() < 1e-15);
        }
        let bf = brute_force_sensitivity(&[1.0], &schema(3, 1, 2)).unwrap();
        assert!((bf - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn prefix_sum_column_sum() {
        // Columns 0, 2, 4 of the 6x6 all-ones lower triangle sum to (1,1,2,2,3,3).
        let s = sens_monotone_toeplitz(&[1.0; 6], &schema(6, 2, 3)).unwrap();
        assert!((s - 28f64.sqrt()).abs() < 1e-14);
        let bf = brute_force_sensitivity(&[1.0; 6], &schema(6, 2, 3)).unwrap();
        assert!((bf - s).abs() < 1e-14);
    }

    #[test]
    fn prefix_sum_canonical_pattern_is_optimal() {
        // Columns {0, 3} give (1,1,1,2,2,2).
        let bf = brute_force_sensitivity(&[1.0; 6], &schema(6, 3, 2)).unwrap();
        assert!((bf - 15f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn r_sequence_matches_brute_force() {
        let c = r_sequence(9);
        let s = schema(9, 3, 3);
        let a = sens_monotone_toeplitz(&c, &s).unwrap();
        let b = brute_force_sensitivity(&c, &s).unwrap();
        let g = sens_gram_upper_bound(&c, &s, PatternMode::Enumerate).unwrap();
        assert!((a - b).abs() <= 1e-12);
        assert!((a - g).abs() <= 1e-12);
    }

    #[test]
    fn bisr_matches_brute_force() {
        let params = WorkloadParams::prefix_sum(12).unwrap();
        let f = bisr(&params, 3).unwrap();
        let s = schema(12, 4, 3);
        let a = sens_monotone_toeplitz(f.c_coeffs(), &s).unwrap();
        let b = brute_force_sensitivity(f.c_coeffs(), &s).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn mixed_sign_gram_bounds_brute_force() {
        let c = [1.0, -0.3, 0.1];
        let s = schema(6, 2, 2);
        let g = sens_gram_upper_bound(&c, &s, PatternMode::Enumerate).unwrap();
        let b = brute_force_sensitivity(&c, &s).unwrap();
        assert!(g >= b - 1e-15);
        assert!(matches!(sens_monotone_toeplitz(&c, &s), Err(Error::NotMonotone { index: 1 })));
        let m = sens_toeplitz(&c, &s, Monotonicity::Majorize).unwrap();
        assert!(m.majorized && m.value >= b);
    }

    #[test]
    fn gram_dense_and_on_demand_agree() {
        let c = r_sequence(40);
        let dense = Gram::new(&c, 40);
        let lazy = Gram { c: &c, n: 40, dense: None };
        for i in 0..40 {
            for j in 0..40 {
                assert!((dense.get(i, j) - lazy.get(i, j)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let s = schema(2000, 1, 10);
        assert!(pattern_count(&s) > ENUMERATION_LIMIT);
        assert!(matches!(
            sens_gram_upper_bound(&[1.0], &s, PatternMode::Enumerate),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(sens_gram_upper_bound(&[1.0], &s, PatternMode::Canonical).is_ok());
    }

    #[test]
    fn pattern_count_small() {
        // n=4, b=2, k=2: {0},{1},{2},{3},{0,2},{0,3},{1,3}
        assert_eq!(pattern_count(&schema(4, 2, 2)), 7);
        assert!(brute_force_sensitivity(&[1.0], &schema(25, 1, 1)).is_err());
    }

    #[test]
    fn prefix_sum_strategy_lower_bound() {
        for (n, k) in [(16usize, 4usize), (64, 4), (256, 8)] {
            let params = WorkloadParams::prefix_sum(n).unwrap();
            let s = ParticipationSchema::from_participations(n, k).unwrap();
            let sens = sens_monotone_toeplitz(&workload_coeffs(&params), &s).unwrap();
            assert!(sens >= k as f64 * (n as f64).sqrt() / 3f64.sqrt());
        }
    }

    #[test]
    fn bsr_matches_brute_force_small_grid() {
        for n in [5usize, 10, 14] {
            let params = WorkloadParams::new(n, 1.0, 0.5).unwrap();
            let f = bsr(&params, 3).unwrap();
            for b in 1..=3 {
                for k in 1..=n.div_ceil(b).min(3) {
                    let s = schema(n, b, k);
                    let a = sens_monotone_toeplitz(f.c_coeffs(), &s).unwrap();
                    let bf = brute_force_sensitivity_with(f.c_coeffs(), &s, Execution::Sequential).unwrap();
                    assert!((a - bf).abs() <= 1e-12);
                }
            }
        }
    }

    fn non_increasing(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn monotone_formula_is_exact(raw in prop::collection::vec(0.0f64..1.0, 1..20), n in 1usize..=20, b in 1usize..=5, k in 1usize..=5) {
            let b = b.min(n);
            let k = k.min(n.div_ceil(b));
            let c = non_increasing(raw);
            let s = schema(n, b, k);
            let formula = sens_monotone_toeplitz(&c, &s).unwrap();
            let bf = brute_force_sensitivity(&c, &s).unwrap();
            prop_assert!((formula - bf).abs() <= 1e-12 * formula.max(1.0));
        }

        #[test]
        fn gram_bound_dominates(c in prop::collection::vec(-1.0f64..1.0, 1..12), n in 1usize..=12, b in 1usize..=4, k in 1usize..=4) {
            let b = b.min(n);
            let k = k.min(n.div_ceil(b));
            let s = schema(n, b, k);
            let g = sens_gram_upper_bound(&c, &s, PatternMode::Enumerate).unwrap();
            let bf = brute_force_sensitivity(&c, &s).unwrap();
            prop_assert!(g >= bf - 1e-12);
            let m = sens_toeplitz(&c, &s, Monotonicity::Majorize).unwrap();
            prop_assert!(m.value >= bf - 1e-12);
        }

        #[test]
        fn monotone_in_k_and_b(raw in prop::collection::vec(0.0f64..1.0, 1..30), n in 2usize..=30, b in 1usize..=6) {
            let c = non_increasing(raw);
            let b = b.min(n);
            let max_k = n.div_ceil(b);
            let mut prev = 0.0;
            for k in 1..=max_k {
                let s = sens_monotone_toeplitz(&c, &schema(n, b, k)).unwrap();
                prop_assert!(s >= prev - 1e-12);
                prev = s;
            }
            // Larger separation with the same k can only lower sensitivity.
            if b < n && 2 <= n.div_ceil(b + 1) {
                let tight = sens_monotone_toeplitz(&c, &schema(n, b, 2)).unwrap();
                let loose = sens_monotone_toeplitz(&c, &schema(n, b + 1, 2)).unwrap();
                prop_assert!(loose <= tight + 1e-12);
            }
        }
    }
}
