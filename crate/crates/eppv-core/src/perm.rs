//! Permutation generation and permutation p-values.
//!
//! Exhaustive enumeration walks all `n!` index permutations in lexicographic
//! order (bit-reproducible); Monte Carlo draws `m` independent uniform
//! permutations by Fisher-Yates from a seeded ChaCha stream. The p-value
//! counting rule is `>=` with a small absolute slack, since permuted
//! statistics are re-arrangements of the same summands and exact float ties
//! are routine.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::Error;
use crate::glm::{fit_null, Dataset};
use crate::rng::rng_from;
use crate::score::{centered, Detail, Method, TestResult};

/// Exhaustive enumeration is capped at 9! = 362880 permutations.
pub const EXHAUSTIVE_MAX_N: usize = 9;
/// Minimum sampled permutations in Monte Carlo mode.
pub const MIN_MONTE_CARLO_M: usize = 19;
/// Absolute slack for the `>=` tie rule.
pub const TIE_SLACK: f64 = 1e-12;

/// Which tail(s) of the permutation distribution count as extreme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    TwoSided,
    Greater,
    Less,
}

impl Side {
    /// Map a statistic so that "large" always means "extreme".
    pub fn orient(self, s: f64) -> f64 {
        match self {
            Side::Greater => s,
            Side::Less => -s,
            Side::TwoSided => s.abs(),
        }
    }
}

/// Source of permutations: all `n!`, or `m` sampled ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PermScheme {
    Exhaustive,
    MonteCarlo { m: usize, seed: u64 },
}

impl PermScheme {
    pub fn monte_carlo(m: usize, seed: u64) -> Self {
        PermScheme::MonteCarlo { m, seed }
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, PermScheme::Exhaustive)
    }

    /// Check the scheme against the sample size.
    pub fn validate(&self, n: usize) -> Result<(), Error> {
        match self {
            PermScheme::Exhaustive if n > EXHAUSTIVE_MAX_N => Err(Error::InvalidConfig(format!(
                "exhaustive permutations allowed only for n <= {EXHAUSTIVE_MAX_N}, got n = {n}"
            ))),
            PermScheme::MonteCarlo { m, .. } if *m < MIN_MONTE_CARLO_M => {
                Err(Error::InvalidConfig(format!(
                    "monte carlo permutation count must be >= {MIN_MONTE_CARLO_M}, got {m}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of permutations the scheme produces for sample size `n`.
    pub fn count(&self, n: usize) -> usize {
        match self {
            PermScheme::Exhaustive => (1..=n).product(),
            PermScheme::MonteCarlo { m, .. } => *m,
        }
    }

    /// Copy of the scheme with the Monte Carlo seed replaced (used when a
    /// caller derives per-unit seeds); exhaustive schemes are unchanged.
    pub fn reseeded(self, seed: u64) -> Self {
        match self {
            PermScheme::Exhaustive => PermScheme::Exhaustive,
            PermScheme::MonteCarlo { m, .. } => PermScheme::MonteCarlo { m, seed },
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            PermScheme::Exhaustive => None,
            PermScheme::MonteCarlo { seed, .. } => Some(*seed),
        }
    }

    pub fn counting_mode(&self) -> CountingMode {
        match self {
            PermScheme::Exhaustive => CountingMode::Exhaustive,
            PermScheme::MonteCarlo { .. } => CountingMode::MonteCarlo,
        }
    }
}

/// Advance `a` to its lexicographic successor; false once at the last one.
fn next_permutation(a: &mut [usize]) -> bool {
    let n = a.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Visit every permutation of the scheme with a reused buffer.
pub fn for_each_permutation<F>(n: usize, scheme: &PermScheme, mut f: F) -> Result<(), Error>
where
    F: FnMut(&[usize]),
{
    scheme.validate(n)?;
    match scheme {
        PermScheme::Exhaustive => {
            let mut perm: Vec<usize> = (0..n).collect();
            loop {
                f(&perm);
                if !next_permutation(&mut perm) {
                    break;
                }
            }
        }
        PermScheme::MonteCarlo { m, seed } => {
            let mut rng = rng_from(*seed);
            let mut perm: Vec<usize> = (0..n).collect();
            for _ in 0..*m {
                for (k, v) in perm.iter_mut().enumerate() {
                    *v = k;
                }
                perm.shuffle(&mut rng);
                f(&perm);
            }
        }
    }
    Ok(())
}

/// Owned-permutation iterator over the scheme (exhaustive: lexicographic).
pub fn permutation_stream(
    n: usize,
    scheme: &PermScheme,
) -> Result<impl Iterator<Item = Vec<usize>>, Error> {
    scheme.validate(n)?;
    let mut perms = Vec::with_capacity(scheme.count(n));
    for_each_permutation(n, scheme, |p| perms.push(p.to_vec()))?;
    Ok(perms.into_iter())
}

/// How a set of permuted statistics is turned into a p-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountingMode {
    /// Proportion of all permutations at least as extreme (the identity is
    /// among them, so p >= 1/n!).
    Exhaustive,
    /// Add-one smoothing `(1 + k) / (m + 1)` for sampled permutations.
    MonteCarlo,
}

/// Number of permuted statistics at least as extreme as `s_obs` under the
/// tie rule (`>=` with [`TIE_SLACK`]).
pub fn exceedance_count(s_obs: f64, s_perms: &[f64], side: Side) -> usize {
    let threshold = side.orient(s_obs) - TIE_SLACK;
    s_perms.iter().filter(|&&s| side.orient(s) >= threshold).count()
}

/// Numerator and denominator of the permutation p-value as exact integers.
pub fn pvalue_ratio(exceed: usize, n_perms: usize, mode: CountingMode) -> (u64, u64) {
    match mode {
        CountingMode::Exhaustive => (exceed as u64, n_perms as u64),
        CountingMode::MonteCarlo => (1 + exceed as u64, n_perms as u64 + 1),
    }
}

/// p-value of `s_obs` against the permuted statistics `s_perms`.
pub fn permutation_pvalue(s_obs: f64, s_perms: &[f64], mode: CountingMode, side: Side) -> f64 {
    assert!(!s_perms.is_empty(), "empty permutation distribution");
    let (num, den) = pvalue_ratio(exceedance_count(s_obs, s_perms, side), s_perms.len(), mode);
    num as f64 / den as f64
}

/// Permutation-of-residuals score test: permute the null-model residuals
/// against the centered tested covariate.
pub fn pr_test(data: &Dataset, scheme: &PermScheme, side: Side) -> Result<TestResult, Error> {
    let n = data.n();
    scheme.validate(n)?;
    let fit = fit_null(data)?;
    let zc = centered(data.z_test().as_slice());
    let r = fit.residuals.as_slice();

    let s_obs: f64 = zc.iter().zip(r).map(|(z, ri)| z * ri).sum();
    let mut s_perms = Vec::with_capacity(scheme.count(n));
    for_each_permutation(n, scheme, |perm| {
        let s: f64 = zc.iter().zip(perm).map(|(z, &j)| z * r[j]).sum();
        s_perms.push(s);
    })?;
    let p = permutation_pvalue(s_obs, &s_perms, scheme.counting_mode(), side);

    Ok(TestResult {
        method: Method::Pr,
        statistic: s_obs,
        p_value: p,
        side,
        detail: Detail::Permutation { n_perms: s_perms.len(), exhaustive: scheme.is_exhaustive() },
        seed: scheme.seed(),
    })
}
