//! Fisher's exact test on a 2x2 table.
//!
//! For tables with total count up to 100 the hypergeometric tail is computed
//! with exact integer binomials, so the one-sided p-value is the correctly
//! rounded rational `N/D` (and agrees bit-for-bit with an exhaustive
//! permutation count on the same table). Larger tables fall back to
//! log-factorials.

use crate::dist::ln_binomial;
use crate::error::Error;
use crate::perm::Side;
use crate::score::{Detail, Method, TestResult};

/// Largest table total handled by the exact integer kernel. Products of two
/// binomial coefficients with row sums adding to 100 stay below u128::MAX.
const EXACT_MAX_TOTAL: u64 = 100;

/// Relative tolerance when comparing table probabilities for the two-sided
/// point-probability rule in the floating-point fallback.
const TWO_SIDED_REL_TOL: f64 = 1e-7;

fn binomial_u128(n: u64, k: u64) -> u128 {
    debug_assert!(k <= n);
    let k = k.min(n - k);
    let mut result: u128 = 1;
    for i in 1..=k {
        // Exact at every step: result * (n - k + i) is divisible by i.
        result = result * (n - k + i) as u128 / i as u128;
    }
    result
}

/// One- or two-sided Fisher exact test of the table `(a, b; c, d)`.
///
/// `a` counts the top-left cell; margins are `r1 = a+b`, `c1 = a+c`. The
/// `greater` side is the upper hypergeometric tail `P(A >= a)`, `less` the
/// lower tail, and `two_sided` sums all tables no more probable than the
/// observed one. A zero row or column margin is degenerate: p = 1, flagged
/// in the detail.
pub fn fisher_exact(a: u64, b: u64, c: u64, d: u64, side: Side) -> Result<TestResult, Error> {
    let r1 = a + b;
    let r2 = c + d;
    let c1 = a + c;
    let c2 = b + d;
    let n = r1 + r2;

    let make = |p_value: f64, degenerate: bool| TestResult {
        method: Method::Fisher,
        statistic: a as f64,
        p_value,
        side,
        detail: Detail::Fisher { degenerate },
        seed: None,
    };

    if r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 {
        return Ok(make(1.0, true));
    }

    let lo = c1.saturating_sub(r2);
    let hi = r1.min(c1);
    debug_assert!((lo..=hi).contains(&a));

    let p = if n <= EXACT_MAX_TOTAL {
        // Numerators N_k = C(r1,k) C(r2,c1-k); common denominator C(n,c1).
        let numerators: Vec<u128> =
            (lo..=hi).map(|k| binomial_u128(r1, k) * binomial_u128(r2, c1 - k)).collect();
        let denom: u128 = binomial_u128(n, c1);
        debug_assert_eq!(numerators.iter().sum::<u128>(), denom);
        let obs = numerators[(a - lo) as usize];
        let sum: u128 = match side {
            Side::Greater => numerators.iter().skip((a - lo) as usize).sum(),
            Side::Less => numerators.iter().take((a - lo) as usize + 1).sum(),
            Side::TwoSided => numerators.iter().filter(|&&nk| nk <= obs).sum(),
        };
        sum as f64 / denom as f64
    } else {
        let ln_denom = ln_binomial(n, c1);
        let pmf: Vec<f64> = (lo..=hi)
            .map(|k| (ln_binomial(r1, k) + ln_binomial(r2, c1 - k) - ln_denom).exp())
            .collect();
        let obs = pmf[(a - lo) as usize];
        let sum: f64 = match side {
            Side::Greater => pmf.iter().skip((a - lo) as usize).sum(),
            Side::Less => pmf.iter().take((a - lo) as usize + 1).sum(),
            Side::TwoSided => {
                pmf.iter().filter(|&&pk| pk <= obs * (1.0 + TWO_SIDED_REL_TOL)).sum()
            }
        };
        sum.min(1.0)
    };

    Ok(make(p, false))
}

/// Hypergeometric point probability `P(A = a)` for the table's margins.
pub fn table_point_probability(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, c1) = (a + b, c + d, a + c);
    let n = r1 + r2;
    if n == 0 {
        return 1.0;
    }
    if n <= EXACT_MAX_TOTAL {
        (binomial_u128(r1, a) * binomial_u128(r2, c1 - a)) as f64 / binomial_u128(n, c1) as f64
    } else {
        (ln_binomial(r1, a) + ln_binomial(r2, c1 - a) - ln_binomial(n, c1)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial_u128(4, 2), 6);
        assert_eq!(binomial_u128(6, 3), 20);
        assert_eq!(binomial_u128(52, 5), 2_598_960);
        assert_eq!(binomial_u128(100, 50), 100891344545564193334812497256);
    }

    #[test]
    fn balanced_unit_table_upper_tail() {
        // P(A >= 1) with all margins 2: 5/6.
        let res = fisher_exact(1, 1, 1, 1, Side::Greater).unwrap();
        assert_eq!(res.p_value, 5.0 / 6.0);
    }

    #[test]
    fn diagonal_table_upper_tail() {
        let res = fisher_exact(3, 0, 0, 3, Side::Greater).unwrap();
        assert_eq!(res.p_value, 0.05);
    }

    #[test]
    fn maximal_cell_lower_tail_is_one() {
        // a at its maximum given the margins: the lower tail is everything.
        let res = fisher_exact(2, 0, 1, 3, Side::Less).unwrap();
        assert_eq!(res.p_value, 1.0);
    }

    #[test]
    fn two_sided_reference_values() {
        // Independent reference: scipy.stats.fisher_exact.
        let r = fisher_exact(1, 1, 1, 1, Side::TwoSided).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = fisher_exact(3, 0, 0, 3, Side::TwoSided).unwrap();
        assert!((r.p_value - 0.1).abs() < 1e-15);
    }

    #[test]
    fn degenerate_margins_flagged() {
        let r = fisher_exact(0, 0, 2, 3, Side::Greater).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert!(matches!(r.detail, Detail::Fisher { degenerate: true }));
        let r = fisher_exact(0, 2, 0, 3, Side::Less).unwrap();
        assert!(matches!(r.detail, Detail::Fisher { degenerate: true }));
    }

    #[test]
    fn tail_identity_holds() {
        // P(A >= a) + P(A <= a) - P(A = a) = 1.
        let mut rng = rng_from(5);
        for _ in 0..50 {
            let a = rng.gen_range(0u64..6);
            let b = rng.gen_range(0u64..6);
            let c = rng.gen_range(0u64..6);
            let d = rng.gen_range(0u64..6);
            if (a + b == 0) || (c + d == 0) || (a + c == 0) || (b + d == 0) {
                continue;
            }
            let g = fisher_exact(a, b, c, d, Side::Greater).unwrap().p_value;
            let l = fisher_exact(a, b, c, d, Side::Less).unwrap().p_value;
            let point = table_point_probability(a, b, c, d);
            assert!(
                (g + l - point - 1.0).abs() < 1e-12,
                "table ({a},{b};{c},{d}): {g} + {l} - {point}"
            );
        }
    }

    #[test]
    fn large_table_fallback_matches_reference() {
        // Table (40,60;50,52) has total 202, beyond the integer kernel.
        // Reference values from an independent hypergeometric implementation.
        let g = fisher_exact(40, 60, 50, 52, Side::Greater).unwrap().p_value;
        assert!((g - 0.9238975280630902).abs() < 1e-10, "{g}");
        let l = fisher_exact(40, 60, 50, 52, Side::Less).unwrap().p_value;
        assert!((l - 0.12545893636947297).abs() < 1e-10, "{l}");
        let t = fisher_exact(40, 60, 50, 52, Side::TwoSided).unwrap().p_value;
        assert!((t - 0.20609883962355188).abs() < 1e-10, "{t}");
        let point = table_point_probability(40, 60, 50, 52);
        assert!((point - 0.04935646443256331).abs() < 1e-12);
    }
}
