//! Small distribution helpers shared by the test modules.

use statrs::function::factorial::ln_factorial;

/// Upper tail of the chi-square distribution with one degree of freedom,
/// via the identity `P(X > x) = erfc(sqrt(x/2))`.
pub fn chi_square_1df_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    // libm's erfc keeps relative accuracy in the far tail, which the
    // polynomial in statrs does not.
    libm::erfc((x / 2.0).sqrt())
}

/// `ln C(n, k)`.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from an independent chi-square CDF implementation.
    const REFERENCE: &[(f64, f64)] = &[
        (1e-3, 9.74772879369960377e-01),
        (0.1, 7.51829634045849238e-01),
        (0.5, 4.79500122186953370e-01),
        (1.0, 3.17310507862911151e-01),
        (3.841459, 4.99999946531956285e-02),
        (10.0, 1.56540225800254904e-03),
        (20.0, 7.74421643104408754e-06),
        (40.0, 2.53962858947086339e-10),
    ];

    #[test]
    fn matches_reference_to_1e10_relative() {
        for &(x, expected) in REFERENCE {
            let got = chi_square_1df_sf(x);
            let rel = ((got - expected) / expected).abs();
            assert!(rel < 1e-10, "x={x}: got {got:e}, want {expected:e}, rel {rel:e}");
        }
    }

    #[test]
    fn quantile_at_five_percent() {
        // chi-square(1) 0.95 quantile
        assert!((chi_square_1df_sf(3.841458820694124) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn boundary_cases() {
        assert_eq!(chi_square_1df_sf(0.0), 1.0);
        assert_eq!(chi_square_1df_sf(-1.0), 1.0);
        assert!(chi_square_1df_sf(1e6) >= 0.0);
    }

    #[test]
    fn ln_binomial_small_values() {
        assert!((ln_binomial(4, 2).exp() - 6.0).abs() < 1e-12);
        assert!((ln_binomial(6, 3).exp() - 20.0).abs() < 1e-12);
        assert_eq!(ln_binomial(5, 0), 0.0);
    }
}
