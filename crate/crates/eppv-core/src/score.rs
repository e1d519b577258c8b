//! The linear score statistic and the chi-square comparator tests.

use nalgebra::DVector;
use serde::Serialize;

use crate::dist::chi_square_1df_sf;
use crate::eppv::EppvResult;
use crate::error::Error;
use crate::glm::{fit_full, fit_null, Dataset, LogisticFit};
use crate::perm::Side;

/// Which test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Wald,
    Lr,
    Fisher,
    BootWald,
    Pr,
    Eppv,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Wald => "wald",
            Method::Lr => "lr",
            Method::Fisher => "fisher",
            Method::BootWald => "boot_wald",
            Method::Pr => "pr",
            Method::Eppv => "eppv",
        }
    }
}

/// Method-specific metadata carried alongside the statistic and p-value.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Detail {
    ChiSquare {
        df: u32,
    },
    Fisher {
        degenerate: bool,
    },
    Bootstrap {
        resamples: usize,
        failed_resamples: usize,
        exceedances: usize,
    },
    Permutation {
        n_perms: usize,
        exhaustive: bool,
    },
    Eppv(EppvResult),
    Minimax {
        beta1_argmax: f64,
        points_evaluated: usize,
        failed_points: usize,
        result: EppvResult,
    },
}

/// Uniform result envelope for every test in the suite.
#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub side: Side,
    pub detail: Detail,
    pub seed: Option<u64>,
}

impl TestResult {
    /// Monte Carlo standard error, when the method reports one.
    pub fn mc_se(&self) -> Option<f64> {
        match &self.detail {
            Detail::Eppv(r) => Some(r.mc_se),
            Detail::Minimax { result, .. } => Some(result.mc_se),
            _ => None,
        }
    }
}

/// `z - mean(z)` as a plain vector.
pub fn centered(z: &[f64]) -> Vec<f64> {
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    z.iter().map(|v| v - mean).collect()
}

/// Score statistic `z_test^T (y - pi_hat)` of the added covariate, at the
/// null-model fit.
pub fn score_statistic(
    fit0: &LogisticFit,
    z_test: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<f64, Error> {
    let n = fit0.pi_hat.len();
    if z_test.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: z_test.len() });
    }
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    let mut s = 0.0;
    for i in 0..n {
        s += z_test[i] * (y[i] - fit0.pi_hat[i]);
    }
    Ok(s)
}

/// `sum_i (z_i - mean(z)) b_i` for a 0/1 vector `b`; invariant to shifting
/// `z` by a constant.
pub fn centered_indicator_statistic(z: &[f64], b: &[f64]) -> f64 {
    assert_eq!(z.len(), b.len(), "length mismatch");
    let zc = centered(z);
    zc.iter().zip(b).map(|(zi, bi)| zi * bi).sum()
}

/// Two-sided Wald test of the added covariate in the full model.
pub fn wald_test(data: &Dataset) -> Result<TestResult, Error> {
    let fit = fit_full(data)?;
    let j = data.p();
    let se = fit.std_err(j);
    let statistic = (fit.beta[j] / se).powi(2);
    Ok(TestResult {
        method: Method::Wald,
        statistic,
        p_value: chi_square_1df_sf(statistic),
        side: Side::TwoSided,
        detail: Detail::ChiSquare { df: 1 },
        seed: None,
    })
}

/// Likelihood-ratio test of the added covariate.
///
/// If the full design is rank deficient while the null fit succeeds, the
/// added covariate lies in the span of the null design: the two models are
/// identical and the statistic is 0 with p = 1.
pub fn lr_test(data: &Dataset) -> Result<TestResult, Error> {
    let null_fit = fit_null(data)?;
    let statistic = match fit_full(data) {
        Ok(full_fit) => (2.0 * (full_fit.loglik - null_fit.loglik)).max(0.0),
        Err(Error::RankDeficient) => 0.0,
        Err(e) => return Err(e),
    };
    Ok(TestResult {
        method: Method::Lr,
        statistic,
        p_value: chi_square_1df_sf(statistic),
        side: Side::TwoSided,
        detail: Detail::ChiSquare { df: 1 },
        seed: None,
    })
}
