//! The expected permutation p-value (Eppv).
//!
//! The observed responses are represented through latent uniforms:
//! `y_i = I(eps_i <= pi_i)` with exchangeable `eps`. Conditional on `y`,
//! `eps_i ~ U[0, pi_i]` when `y_i = 1` and `eps_i ~ U[pi_i, 1]` when
//! `y_i = 0`. Each draw of `eps` yields a permutation p-value of the
//! centered statistic `sum_i (z_i - zbar) I(eps_{sigma(i)} <= pi_i)`; the
//! Eppv is the average of those p-values over draws.
//!
//! Nuisance probabilities come either from the null-model MLE (plug-in) or
//! from a supplied vector; [`minimax_eppv`] maximizes the Eppv over an
//! interval for the single null-model slope, profiling the intercept at
//! each candidate value.

use rand::Rng;
use serde::Serialize;

use crate::error::Error;
use crate::exec::map_indexed;
use crate::glm::{fit_logistic, fit_logistic_offset, Dataset};
use crate::perm::{exceedance_count, for_each_permutation, pvalue_ratio, PermScheme, Side};
use crate::rng::{child_seed, rng_from};
use crate::score::{centered, Detail, Method, TestResult};

/// Where the latent-sampler probabilities come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum PiSource {
    /// Plug in the null-model MLE, computed once from the observed data.
    MleUnderNull,
    /// Use the supplied probabilities as known.
    Known { pi: Vec<f64> },
}

/// Configuration of an Eppv run.
#[derive(Debug, Clone, Serialize)]
pub struct EppvConfig {
    /// Number of latent-vector draws.
    pub draws: usize,
    /// Inner permutation scheme. For Monte Carlo schemes the effective seed
    /// of draw `d` is derived from `(self.seed, d)`; the scheme's own seed
    /// field is not used here.
    pub scheme: PermScheme,
    pub side: Side,
    pub pi_source: PiSource,
    pub seed: u64,
}

impl EppvConfig {
    pub fn plug_in(draws: usize, scheme: PermScheme, side: Side, seed: u64) -> Self {
        Self { draws, scheme, side, pi_source: PiSource::MleUnderNull, seed }
    }

    pub fn known(pi: Vec<f64>, draws: usize, scheme: PermScheme, side: Side, seed: u64) -> Self {
        Self { draws, scheme, side, pi_source: PiSource::Known { pi }, seed }
    }

    /// Copy with a replaced seed (per-replicate derivation in simulations).
    pub fn reseeded(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    fn validate(&self, n: usize) -> Result<(), Error> {
        if self.draws == 0 {
            return Err(Error::InvalidConfig("draws must be >= 1".into()));
        }
        self.scheme.validate(n)
    }
}

/// Per-run Eppv output: the average, the per-draw p-values behind it, and
/// the probabilities that were used.
#[derive(Debug, Clone, Serialize)]
pub struct EppvResult {
    /// Mean of the per-draw p-values.
    pub eppv: f64,
    pub per_draw_pvalues: Vec<f64>,
    /// Standard error of the mean of the per-draw p-values.
    pub mc_se: f64,
    /// Observed centered statistic (identical for every draw).
    pub s_obs: f64,
    pub pi_used: Vec<f64>,
}

/// Smallest float strictly above `x` (for nudging a latent draw off the
/// boundary `eps = pi`, which has probability zero in exact arithmetic).
fn next_above(x: f64) -> f64 {
    debug_assert!(x >= 0.0 && x.is_finite());
    f64::from_bits(x.to_bits() + 1)
}

/// Draw the latent uniforms conditional on the responses: `U[0, pi_i]` when
/// `y_i = 1`, `U[pi_i, 1]` when `y_i = 0`. Guarantees `I(eps_i <= pi_i) ==
/// y_i` for every component, including under floating-point rounding.
pub fn sample_latent<R: Rng>(y: &[f64], pi: &[f64], rng: &mut R) -> Result<Vec<f64>, Error> {
    if y.len() != pi.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), found: pi.len() });
    }
    let mut eps = Vec::with_capacity(y.len());
    for i in 0..y.len() {
        let u: f64 = rng.gen();
        if y[i] == 1.0 {
            if pi[i] <= 0.0 {
                return Err(Error::InconsistentProbability { index: i, pi: pi[i], y: y[i] });
            }
            eps.push(u * pi[i]);
        } else {
            if pi[i] >= 1.0 {
                return Err(Error::InconsistentProbability { index: i, pi: pi[i], y: y[i] });
            }
            let mut e = pi[i] + u * (1.0 - pi[i]);
            if e <= pi[i] {
                e = next_above(pi[i]);
            }
            eps.push(e);
        }
    }
    Ok(eps)
}

fn resolve_pi(data: &Dataset, source: &PiSource) -> Result<Vec<f64>, Error> {
    match source {
        PiSource::MleUnderNull => {
            let fit = fit_logistic(data.y(), data.null_design())?.require_converged()?;
            Ok(fit.pi_hat.iter().cloned().collect())
        }
        PiSource::Known { pi } => {
            let n = data.n();
            if pi.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: pi.len() });
            }
            if pi.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidConfig("probabilities must lie in [0, 1]".into()));
            }
            for i in 0..n {
                let y = data.y()[i];
                if (y == 1.0 && pi[i] <= 0.0) || (y == 0.0 && pi[i] >= 1.0) {
                    return Err(Error::InconsistentProbability { index: i, pi: pi[i], y });
                }
            }
            Ok(pi.clone())
        }
    }
}

/// Run the Eppv test.
pub fn eppv_test(data: &Dataset, config: &EppvConfig) -> Result<TestResult, Error> {
    let n = data.n();
    config.validate(n)?;
    let pi = resolve_pi(data, &config.pi_source)?;
    let zc = centered(data.z_test().as_slice());
    let y: Vec<f64> = data.y().iter().cloned().collect();
    let s_obs: f64 = zc.iter().zip(&y).map(|(z, yi)| z * yi).sum();
    let mode = config.scheme.counting_mode();

    // Each draw yields a p-value with the same integer denominator, so the
    // average is computed exactly in integer space and only rounded once.
    let ratios: Vec<(u64, u64)> = map_indexed(config.draws, |d| {
        let latent_seed = child_seed(config.seed, 2 * d as u64);
        let eps = sample_latent(&y, &pi, &mut rng_from(latent_seed))
            .expect("probabilities validated before drawing");
        // The conditional sampler pins I(eps_i <= pi_i) to y_i, so the
        // observed statistic is the same float in every draw.
        debug_assert!(eps
            .iter()
            .zip(&pi)
            .zip(&y)
            .all(|((e, p), yv)| ((*e <= *p) as u8 as f64) == *yv));

        let scheme = config.scheme.reseeded(child_seed(config.seed, 2 * d as u64 + 1));
        let mut s_perms = Vec::with_capacity(scheme.count(n));
        for_each_permutation(n, &scheme, |perm| {
            let mut s = 0.0;
            for i in 0..n {
                if eps[perm[i]] <= pi[i] {
                    s += zc[i];
                }
            }
            s_perms.push(s);
        })
        .expect("scheme validated");
        pvalue_ratio(exceedance_count(s_obs, &s_perms, config.side), s_perms.len(), mode)
    });

    let per_draw_pvalues: Vec<f64> = ratios.iter().map(|&(num, den)| num as f64 / den as f64).collect();
    let denom = ratios[0].1;
    let total: u64 = ratios.iter().map(|&(num, _)| num).sum();
    let eppv = total as f64 / (config.draws as u64 * denom) as f64;
    let d = config.draws as f64;
    let mc_se = if config.draws > 1 {
        let var = per_draw_pvalues.iter().map(|p| (p - eppv).powi(2)).sum::<f64>() / (d - 1.0);
        (var / d).sqrt()
    } else {
        0.0
    };

    Ok(TestResult {
        method: Method::Eppv,
        statistic: s_obs,
        p_value: eppv,
        side: config.side,
        detail: Detail::Eppv(EppvResult { eppv, per_draw_pvalues, mc_se, s_obs, pi_used: pi }),
        seed: Some(config.seed),
    })
}

/// Profile the intercept at a fixed slope: fit `logit(pi) = b0 + beta1 z1`
/// over `b0` alone and return the implied probabilities.
fn profiled_pi(data: &Dataset, beta1: f64) -> Result<Vec<f64>, Error> {
    let n = data.n();
    let z1 = data.null_design().column(1);
    let offset = nalgebra::DVector::from_fn(n, |i, _| beta1 * z1[i]);
    let intercept = nalgebra::DMatrix::from_element(n, 1, 1.0);
    let fit = fit_logistic_offset(data.y(), &intercept, &offset)?.require_converged()?;
    Ok(fit.pi_hat.iter().cloned().collect())
}

/// Maximize the Eppv over `beta1` in `[a, b]` for a null model with exactly
/// one non-intercept covariate, with the intercept profiled out at each
/// candidate slope. The same latent seeds are reused at every candidate
/// (common random numbers), so the objective is a deterministic function of
/// `beta1` and the grid maximum can be refined by golden-section search.
pub fn minimax_eppv(
    data: &Dataset,
    beta1_interval: (f64, f64),
    grid_points: usize,
    config: &EppvConfig,
) -> Result<TestResult, Error> {
    let (a, b) = beta1_interval;
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidConfig(format!("invalid interval [{a}, {b}]")));
    }
    if data.p() != 2 || data.null_design().column(0).iter().any(|&v| v != 1.0) {
        return Err(Error::InvalidConfig(
            "minimax needs a null design of [intercept, one covariate]".into(),
        ));
    }
    config.validate(data.n())?;

    let mut search = MinimaxSearch { data, config, evaluated: 0, failed: 0, last_error: None, best: None };

    if a == b {
        search.eval(a);
    } else {
        if grid_points < 3 {
            return Err(Error::InvalidConfig("grid_points must be >= 3".into()));
        }
        let step = (b - a) / (grid_points - 1) as f64;
        let mut grid_values: Vec<Option<f64>> = Vec::with_capacity(grid_points);
        for g in 0..grid_points {
            grid_values.push(search.eval(a + step * g as f64));
        }
        // Golden-section refinement on the interval bracketing the grid max.
        if let Some(g_star) = grid_values
            .iter()
            .enumerate()
            .filter_map(|(g, v)| v.map(|val| (g, val)))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .map(|(g, _)| g)
        {
            let mut lo = a + step * g_star.saturating_sub(1) as f64;
            let mut hi = a + step * ((g_star + 1).min(grid_points - 1)) as f64;
            const INV_PHI: f64 = 0.618_033_988_749_894_8;
            let tol = (b - a) * 1e-4;
            let mut x1 = hi - INV_PHI * (hi - lo);
            let mut x2 = lo + INV_PHI * (hi - lo);
            let mut f1 = search.eval(x1).unwrap_or(f64::NEG_INFINITY);
            let mut f2 = search.eval(x2).unwrap_or(f64::NEG_INFINITY);
            while hi - lo > tol && search.evaluated < 200 {
                if f1 >= f2 {
                    hi = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = hi - INV_PHI * (hi - lo);
                    f1 = search.eval(x1).unwrap_or(f64::NEG_INFINITY);
                } else {
                    lo = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = lo + INV_PHI * (hi - lo);
                    f2 = search.eval(x2).unwrap_or(f64::NEG_INFINITY);
                }
            }
        }
    }

    search.into_result()
}

struct MinimaxSearch<'a> {
    data: &'a Dataset,
    config: &'a EppvConfig,
    evaluated: usize,
    failed: usize,
    last_error: Option<Error>,
    best: Option<(f64, f64, EppvResult)>,
}

impl MinimaxSearch<'_> {
    /// Evaluate the Eppv at one candidate slope; None if the profile fit or
    /// the test failed there.
    fn eval(&mut self, beta1: f64) -> Option<f64> {
        self.evaluated += 1;
        let pi = match profiled_pi(self.data, beta1) {
            Ok(pi) => pi,
            Err(e) => {
                self.failed += 1;
                self.last_error = Some(e);
                return None;
            }
        };
        let cfg = EppvConfig { pi_source: PiSource::Known { pi }, ..self.config.clone() };
        match eppv_test(self.data, &cfg) {
            Ok(result) => {
                let value = result.p_value;
                if self.best.as_ref().map_or(true, |(bv, _, _)| value > *bv) {
                    if let Detail::Eppv(inner) = result.detail {
                        self.best = Some((value, beta1, inner));
                    }
                }
                Some(value)
            }
            Err(e) => {
                self.failed += 1;
                self.last_error = Some(e);
                None
            }
        }
    }

    fn into_result(self) -> Result<TestResult, Error> {
        match self.best {
            Some((_, beta1_argmax, inner)) => Ok(TestResult {
                method: Method::Eppv,
                statistic: inner.s_obs,
                p_value: inner.eppv,
                side: self.config.side,
                detail: Detail::Minimax {
                    beta1_argmax,
                    points_evaluated: self.evaluated,
                    failed_points: self.failed,
                    result: inner,
                },
                seed: Some(self.config.seed),
            }),
            None => Err(self.last_error.unwrap_or_else(|| {
                Error::InvalidConfig("no minimax grid point could be evaluated".into())
            })),
        }
    }
}
