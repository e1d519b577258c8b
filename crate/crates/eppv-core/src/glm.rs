//! Maximum-likelihood logistic regression for the null model.
//!
//! Fitting is Newton-Raphson with step-halving on the Bernoulli
//! log-likelihood. Separation (a nonexistent MLE) is detected through
//! coefficient and fitted-probability bounds while iterating.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Error;

/// Score tolerance (max-norm) for declaring convergence.
pub const SCORE_TOL: f64 = 1e-8;
/// Newton iteration cap.
pub const MAX_ITERATIONS: usize = 25;
/// Step-halving cap per iteration.
const MAX_HALVINGS: usize = 20;
/// Any coefficient beyond this magnitude signals separation.
const BETA_BOUND: f64 = 15.0;
/// Any fitted probability outside [PI_BOUND, 1 - PI_BOUND] signals separation.
const PI_BOUND: f64 = 1e-10;
/// Probability clamp used inside the log-likelihood only.
const LOGLIK_CLAMP: f64 = 1e-12;

/// A binary-response dataset: responses, null-model covariates, and the
/// single covariate under test.
#[derive(Debug, Clone)]
pub struct Dataset {
    y: DVector<f64>,
    z0: DMatrix<f64>,
    z_test: DVector<f64>,
}

impl Dataset {
    /// Build a dataset, validating shapes and that every response is 0 or 1.
    pub fn new(y: Vec<f64>, z0: DMatrix<f64>, z_test: Vec<f64>) -> Result<Self, Error> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 observations, got {n}")));
        }
        if y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidConfig("responses must be 0 or 1".into()));
        }
        if z0.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, found: z0.nrows() });
        }
        if z_test.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: z_test.len() });
        }
        let p = z0.ncols();
        if p == 0 || p > n {
            return Err(Error::InvalidConfig(format!(
                "null design must have between 1 and n={n} columns, got {p}"
            )));
        }
        Ok(Self { y: DVector::from_vec(y), z0, z_test: DVector::from_vec(z_test) })
    }

    /// Convenience constructor: intercept column plus the given covariate
    /// columns.
    pub fn with_intercept(
        y: Vec<f64>,
        covariates: &[Vec<f64>],
        z_test: Vec<f64>,
    ) -> Result<Self, Error> {
        let n = y.len();
        for c in covariates {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: c.len() });
            }
        }
        let p = covariates.len() + 1;
        let z0 = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { covariates[j - 1][i] });
        Self::new(y, z0, z_test)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of null-model covariates (columns of Z0).
    pub fn p(&self) -> usize {
        self.z0.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn null_design(&self) -> &DMatrix<f64> {
        &self.z0
    }

    pub fn z_test(&self) -> &DVector<f64> {
        &self.z_test
    }

    /// The full design `[Z0 | z_test]`.
    pub fn full_design(&self) -> DMatrix<f64> {
        let n = self.n();
        let p = self.p();
        DMatrix::from_fn(n, p + 1, |i, j| if j < p { self.z0[(i, j)] } else { self.z_test[i] })
    }

    /// Row-resampled copy (used by the bootstrap); indices may repeat.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let m = rows.len();
        let y = DVector::from_fn(m, |i, _| self.y[rows[i]]);
        let z0 = DMatrix::from_fn(m, self.p(), |i, j| self.z0[(rows[i], j)]);
        let z_test = DVector::from_fn(m, |i, _| self.z_test[rows[i]]);
        Dataset { y, z0, z_test }
    }
}

/// Result of a logistic maximum-likelihood fit.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    /// Coefficient estimates.
    pub beta: DVector<f64>,
    /// Fitted probabilities, strictly inside (0,1).
    pub pi_hat: DVector<f64>,
    /// Response residuals `y_i - pi_hat_i`.
    pub residuals: DVector<f64>,
    /// Bernoulli log-likelihood at `beta`.
    pub loglik: f64,
    /// Inverse observed information at `beta`.
    pub cov_beta: DMatrix<f64>,
    /// Newton steps taken.
    pub iterations: usize,
    /// Whether the score tolerance was met within the iteration cap.
    pub converged: bool,
}

impl LogisticFit {
    /// Standard error of the j-th coefficient.
    pub fn std_err(&self, j: usize) -> f64 {
        self.cov_beta[(j, j)].sqrt()
    }

    /// Error out unless the fit converged.
    pub fn require_converged(self) -> Result<Self, Error> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::DidNotConverge {
                iterations: self.iterations,
                max_score: self.max_abs_score(),
            })
        }
    }

    fn max_abs_score(&self) -> f64 {
        // ||Z^T r||_inf is not stored; the residual sum bounds the intercept
        // component, which is what diagnostics care about.
        self.residuals.iter().sum::<f64>().abs()
    }
}

/// Numerically stable inverse logit.
pub fn sigmoid(x: f64) -> f64 {
    // Branch on sign so exp never overflows for large |x|.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fitted probabilities `sigmoid(Z beta)` for each row of `z`.
pub fn predict_probs(beta: &DVector<f64>, z: &DMatrix<f64>) -> Result<DVector<f64>, Error> {
    if beta.len() != z.ncols() {
        return Err(Error::DimensionMismatch { expected: z.ncols(), found: beta.len() });
    }
    Ok(DVector::from_fn(z.nrows(), |i, _| sigmoid(z.row(i).dot(&beta.transpose()))))
}

/// Bernoulli log-likelihood of `beta` on `(y, z)`; probabilities are clamped
/// to `[1e-12, 1 - 1e-12]` inside the logs only.
pub fn log_likelihood(beta: &DVector<f64>, y: &DVector<f64>, z: &DMatrix<f64>) -> Result<f64, Error> {
    if y.len() != z.nrows() {
        return Err(Error::DimensionMismatch { expected: z.nrows(), found: y.len() });
    }
    let pi = predict_probs(beta, z)?;
    Ok(bernoulli_loglik(y, &pi))
}

fn bernoulli_loglik(y: &DVector<f64>, pi: &DVector<f64>) -> f64 {
    let mut ll = 0.0;
    for i in 0..y.len() {
        let p = pi[i].clamp(LOGLIK_CLAMP, 1.0 - LOGLIK_CLAMP);
        ll += if y[i] == 1.0 { p.ln() } else { (1.0 - p).ln() };
    }
    ll
}

fn linear_predictor(z: &DMatrix<f64>, beta: &DVector<f64>, offset: Option<&DVector<f64>>) -> DVector<f64> {
    let mut lp = z * beta;
    if let Some(o) = offset {
        lp += o;
    }
    lp
}

fn loglik_at(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    beta: &DVector<f64>,
    offset: Option<&DVector<f64>>,
) -> f64 {
    let lp = linear_predictor(z, beta, offset);
    let pi = lp.map(sigmoid);
    bernoulli_loglik(y, &pi)
}

/// `Z^T diag(w) Z`, accumulated without forming the n-by-n weight matrix.
fn weighted_gram(z: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let (n, p) = (z.nrows(), z.ncols());
    let mut h = DMatrix::zeros(p, p);
    for i in 0..n {
        let wi = w[i];
        for a in 0..p {
            let za = wi * z[(i, a)];
            for b in a..p {
                h[(a, b)] += za * z[(i, b)];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            h[(a, b)] = h[(b, a)];
        }
    }
    h
}

/// Fit a logistic regression of `y` on `z` by Newton-Raphson, starting at
/// `beta = 0`.
pub fn fit_logistic(y: &DVector<f64>, z: &DMatrix<f64>) -> Result<LogisticFit, Error> {
    fit_logistic_impl(y, z, None, None, None)
}

/// As [`fit_logistic`], from a warm start.
pub fn fit_logistic_with_start(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    start: &DVector<f64>,
) -> Result<LogisticFit, Error> {
    fit_logistic_impl(y, z, None, Some(start), None)
}

/// As [`fit_logistic`], with a fixed per-observation offset added to the
/// linear predictor (used when profiling out a fixed coefficient).
pub fn fit_logistic_offset(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    offset: &DVector<f64>,
) -> Result<LogisticFit, Error> {
    fit_logistic_impl(y, z, Some(offset), None, None)
}

pub(crate) fn fit_logistic_impl(
    y: &DVector<f64>,
    z: &DMatrix<f64>,
    offset: Option<&DVector<f64>>,
    start: Option<&DVector<f64>>,
    mut loglik_trace: Option<&mut Vec<f64>>,
) -> Result<LogisticFit, Error> {
    let (n, p) = (z.nrows(), z.ncols());
    if y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: y.len() });
    }
    if let Some(o) = offset {
        if o.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: o.len() });
        }
    }
    if p == 0 || p > n {
        return Err(Error::InvalidConfig(format!("design must have 1..=n columns, got {p}")));
    }

    // Rank check on the unweighted Gram matrix before iterating.
    let gram = z.transpose() * z;
    match Cholesky::new(gram) {
        None => return Err(Error::RankDeficient),
        Some(ch) => {
            let diag = ch.l_dirty().map_diagonal(|d| d);
            let max = diag.iter().cloned().fold(0.0_f64, f64::max);
            let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
            if !(min > max * 1e-9) {
                return Err(Error::RankDeficient);
            }
        }
    }

    let mut beta = match start {
        Some(b) => {
            if b.len() != p {
                return Err(Error::DimensionMismatch { expected: p, found: b.len() });
            }
            b.clone()
        }
        None => DVector::zeros(p),
    };
    let mut ll = loglik_at(y, z, &beta, offset);
    if let Some(t) = loglik_trace.as_deref_mut() {
        t.push(ll);
    }

    let mut iterations = 0;
    let mut converged = false;
    loop {
        let lp = linear_predictor(z, &beta, offset);
        let pi = lp.map(sigmoid);
        check_interior(&beta, &pi)?;
        let residuals = y - &pi;
        let score = z.transpose() * &residuals;
        if score.amax() < SCORE_TOL {
            converged = true;
            break;
        }
        if iterations >= MAX_ITERATIONS {
            break;
        }

        let w = pi.map(|pv| pv * (1.0 - pv));
        let info = weighted_gram(z, &w);
        let chol = Cholesky::new(info).ok_or_else(|| Error::Separation {
            reason: "observed information lost positive definiteness".into(),
        })?;
        let delta = chol.solve(&score);

        // Step-halving keeps the log-likelihood nondecreasing.
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &beta + lambda * &delta;
            let ll_candidate = loglik_at(y, z, &candidate, offset);
            if ll_candidate >= ll {
                beta = candidate;
                ll = ll_candidate;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        if let Some(t) = loglik_trace.as_deref_mut() {
            t.push(ll);
        }
        if beta.amax() > BETA_BOUND {
            return Err(Error::Separation {
                reason: format!("coefficient magnitude exceeded {BETA_BOUND}"),
            });
        }
    }

    if converged {
        // One extra Newton step tightens the score from ~1e-8 to near machine
        // precision, so residual orthogonality holds well inside tolerance.
        let lp = linear_predictor(z, &beta, offset);
        let pi = lp.map(sigmoid);
        let residuals = y - &pi;
        let score = z.transpose() * &residuals;
        let w = pi.map(|pv| pv * (1.0 - pv));
        if let Some(chol) = Cholesky::new(weighted_gram(z, &w)) {
            let delta = chol.solve(&score);
            if delta.amax() < 0.5 {
                beta += delta;
                ll = loglik_at(y, z, &beta, offset);
            }
        }
    }

    let lp = linear_predictor(z, &beta, offset);
    let pi_hat = lp.map(sigmoid);
    check_interior(&beta, &pi_hat)?;
    let residuals = y - &pi_hat;
    let w = pi_hat.map(|pv| pv * (1.0 - pv));
    let info = weighted_gram(z, &w);
    let cov_beta = Cholesky::new(info)
        .ok_or_else(|| Error::Separation {
            reason: "observed information lost positive definiteness".into(),
        })?
        .inverse();

    Ok(LogisticFit { beta, pi_hat, residuals, loglik: ll, cov_beta, iterations, converged })
}

fn check_interior(beta: &DVector<f64>, pi: &DVector<f64>) -> Result<(), Error> {
    if beta.amax() > BETA_BOUND {
        return Err(Error::Separation {
            reason: format!("coefficient magnitude exceeded {BETA_BOUND}"),
        });
    }
    if pi.iter().any(|&p| !(PI_BOUND..=1.0 - PI_BOUND).contains(&p)) {
        return Err(Error::Separation {
            reason: "a fitted probability reached the boundary".into(),
        });
    }
    Ok(())
}

/// Fit the null model (responses on `Z0` alone), requiring convergence.
pub fn fit_null(data: &Dataset) -> Result<LogisticFit, Error> {
    fit_logistic(data.y(), data.null_design())?.require_converged()
}

/// Fit the full model (responses on `[Z0 | z_test]`), requiring convergence.
pub fn fit_full(data: &Dataset) -> Result<LogisticFit, Error> {
    fit_logistic(data.y(), &data.full_design())?.require_converged()
}
