//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The design matrix does not have full column rank.
    #[error("design matrix is rank deficient (or numerically singular)")]
    RankDeficient,

    /// The maximum likelihood estimate does not exist: a coefficient or a
    /// fitted probability ran off to the boundary during iteration.
    #[error("separation detected while fitting ({reason}); the MLE does not exist")]
    Separation { reason: String },

    /// Fitting stopped at the iteration cap without meeting the score
    /// tolerance.
    #[error("logistic fit did not converge in {iterations} iterations (max score {max_score:.3e})")]
    DidNotConverge { iterations: usize, max_score: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A supplied probability cannot have produced the observed response
    /// (`y=1` with `pi=0`, or `y=0` with `pi=1`).
    #[error("probability {pi} at index {index} is inconsistent with response {y}")]
    InconsistentProbability { index: usize, pi: f64, y: f64 },

    /// More than half of the bootstrap resamples failed to fit.
    #[error("bootstrap unstable: {failed} of {total} resamples failed to fit")]
    BootstrapUnstable { failed: usize, total: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors raised while fitting a model (as opposed to bad
    /// configuration or data): separation, rank deficiency, non-convergence.
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient | Error::Separation { .. } | Error::DidNotConverge { .. }
        )
    }
}
