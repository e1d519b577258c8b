//! Hypothesis tests for a single added covariate in logistic regression,
//! built around the expected permutation p-value (Eppv).
//!
//! The crate provides:
//!
//! - [`glm`]: maximum-likelihood logistic fits under the null model,
//!   with separation detection and fitted probabilities/residuals;
//! - [`score`]: the linear score statistic plus the classical comparators
//!   (Wald, likelihood ratio);
//! - [`fisher`]: the 2x2 Fisher exact test;
//! - [`bootstrap`]: a nonparametric bootstrap of the Wald statistic;
//! - [`perm`]: permutation generation (exhaustive or Monte Carlo) and the
//!   permutation-of-residuals test;
//! - [`eppv`]: latent-uniform resampling conditional on the observed
//!   responses, per-draw permutation p-values, and their average, with
//!   plug-in and minimax nuisance handling;
//! - [`sim`]: a simulation harness estimating empirical size and power of
//!   all tests over configurable scenarios.
//!
//! Everything is deterministic given a seed: parallel execution (the
//! `parallel` feature, on by default) produces bit-identical results to the
//! sequential fallback because every unit of work derives its own RNG stream
//! from `(seed, index)` and reductions run in index order.

pub mod bootstrap;
pub mod dist;
pub mod eppv;
pub mod error;
pub mod exec;
pub mod fisher;
pub mod glm;
pub mod perm;
pub mod rng;
pub mod score;
pub mod sim;

pub use error::Error;
pub use glm::{fit_logistic, log_likelihood, predict_probs, Dataset, LogisticFit};
pub use perm::{PermScheme, Side};
pub use score::{Method, TestResult};
