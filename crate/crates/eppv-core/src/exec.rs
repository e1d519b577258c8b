//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (default), independent jobs run on the rayon
//! pool; without it, the same jobs run in a plain loop. Results are
//! collected in index order either way, so callers that reduce the returned
//! vector sequentially get bit-identical output regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every index in `0..n` and collect the results in order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

/// Apply `f` to every index in `0..n` and collect the results in order.
#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}
