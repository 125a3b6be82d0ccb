//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the helpers fan work out over
//! rayon; without it they run sequentially. Callers are written so results
//! are identical either way: work items are indexed, mapped independently,
//! and reduced in index order (or with exact integer sums), so thread count
//! never changes output bytes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Run `f` on a dedicated pool of `jobs` threads (`None` = default pool).
///
/// Without the `parallel` feature the job count is ignored and `f` runs
/// sequentially on the calling thread.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("failed to build thread pool")
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R>(_jobs: Option<usize>, f: impl FnOnce() -> R) -> R {
    f()
}

/// Map `0..n`, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Map a slice by index, collecting results in index order.
#[cfg(feature = "parallel")]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Exact (order-independent) sum of a u64-valued map over `0..n`.
#[cfg(feature = "parallel")]
pub(crate) fn sum_range<F>(n: usize, f: F) -> u64
where
    F: Fn(usize) -> u64 + Sync + Send,
{
    (0..n).into_par_iter().map(f).sum()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn sum_range<F>(n: usize, f: F) -> u64
where
    F: Fn(usize) -> u64,
{
    (0..n).map(f).sum()
}
