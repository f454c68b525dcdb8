//! Batch execution helpers: data-parallel with the `parallel` feature,
//! sequential otherwise.
//!
//! Every helper preserves input order, so callers get identical output with
//! or without parallelism. `ASANN_THREADS` caps the pool size; it is read
//! once, when the pool is first used.

#[cfg(feature = "parallel")]
use std::sync::OnceLock;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
fn pool() -> &'static rayon::ThreadPool {
    static POOL: OnceLock<rayon::ThreadPool> = OnceLock::new();
    POOL.get_or_init(|| {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = std::env::var("ASANN_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&n| n > 0)
        {
            builder = builder.num_threads(n);
        }
        builder
            .build()
            .expect("failed to build worker thread pool")
    })
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is active.
#[cfg(feature = "parallel")]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    pool().install(|| items.par_iter().map(|item| f(item)).collect())
}

/// Maps `f` over `items`, in parallel when the `parallel` feature is active.
#[cfg(not(feature = "parallel"))]
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    map_seq(items, f)
}

/// Sequential counterpart of [`map`]; always available, used as the
/// reference arm in the benchmark suite.
pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Maps `f` over the index range `0..n`, in parallel when enabled.
#[cfg(feature = "parallel")]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    pool().install(|| (0..n).into_par_iter().map(|i| f(i)).collect())
}

/// Maps `f` over the index range `0..n`, in parallel when enabled.
#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    map_range_seq(n, f)
}

/// Sequential counterpart of [`map_range`].
pub fn map_range_seq<R, F>(n: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..n).map(f).collect()
}
