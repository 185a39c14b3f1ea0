//! Bounded data-parallel mapping with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over a dedicated
//! rayon pool sized to the requested parallelism; without it, or at
//! parallelism 1, the same closure runs on a plain iterator. Callers are
//! responsible for order-normalizing their results, so the two paths are
//! observationally identical.

/// Map `f` over `items` preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn map_bounded<T, U, F>(items: Vec<T>, parallelism: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    if parallelism <= 1 {
        return map_sequential(items, f);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    })
}

#[cfg(not(feature = "parallel"))]
pub fn map_bounded<T, U, F>(items: Vec<T>, _parallelism: usize, f: F) -> Vec<U>
where
    T: Send,
    U: Send,
    F: Fn(T) -> U + Send + Sync,
{
    map_sequential(items, f)
}

/// Always-sequential variant, kept available for benchmarks comparing
/// the two code paths.
pub fn map_sequential<T, U, F>(items: Vec<T>, f: F) -> Vec<U>
where
    F: Fn(T) -> U,
{
    items.into_iter().map(f).collect()
}
