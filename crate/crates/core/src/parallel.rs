//! Path-level work distribution.
//!
//! Results are always collected in path order and every reduction over
//! them runs sequentially afterwards, so output is independent of the
//! worker count.

use rayon::prelude::*;

pub const WORKERS_ENV: &str = "VARSPDE_WORKERS";

/// Explicit count, else `VARSPDE_WORKERS`, else rayon's default.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    requested
        .filter(|&w| w > 0)
        .or_else(|| {
            std::env::var(WORKERS_ENV)
                .ok()
                .and_then(|s| s.trim().parse().ok())
                .filter(|&w: &usize| w > 0)
        })
        .unwrap_or_else(rayon::current_num_threads)
}

/// `(0..count).map(f)` on `workers` threads, in index order.
pub fn map_indexed<T, F>(count: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let workers = resolve_workers(workers);
    if workers <= 1 || count <= 1 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

/// Like [`map_indexed`] for fallible work; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(count: usize, workers: Option<usize>, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(count, workers, f).into_iter().collect()
}
