//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) index maps run on the current rayon
//! pool; without it everything runs on the calling thread. Results are always
//! collected in index order, so output never depends on the worker count.

/// Maps `f` over `0..n` and collects the results in index order.
#[cfg(feature = "parallel")]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Runs `f` with at most `jobs` workers. `jobs <= 1` runs inline.
#[cfg(feature = "parallel")]
pub fn with_workers<T, F>(jobs: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    if jobs <= 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build();
        return match pool {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        };
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(f),
        Err(err) => {
            log::warn!("could not build a {jobs}-thread pool ({err}); running on the global pool");
            f()
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T, F>(_jobs: usize, f: F) -> T
where
    T: Send,
    F: FnOnce() -> T + Send,
{
    f()
}

/// True when the crate was built with rayon support.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_for_any_worker_count() {
        let serial: Vec<usize> = with_workers(1, || map_indices(100, |i| i * i));
        let pooled: Vec<usize> = with_workers(4, || map_indices(100, |i| i * i));
        assert_eq!(serial, pooled);
        assert_eq!(serial[7], 49);
    }
}
