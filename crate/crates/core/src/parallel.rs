//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers fan out over a rayon pool;
//! without it they run on the calling thread. Results always come back in
//! input order, and no helper performs a cross-thread floating-point reduction,
//! so both strategies produce bit-identical output.

/// Execution strategy for the data-parallel inner loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

/// Parallel when the feature is enabled, sequential otherwise.
impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        return Exec::Parallel;
        #[cfg(not(feature = "parallel"))]
        Exec::Sequential
    }
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        !matches!(self, Exec::Sequential)
    }
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indices<U, F>(exec: Exec, len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match exec {
        Exec::Sequential => (0..len).map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
    }
}

/// Maps `f` over a slice, returning results in input order.
pub fn map_slice<T, U, F>(exec: Exec, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match exec {
        Exec::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            items.par_iter().map(f).collect()
        }
    }
}

/// Like [`map_slice`] but caps concurrency at `workers` threads.
///
/// A dedicated pool is built per call; callers are batch jobs where the pool
/// setup is negligible next to model calls and subprocess runs.
pub fn map_slice_limited<T, U, F>(exec: Exec, workers: usize, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(not(feature = "parallel"))]
    let _ = workers;
    match exec {
        Exec::Sequential => items.iter().map(f).collect(),
        #[cfg(feature = "parallel")]
        Exec::Parallel => {
            use rayon::prelude::*;
            match rayon::ThreadPoolBuilder::new()
                .num_threads(workers.max(1))
                .build()
            {
                Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
                Err(_) => items.iter().map(f).collect(),
            }
        }
    }
}
