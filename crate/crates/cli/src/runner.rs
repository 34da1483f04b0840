//! Replica-parallel execution. Replica `r` always uses stream `r` of the
//! campaign seed and results are returned in replica order, so the thread
//! count never changes the output.

use rayon::prelude::*;

use crate::error::{CliError, Result};

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(CliError::run)
}

/// `f(0), …, f(n−1)` on at most `threads` workers.
pub fn map_replicas<T, F>(threads: usize, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    pool(threads)?.install(|| (0..n as u64).into_par_iter().map(&f).collect())
}
