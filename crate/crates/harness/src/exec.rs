//! Run scheduling: a rayon pool when the `parallel` feature is on, a plain
//! loop otherwise. Results always come back ordered by run index.

use thiserror::Error;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "APBM_THREADS";

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("{THREADS_ENV} must be a positive integer, got {0:?}")]
    BadThreadCount(String),
    #[error("building the worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Worker pool; `None` lets rayon pick the thread count.
    Parallel {
        threads: Option<usize>,
    },
}

impl Execution {
    /// Parallel with the `APBM_THREADS` cap when built with `parallel`,
    /// sequential otherwise.
    pub fn from_env() -> Result<Self, ExecError> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(raw) => match raw.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(ExecError::BadThreadCount(raw)),
            },
            Err(_) => None,
        };
        if cfg!(feature = "parallel") {
            Ok(Execution::Parallel { threads })
        } else {
            Ok(Execution::Sequential)
        }
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>, ExecError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => Ok((0..n).map(f).collect()),
        Execution::Parallel { threads } => parallel_map(threads, n, f),
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, F>(threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>, ExecError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| ExecError::Pool(e.to_string()))?;
    Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, F>(_threads: Option<usize>, n: usize, f: F) -> Result<Vec<T>, ExecError>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    Ok((0..n).map(f).collect())
}
