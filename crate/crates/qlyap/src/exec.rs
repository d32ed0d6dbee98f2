//! Thread-pool executor. Results come back in index order, so outputs do
//! not depend on the number of threads.

use qlyap_core::exec::Executor;
use rayon::prelude::*;

use crate::error::{CliError, CliResult};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "QLYAP_THREADS";

pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    /// `threads = None` lets rayon pick (one per core).
    pub fn new(threads: Option<usize>) -> CliResult<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            builder = builder.num_threads(n);
        }
        let pool = builder.build().map_err(|e| CliError::Runtime(e.to_string()))?;
        Ok(Pool { pool })
    }

    /// Honors `QLYAP_THREADS`.
    pub fn from_env() -> CliResult<Self> {
        Pool::new(threads_from_env()?)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

pub fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_VAR) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::usage(format!("{THREADS_VAR} must be a positive integer, got '{v}'"))),
        },
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn results_are_in_index_order() {
        let pool = Pool::new(Some(3)).unwrap();
        assert_eq!(pool.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(pool.threads(), 3);
    }
}
