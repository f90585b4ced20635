//! Rayon-backed executor. Results come back in job order, so every report
//! is independent of the thread count.

use gsfe_core::oracle::Executor;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "GSFE_THREADS";

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    pub fn new(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start thread pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Threads from `GSFE_THREADS`, or rayon's default when unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var(THREADS_ENV) {
            Ok(v) => {
                let n: usize = v
                    .trim()
                    .parse()
                    .ok()
                    .filter(|n| *n > 0)
                    .ok_or_else(|| CliError::config(THREADS_ENV, format!("`{v}` is not a positive integer")))?;
                Self::new(n)
            }
            Err(_) => Self::new(0),
        }
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, job: F) -> Vec<T> {
        self.pool.install(|| (0..n).into_par_iter().map(&job).collect())
    }
}
