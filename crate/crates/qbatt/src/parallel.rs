//! Rayon-backed executor and thread-pool setup.

use qbatt_core::executor::Executor;
use rayon::prelude::*;

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "QBATT_THREADS";

/// Runs items on the global rayon pool; results keep index order.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rayon;

impl Executor for Rayon {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// Sizes the global pool from `QBATT_THREADS` when it holds a positive
/// integer. Later calls are no-ops.
pub fn init_thread_pool() {
    let threads = std::env::var(THREADS_VAR)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0);
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
