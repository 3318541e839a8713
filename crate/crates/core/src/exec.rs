//! Execution strategy for the data-parallel loops (record generation,
//! bootstrap replicates, Monte Carlo replications).
//!
//! Every parallel loop in the crate goes through [`Execution::map_range`],
//! which always returns results in index order. Work items derive their
//! randomness from their own index, never from a shared generator, so the
//! output is identical for any thread count and for either strategy.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// Spread work over the rayon pool when the `parallel` feature is on.
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Returns `true` if this strategy will actually use more than one thread.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `0..n`, collecting results in index order.
    pub fn map_range<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Maps `f` over contiguous chunks `[start, end)` of `0..n`.
    pub fn map_chunks<T, F>(self, n: usize, chunk: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize, usize) -> T + Sync + Send,
    {
        let chunk = chunk.max(1);
        let n_chunks = n.div_ceil(chunk);
        self.map_range(n_chunks, |c| {
            let start = c * chunk;
            f(start, (start + chunk).min(n))
        })
    }
}

/// Runs `f` inside a dedicated pool of `threads` workers (or the global pool
/// when `threads` is `None`). Without the `parallel` feature this just calls `f`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Some(t) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}
