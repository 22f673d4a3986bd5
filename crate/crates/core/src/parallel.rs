//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) [`Execution::Parallel`] dispatches to
//! rayon; without it every mode runs sequentially. Results are always
//! collected in input order, so reductions performed by callers over the
//! returned vectors are bit-reproducible regardless of thread count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when this mode actually fans out across threads in this build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub use self::actual::{map_indexed, map_slice};

#[cfg(feature = "parallel")]
mod actual {
    use super::Execution;
    use rayon::prelude::*;

    /// Maps `f` over `0..n` and collects results in index order.
    pub fn map_indexed<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        match exec {
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            Execution::Sequential => (0..n).map(f).collect(),
        }
    }

    /// Maps `f` over a slice and collects results in slice order.
    pub fn map_slice<T, R, F>(exec: Execution, source: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        match exec {
            Execution::Parallel => source.par_iter().map(f).collect(),
            Execution::Sequential => source.iter().map(f).collect(),
        }
    }
}

#[cfg(not(feature = "parallel"))]
mod actual {
    use super::Execution;

    pub fn map_indexed<R, F>(_exec: Execution, n: usize, f: F) -> Vec<R>
    where
        F: Fn(usize) -> R + Sync + Send,
        R: Send,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<T, R, F>(_exec: Execution, source: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        F: Fn(&T) -> R + Sync + Send,
        R: Send,
    {
        source.iter().map(f).collect()
    }
}

/// Limits the global worker pool. A no-op without the `parallel` feature.
pub fn init_threads(threads: usize) -> bool {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .is_ok()
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        true
    }
}
