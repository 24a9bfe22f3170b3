//! Data-parallel execution with a sequential fallback.
//!
//! Every parallel map in the crate goes through [`Execution::map`], which
//! returns results in index order. Reductions are then done sequentially on
//! the collected vector, so results never depend on the thread count or on
//! scheduling. Without the `parallel` feature, [`Execution::Parallel`]
//! silently runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Evaluates `f(0), f(1), ..., f(n-1)` and returns them in order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Fallible variant of [`Execution::map`]; the error with the lowest index wins.
    pub fn try_map<T, E, F>(self, n: usize, f: F) -> Result<Vec<T>, E>
    where
        T: Send,
        E: Send,
        F: Fn(usize) -> Result<T, E> + Sync + Send,
    {
        self.map(n, f).into_iter().collect()
    }

    /// Calls `f(c, chunk)` on consecutive `chunk_len`-sized chunks of `data`.
    pub fn for_each_chunk<T, F>(self, data: &mut [T], chunk_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => data.par_chunks_mut(chunk_len).enumerate().for_each(|(c, x)| f(c, x)),
            _ => data.chunks_mut(chunk_len).enumerate().for_each(|(c, x)| f(c, x)),
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}
