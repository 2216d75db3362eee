//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) index maps run on the current
//! rayon pool; without it, or inside [`sequential`], they run on the calling
//! thread. Results are always returned in index order so reductions over
//! them are schedule independent.

use std::cell::Cell;

use crate::error::{Error, Result};

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Evaluates `f(0), .., f(n - 1)` and returns the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        if !FORCE_SEQUENTIAL.with(Cell::get) {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
    }
    (0..n).map(f).collect()
}

/// Fallible variant of [`map_indexed`]; the error with the lowest index wins.
pub fn try_map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}

/// Runs `f` with every [`map_indexed`] call on this thread forced sequential.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

/// Runs `f` on a pool of `workers` threads. One worker means sequential.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    if workers == 0 {
        return Err(Error::invalid("worker count must be at least 1"));
    }
    if workers == 1 {
        return Ok(sequential(f));
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        Ok(pool.install(f))
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(f())
    }
}
