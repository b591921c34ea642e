//! Execution backend for the data-parallel loops.
//!
//! Node sweeps and Monte Carlo paths are written once against [`Execution`].
//! With the `parallel` feature the `Parallel` variant runs on rayon; without
//! it every mode falls back to a plain sequential loop. Both paths write
//! results by index, so output is identical for any worker count.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be spread across threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Fills `out[i] = f(i)`.
    pub fn fill<T, F>(self, out: &mut [T], min_len: usize, f: F)
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            out.par_iter_mut()
                .with_min_len(min_len.max(1))
                .enumerate()
                .for_each(|(i, slot)| *slot = f(i));
            return;
        }
        let _ = min_len;
        for (i, slot) in out.iter_mut().enumerate() {
            *slot = f(i);
        }
    }

    /// Collects `f(i)` for `i in 0..n` in index order.
    pub fn map<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}
