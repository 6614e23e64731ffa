//! Data-parallel map helper with a sequential fallback.
//!
//! All per-frame and per-pixel loops in this crate go through [`map`] so the
//! `parallel` feature flips the whole crate between rayon and sequential
//! execution, and benchmarks can compare both paths explicitly.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    /// Rayon work-stealing over items. Falls back to sequential when the
    /// `parallel` feature is disabled.
    Parallel,
}

impl ExecMode {
    /// The default mode for this build: parallel when compiled in.
    pub fn auto() -> Self {
        if cfg!(feature = "parallel") {
            ExecMode::Parallel
        } else {
            ExecMode::Sequential
        }
    }
}

/// Maps `f` over `0..n`, preserving order.
pub fn map<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

/// Fallible ordered map over `0..n`.
pub fn try_map<T, E, F>(n: usize, mode: ExecMode, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        ExecMode::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                (0..n).into_par_iter().map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                (0..n).map(f).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential() {
        let a = map(100, ExecMode::Sequential, |i| i * i);
        let b = map(100, ExecMode::Parallel, |i| i * i);
        assert_eq!(a, b);
    }
}
