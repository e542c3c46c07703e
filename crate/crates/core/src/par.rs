//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature (on by default) [`Execution::Parallel`] runs on
//! the rayon global pool. Without it every call is sequential. Result order
//! always follows input order, so aggregation downstream is deterministic
//! regardless of the execution mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    /// Number of workers a batch should be sized for.
    pub fn width(self) -> usize {
        match self {
            Execution::Sequential => 1,
            #[cfg(feature = "parallel")]
            Execution::Parallel => rayon::current_num_threads().max(1),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => 1,
        }
    }

    /// Applies `f` to every item, returning results in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            #[cfg(not(feature = "parallel"))]
            Execution::Parallel => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }

    /// Maps over `0..n`.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        let idx: Vec<usize> = (0..n).collect();
        self.map(&idx, |_, &i| f(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..257).collect();
        let a = Execution::Sequential.map(&xs, |i, x| x * x + i as u64);
        let b = Execution::Parallel.map(&xs, |i, x| x * x + i as u64);
        assert_eq!(a, b);
        assert_eq!(a[3], 12);
    }
}
