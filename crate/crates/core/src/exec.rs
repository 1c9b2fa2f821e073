//! Execution policy for the data-parallel loops.
//!
//! Every hot loop in the crate (per-sample forward/backward passes, batch
//! evaluation, corpus generation, coverage masks) goes through
//! [`Execution`]. With the `parallel` feature the `Parallel` policy fans out
//! over the rayon pool; without it, or with `Sequential`, the same closures
//! run in order on the calling thread. Results are always collected in input
//! order so reductions are bit-identical under either policy.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Environment variable capping the number of worker threads.
pub const NUM_WORKERS_ENV: &str = "OYA_NUM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` unless `OYA_NUM_WORKERS=1` or the crate was built without
    /// the `parallel` feature.
    pub fn from_env() -> Self {
        match std::env::var(NUM_WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
        {
            Some(1) => Execution::Sequential,
            _ if cfg!(feature = "parallel") => Execution::Parallel,
            _ => Execution::Sequential,
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Maps `f` over `items`, preserving order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }

    /// Maps `f` over `0..n`, preserving order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Applies `f` to consecutive `chunk`-sized pieces of `data`, passing the
    /// index of each piece.
    pub fn for_each_chunk_mut<T, F>(self, data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            data.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(i, c)| f(i, c));
            return;
        }
        data.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policies_agree() {
        let items: Vec<u64> = (0..1000).collect();
        let a = Execution::Sequential.map(&items, |v| v * v + 1);
        let b = Execution::Parallel.map(&items, |v| v * v + 1);
        assert_eq!(a, b);
        let c = Execution::Parallel.map_range(1000, |i| (i as u64) * (i as u64) + 1);
        assert_eq!(a, c);
    }

    #[test]
    fn chunked_mutation_covers_everything() {
        for exec in [Execution::Sequential, Execution::Parallel] {
            let mut data = vec![0usize; 103];
            exec.for_each_chunk_mut(&mut data, 10, |i, c| {
                for (j, v) in c.iter_mut().enumerate() {
                    *v = i * 10 + j;
                }
            });
            assert!(data.iter().enumerate().all(|(i, &v)| i == v));
        }
    }
}
