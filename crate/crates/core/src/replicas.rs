//! Replica-level parallelism. Replicas are independent given their seeds,
//! so the parallel and sequential runners return identical, seed-ordered
//! results.

use crate::rng::derive_seed;

/// `count` replica seeds derived from `base`.
pub fn replica_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| derive_seed(base, i)).collect()
}

/// Run `f` on every seed in order on the current thread.
pub fn map_sequential<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    seeds.iter().map(|&s| f(s)).collect()
}

/// Run `f` on every seed with rayon; output order follows `seeds`.
#[cfg(feature = "parallel")]
pub fn map_parallel<T, F>(seeds: &[u64], f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Chooses between the parallel and sequential paths. With the `parallel`
/// feature off every runner is sequential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReplicaRunner {
    /// Worker threads; `None` uses rayon's global pool, `Some(1)` runs
    /// sequentially.
    jobs: Option<usize>,
}

impl ReplicaRunner {
    pub fn new(jobs: Option<usize>) -> Self {
        Self { jobs: jobs.map(|j| j.max(1)) }
    }

    pub fn sequential() -> Self {
        Self { jobs: Some(1) }
    }

    pub fn jobs(&self) -> Option<usize> {
        self.jobs
    }

    #[cfg(feature = "parallel")]
    pub fn map<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        match self.jobs {
            Some(1) => map_sequential(seeds, f),
            None => map_parallel(seeds, f),
            Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
                Ok(pool) => pool.install(|| map_parallel(seeds, f)),
                Err(_) => map_sequential(seeds, f),
            },
        }
    }

    #[cfg(not(feature = "parallel"))]
    pub fn map<T, F>(&self, seeds: &[u64], f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        map_sequential(seeds, f)
    }
}
