//! Ordered map over work units, on a rayon pool or sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub struct Executor {
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl Executor {
    /// `jobs == 1` runs inline; `0` uses one thread per core.
    pub fn new(jobs: usize) -> Executor {
        #[cfg(feature = "parallel")]
        {
            let pool =
                (jobs != 1).then(|| rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool"));
            Executor { pool }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = jobs;
            Executor {}
        }
    }

    pub fn is_parallel(&self) -> bool {
        #[cfg(feature = "parallel")]
        {
            self.pool.is_some()
        }
        #[cfg(not(feature = "parallel"))]
        {
            false
        }
    }

    /// Results come back in input order regardless of scheduling.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| items.par_iter().map(&f).collect());
        }
        items.iter().map(f).collect()
    }
}
