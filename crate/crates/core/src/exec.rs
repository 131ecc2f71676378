//! Order-preserving map over independent work items, parallel when the
//! `parallel` feature is enabled.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// `jobs = 0` uses every available core.
    Parallel {
        jobs: usize,
    },
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel { jobs: 0 }
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn from_jobs(jobs: Option<usize>) -> Self {
        match jobs {
            Some(1) => Execution::Sequential,
            Some(j) => Execution::Parallel { jobs: j },
            None => Execution::default(),
        }
    }

    /// `items.iter().map(f)` with results in input order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            Execution::Parallel { jobs } => parallel_map(items, f, jobs),
        }
    }
}

#[cfg(feature = "parallel")]
fn parallel_map<T, R, F>(items: &[T], f: F, jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let work = || items.par_iter().map(&f).collect();
    if jobs == 0 {
        return work();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(work),
        Err(_) => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn parallel_map<T, R, F>(items: &[T], f: F, _jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}
