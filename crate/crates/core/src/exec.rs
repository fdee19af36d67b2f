//! Data-parallel map with a sequential fallback.
//!
//! Every parallel entry point in the crate goes through [`map_indexed`], which
//! always returns results in index order so downstream reductions are
//! independent of scheduling. Without the `parallel` feature both modes run
//! on the calling thread.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Rayon's global pool (or the pool installed by [`with_workers`]).
    #[default]
    Parallel,
}

/// Evaluate `f(0..n)` and collect the results in index order.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Execution::Sequential => (0..n).map(f).collect(),
        Execution::Parallel => par_map(n, f),
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Run `op` with at most `workers` threads. `workers == 0` uses the default pool.
pub fn with_workers<R: Send>(workers: usize, op: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        if workers > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(op);
            }
        }
    }
    let _ = workers;
    op()
}

/// Execution mode implied by a worker count: one worker means sequential.
pub fn execution_for(workers: usize) -> Execution {
    if workers == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let seq = map_indexed(1000, Execution::Sequential, |i| i * i);
        let par = map_indexed(1000, Execution::Parallel, |i| i * i);
        assert_eq!(seq, par);
        let pinned = with_workers(3, || map_indexed(1000, Execution::Parallel, |i| i * i));
        assert_eq!(seq, pinned);
    }
}
