//! Worker pools keyed by thread count.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

fn pool(threads: usize) -> Arc<ThreadPool> {
    static POOLS: OnceLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = OnceLock::new();
    let mut pools = POOLS.get_or_init(Default::default).lock().expect("pool registry poisoned");
    pools
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(|i| format!("gemlab-worker-{i}"))
                    .build()
                    .expect("failed to start worker pool"),
            )
        })
        .clone()
}

/// Maps `f` over `0..tasks` on `workers` threads, returning results in task
/// order. `init` builds per-worker scratch state.
pub fn map_tasks<S, R, I, F>(workers: usize, tasks: usize, init: I, f: F) -> Vec<R>
where
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize) -> R + Sync + Send,
    R: Send,
{
    if workers <= 1 || tasks <= 1 {
        let mut state = init();
        return (0..tasks).map(|t| f(&mut state, t)).collect();
    }
    pool(workers).install(|| (0..tasks).into_par_iter().map_init(&init, |s, t| f(s, t)).collect())
}
