use serde::{Deserialize, Serialize};

/// How independent replicas are scheduled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

/// Evaluate `f(0..n)` and return the results in index order. Each replica
/// must draw its randomness from its own index so the output does not depend
/// on the schedule.
pub fn run_replicas<T, F>(n: u64, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Run `f` inside a pool of `threads` workers when parallelism is compiled in.
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> T {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build().expect("thread pool");
        return pool.install(f);
    }
    let _ = threads;
    f()
}
