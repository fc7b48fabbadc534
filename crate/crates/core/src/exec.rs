//! Trial execution.
//!
//! With the `parallel` feature (default) independent trials are spread over
//! the rayon pool; without it every loop runs on the calling thread. Results
//! are identical either way because each trial owns a keyed stream and the
//! reductions used by callers are order independent.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Exec {
    #[default]
    Auto,
    Sequential,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Auto
    }
}

/// Maps `f` over `0..count`, returning results in index order.
pub fn map_indexed<T, F>(exec: Exec, count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..count).map(f).collect()
}

/// Folds trial results into per-worker accumulators and merges them.
///
/// `merge` must be associative and commutative for results to be
/// reproducible under the parallel executor.
pub fn fold_trials<A, Init, Step, Merge>(
    exec: Exec,
    trials: u64,
    init: Init,
    step: Step,
    merge: Merge,
) -> A
where
    A: Send,
    Init: Fn() -> A + Sync + Send,
    Step: Fn(&mut A, u64) + Sync + Send,
    Merge: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..trials)
            .into_par_iter()
            .fold(&init, |mut acc, t| {
                step(&mut acc, t);
                acc
            })
            .reduce(&init, &merge);
    }
    let _ = (exec, &merge);
    let mut acc = init();
    for t in 0..trials {
        step(&mut acc, t);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_auto_agree() {
        let sq = |i: usize| (i * i) as u64;
        assert_eq!(map_indexed(Exec::Auto, 100, sq), map_indexed(Exec::Sequential, 100, sq));
        let sum = |e| fold_trials(e, 1000, || 0u64, |a, t| *a += t, |a, b| a + b);
        assert_eq!(sum(Exec::Auto), sum(Exec::Sequential));
        assert_eq!(sum(Exec::Auto), 999 * 1000 / 2);
    }
}
