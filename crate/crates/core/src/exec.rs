//! Trial execution: rayon when the `parallel` feature is on, a plain loop
//! otherwise. Results are aggregated with integer counts, so the outcome is
//! identical for any worker count.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// The deterministic generator used for every random decision.
pub type TrialRng = ChaCha8Rng;

/// Generator for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> TrialRng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
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
    fn parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Runs `trials` independent trials and counts how often each of `n`
/// positions is selected. Trial `t` gets `trial_rng(seed, t)`.
pub fn count_selections<F>(n: usize, trials: u64, seed: u64, exec: Execution, trial: F) -> Result<Vec<u64>>
where
    F: Fn(&mut TrialRng) -> Result<Vec<usize>> + Sync,
{
    let step = |mut acc: Vec<u64>, t: u64| -> Result<Vec<u64>> {
        let mut rng = trial_rng(seed, t);
        for i in trial(&mut rng)? {
            acc[i] += 1;
        }
        Ok(acc)
    };
    if exec.parallel() {
        #[cfg(feature = "parallel")]
        return (0..trials)
            .into_par_iter()
            .try_fold(|| vec![0u64; n], step)
            .try_reduce(|| vec![0u64; n], |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                Ok(a)
            });
    }
    (0..trials).try_fold(vec![0u64; n], step)
}

/// Maps `f` over `range`, keeping order.
pub fn map_range<T, F>(range: Range<usize>, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if exec.parallel() {
        #[cfg(feature = "parallel")]
        return range.into_par_iter().map(f).collect();
    }
    range.map(f).collect()
}
