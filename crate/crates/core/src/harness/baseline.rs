//! Reference selectors: score-weighted subset sampling and uniform sampling.

use rand::seq::index::sample;
use rand::Rng;
use serde::Serialize;

use crate::candidate::{AdjustMode, Cohort, MarginalVector, ScoreVector};
use crate::error::{Error, Result};
use crate::fairness::{linear_utility, maxmin_utility};

/// Largest pool the weighted baseline will enumerate.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetProbability {
    pub members: Vec<usize>,
    pub probability: f64,
}

/// Exact distribution of the weighted-sampling selector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedBaseline {
    pub subsets: Vec<SubsetProbability>,
    pub marginals: MarginalVector,
    pub linear: f64,
    pub maxmin: f64,
    cumulative: Vec<f64>,
}

impl WeightedBaseline {
    /// Draws one subset (as positions) from the distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let u = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(0.0);
        let at = self.cumulative.partition_point(|&c| c <= u).min(self.subsets.len() - 1);
        self.subsets[at].members.clone()
    }
}

fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Enumerates all `C(n, k)` subsets, weighting each by the sum of its
/// members' scores. If every weight is zero the distribution is uniform.
pub fn weighted_sampling_baseline(scores: &ScoreVector) -> Result<WeightedBaseline> {
    let (n, k) = (scores.len(), scores.k());
    if n > MAX_ENUMERATION {
        return Err(Error::invalid(format!(
            "weighted baseline enumerates subsets and supports n <= {MAX_ENUMERATION}, got {n}"
        )));
    }
    let s = scores.scores();
    let mut subsets = Vec::new();
    let mut weights = Vec::new();
    for_each_subset(n, k, |idx| {
        subsets.push(idx.to_vec());
        weights.push(idx.iter().map(|&i| s[i]).sum::<f64>());
    });
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        weights.iter_mut().for_each(|w| *w = 1.0);
    }
    let total: f64 = weights.iter().sum();

    let mut probs = vec![0.0; n];
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut running = 0.0;
    let subsets: Vec<SubsetProbability> = subsets
        .into_iter()
        .zip(&weights)
        .map(|(members, w)| {
            let probability = w / total;
            for &i in &members {
                probs[i] += probability;
            }
            running += w;
            cumulative.push(running);
            SubsetProbability { members, probability }
        })
        .collect();

    let linear = linear_utility(&probs, s)?;
    let maxmin = maxmin_utility(&probs, s)?;
    Ok(WeightedBaseline {
        subsets,
        marginals: MarginalVector {
            ids: scores.ids().to_vec(),
            probs,
            shift: 0.0,
            mode: AdjustMode::Identity,
            k,
        },
        linear,
        maxmin,
        cumulative,
    })
}

/// A uniformly random `k`-subset of positions `0..n`.
pub fn uniform_baseline<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Cohort<usize>> {
    if k > n {
        return Err(Error::CohortTooLarge { k, n });
    }
    let mut members = sample(rng, n, k).into_vec();
    members.sort_unstable();
    Ok(Cohort { members })
}
