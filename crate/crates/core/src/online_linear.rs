//! Streaming ε-approximate selection for linear utility.
//!
//! Arriving candidates are bucketed into `m = ⌈1/ε⌉` score groups (plus a
//! group for score zero) and treated as if their score were the top of
//! their bucket. After each arrival the per-group probabilities `s^g` are
//! recomputed by water-filling the bucket histogram to `k`. Each surviving
//! representative stands in for `n_i` members of its group, and the
//! multiplicities are consolidated with integer dependent rounding towards
//! `⌊1/s^g⌋`. Representatives whose multiplicity hits zero are rejected.
//! At the end of the stream, representative `i` is selected with
//! probability `n_i·s^g`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{check_score, Cohort};
use crate::error::{Error, Result};
use crate::rounding::{round_in_place, round_slice, TOLERANCE};
use crate::water_fill::{shift_down, shift_up};

/// Scores this close to a bucket edge `g·ε` are treated as sitting on it.
pub const EDGE_SNAP: f64 = 1e-12;

/// Group probabilities at or below this are set to zero.
const ZERO_SNAP: f64 = 1e-12;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    Ok(())
}

/// Number of positive-score groups, `⌈1/ε⌉`.
pub fn group_count(epsilon: f64) -> usize {
    ((1.0 / epsilon - TOLERANCE).ceil() as usize).max(1)
}

/// Group index of `score`: 0 for a zero score, otherwise the `g ≥ 1` with
/// `(g−1)ε < score ≤ gε`.
pub fn group_of(score: f64, epsilon: f64) -> usize {
    if score <= 0.0 {
        return 0;
    }
    let m = group_count(epsilon);
    let x = score / epsilon;
    let nearest = x.round();
    let g = if nearest >= 1.0 && (score - nearest * epsilon).abs() <= EDGE_SNAP {
        nearest
    } else {
        x.ceil()
    };
    (g as usize).clamp(1, m)
}

/// Rounded score `ŝ = min(gε, 1)` shared by every member of group `g`.
pub fn group_value(group: usize, epsilon: f64) -> f64 {
    (group as f64 * epsilon).min(1.0)
}

/// Rounded score `ŝ` of a raw score.
pub fn rounded_score(score: f64, epsilon: f64) -> f64 {
    group_value(group_of(score, epsilon), epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Rejected,
    Pending,
}

/// What happened to a candidate during one stream step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamDecision<T> {
    pub id: T,
    pub verdict: Verdict,
}

impl<T> StreamDecision<T> {
    pub(crate) fn rejected(id: T) -> Self {
        StreamDecision {
            id,
            verdict: Verdict::Rejected,
        }
    }

    pub(crate) fn pending(id: T) -> Self {
        StreamDecision {
            id,
            verdict: Verdict::Pending,
        }
    }
}

#[derive(Debug, Clone)]
struct Group<T> {
    size: u64,
    prob: f64,
    reps: Vec<T>,
    multiplicity: Vec<u64>,
}

impl<T> Group<T> {
    fn new() -> Self {
        Group {
            size: 0,
            prob: 0.0,
            reps: Vec::new(),
            multiplicity: Vec::new(),
        }
    }
}

/// Read-only view of one score group.
#[derive(Debug, Clone, Copy)]
pub struct GroupView<'a, T> {
    pub index: usize,
    /// Number of arrivals assigned to the group, `n^g`.
    pub size: u64,
    /// Current group probability `s^g`.
    pub prob: f64,
    pub reps: &'a [T],
    pub multiplicity: &'a [u64],
}

/// Streaming state for linear utility.
#[derive(Debug, Clone)]
pub struct LinearGroupState<T> {
    epsilon: f64,
    k: usize,
    groups: Vec<Group<T>>,
    seen: usize,
}

impl<T: Clone> LinearGroupState<T> {
    pub fn new(k: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if k == 0 {
            return Err(Error::invalid("cohort size k must be positive"));
        }
        let groups = (0..=group_count(epsilon)).map(|_| Group::new()).collect();
        Ok(LinearGroupState {
            epsilon,
            k,
            groups,
            seen: 0,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Candidates ingested so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// `Σ ŝ_i` over everything seen, from the group histogram.
    pub fn rounded_sum(&self) -> f64 {
        self.groups
            .iter()
            .enumerate()
            .map(|(g, grp)| grp.size as f64 * group_value(g, self.epsilon))
            .sum()
    }

    /// Group probability `s^g`, available once `k` candidates have arrived.
    pub fn group_probability(&self, group: usize) -> Option<f64> {
        (self.seen >= self.k).then(|| self.groups.get(group).map(|g| g.prob)).flatten()
    }

    /// Selection probability of any candidate with this raw score.
    pub fn marginal_for_score(&self, score: f64) -> Option<f64> {
        self.group_probability(group_of(score, self.epsilon))
    }

    pub fn groups(&self) -> impl Iterator<Item = GroupView<'_, T>> {
        self.groups.iter().enumerate().map(|(index, g)| GroupView {
            index,
            size: g.size,
            prob: g.prob,
            reps: &g.reps,
            multiplicity: &g.multiplicity,
        })
    }

    /// Representatives currently held.
    pub fn pending_count(&self) -> usize {
        self.groups.iter().map(|g| g.reps.len()).sum()
    }

    /// Adds one candidate and returns every decision the arrival caused.
    pub fn ingest<R: Rng + ?Sized>(&mut self, id: T, score: f64, rng: &mut R) -> Result<Vec<StreamDecision<T>>> {
        check_score(score)?;
        let g = group_of(score, self.epsilon);
        {
            let group = &mut self.groups[g];
            group.size += 1;
            group.reps.push(id.clone());
            group.multiplicity.push(1);
        }
        self.seen += 1;
        if self.seen < self.k {
            return Ok(vec![StreamDecision::pending(id)]);
        }
        self.refresh_probabilities()?;

        let mut decisions = Vec::new();
        let mut newcomer_kept = false;
        for (gi, group) in self.groups.iter_mut().enumerate() {
            if group.reps.is_empty() {
                continue;
            }
            if group.prob > 0.0 {
                let mut cap = (1.0 / group.prob + TOLERANCE).floor().min(u64::MAX as f64) as u64;
                // Guards against float drift only; `s^g` never increases.
                let largest = group.multiplicity.iter().copied().max().unwrap_or(1);
                cap = cap.max(largest).max(1);
                round_in_place(&mut group.multiplicity, cap, rng);
            } else {
                // Once the total reaches k the shift only grows, so a group
                // at probability zero stays there.
                group.multiplicity.iter_mut().for_each(|m| *m = 0);
            }
            if gi == g {
                newcomer_kept = group.multiplicity.last().is_some_and(|&m| m > 0);
            }
            let mut keep = 0;
            for i in 0..group.reps.len() {
                if group.multiplicity[i] > 0 {
                    group.reps.swap(keep, i);
                    group.multiplicity.swap(keep, i);
                    keep += 1;
                }
            }
            decisions.extend(group.reps.drain(keep..).map(StreamDecision::rejected));
            group.multiplicity.truncate(keep);
        }
        if newcomer_kept {
            decisions.push(StreamDecision::pending(id));
        }
        Ok(decisions)
    }

    fn refresh_probabilities(&mut self) -> Result<()> {
        let values: Vec<f64> = (0..self.groups.len()).map(|g| group_value(g, self.epsilon)).collect();
        let weights: Vec<f64> = self.groups.iter().map(|g| g.size as f64).collect();
        let target = self.k as f64;
        let sum = self.rounded_sum();
        let probs: Vec<f64> = if sum < target {
            let b = shift_up(&values, &weights, target)?;
            values.iter().map(|v| (v + b).min(1.0)).collect()
        } else if sum > target {
            let b = shift_down(&values, &weights, target)?;
            values.iter().map(|v| (v - b).max(0.0)).collect()
        } else {
            values
        };
        for (group, p) in self.groups.iter_mut().zip(probs) {
            // A group whose value sits exactly at the shift can come back as
            // ±1 ulp; treat it as the zero it is so rejections stay final.
            group.prob = if p <= ZERO_SNAP { 0.0 } else { p };
        }
        Ok(())
    }

    /// Probabilities `n_i·s^g` handed to the final rounding, per retained
    /// representative.
    pub fn closing_probabilities(&self) -> Result<(Vec<T>, Vec<f64>)> {
        if self.seen < self.k {
            return Err(Error::StreamTooShort {
                seen: self.seen,
                k: self.k,
            });
        }
        let mut ids = Vec::with_capacity(self.pending_count());
        let mut probs = Vec::with_capacity(self.pending_count());
        for group in &self.groups {
            for (id, &m) in group.reps.iter().zip(&group.multiplicity) {
                ids.push(id.clone());
                probs.push(m as f64 * group.prob);
            }
        }
        Ok((ids, probs))
    }

    /// Draws the final cohort of `k` candidates.
    pub fn finalize<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Cohort<T>> {
        let (ids, mut probs) = self.closing_probabilities()?;
        round_slice(&mut probs, 1.0, rng)?;
        Ok(Cohort {
            members: ids
                .into_iter()
                .zip(probs)
                .filter(|(_, p)| *p > 0.0)
                .map(|(id, _)| id)
                .collect(),
        })
    }

    /// Checks the state's structural invariants.
    pub fn check_invariants(&self) -> Result<()> {
        if self.seen < self.k {
            return Ok(());
        }
        let mut mass = 0.0;
        for (g, group) in self.groups.iter().enumerate() {
            mass += group.size as f64 * group.prob;
            if group.prob > 0.0 {
                let total: u64 = group.multiplicity.iter().sum();
                if total != group.size {
                    return Err(Error::Invariant(format!(
                        "group {g}: multiplicities sum to {total}, group size {}",
                        group.size
                    )));
                }
            }
            for &m in &group.multiplicity {
                if m == 0 || m as f64 * group.prob > 1.0 + TOLERANCE {
                    return Err(Error::Invariant(format!(
                        "group {g}: multiplicity {m} with probability {}",
                        group.prob
                    )));
                }
            }
        }
        if (mass - self.k as f64).abs() > TOLERANCE {
            return Err(Error::Invariant(format!("group mass {mass} differs from k = {}", self.k)));
        }
        Ok(())
    }

    /// The pending bound `2k + ⌈1/ε⌉ + 1`.
    pub fn pending_bound(&self) -> usize {
        2 * self.k + group_count(self.epsilon) + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::{count_selections, Execution};
    use crate::offline::linear_probs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run_stream(scores: &[f64], k: usize, eps: f64, seed: u64) -> LinearGroupState<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = LinearGroupState::new(k, eps).unwrap();
        for (i, &s) in scores.iter().enumerate() {
            state.ingest(i, s, &mut rng).unwrap();
        }
        state
    }

    fn offline_on_rounded(scores: &[f64], k: usize, eps: f64) -> Vec<f64> {
        let rounded: Vec<f64> = scores.iter().map(|&s| rounded_score(s, eps)).collect();
        linear_probs(&rounded, k).unwrap().0
    }

    fn frequencies(scores: &[f64], k: usize, eps: f64, trials: u64) -> Vec<f64> {
        let counts = count_selections(scores.len(), trials, 1234, Execution::default(), |rng| {
            let mut state = LinearGroupState::new(k, eps)?;
            for (i, &s) in scores.iter().enumerate() {
                state.ingest(i, s, rng)?;
            }
            Ok(state.finalize(rng)?.members)
        })
        .unwrap();
        counts.iter().map(|&c| c as f64 / trials as f64).collect()
    }

    #[test]
    fn group_of_examples() {
        assert_eq!(group_of(0.0, 0.1), 0);
        assert_eq!(group_of(0.1, 0.1), 1);
        assert_eq!(group_of(0.1000000001, 0.1), 2);
        assert_eq!(group_of(1.0, 0.3), 4);
        assert_eq!(group_count(0.3), 4);
        assert_eq!(group_count(0.1), 10);
        assert_eq!(group_count(0.05), 20);
        assert_eq!(group_of(0.3 + 1e-13, 0.1), 3);
        assert_eq!(group_of(0.3 - 1e-13, 0.1), 3);
    }

    #[test]
    fn group_of_grid_scan() {
        for eps in [0.3, 0.1, 0.25, 0.07, 1.0] {
            let m = group_count(eps);
            for i in 1..=10_000 {
                let s = i as f64 / 10_000.0;
                let g = group_of(s, eps);
                assert!((1..=m).contains(&g));
                assert!((g as f64 - 1.0) * eps < s + EDGE_SNAP, "s={s} eps={eps} g={g}");
                assert!(s <= g as f64 * eps + EDGE_SNAP, "s={s} eps={eps} g={g}");
            }
        }
    }

    #[test]
    fn four_scores_stream_matches_offline() {
        let s = [0.1, 0.3, 0.6, 0.9];
        let state = run_stream(&s, 2, 0.1, 0);
        let expected = [0.125, 0.325, 0.625, 0.925];
        for (score, e) in s.iter().zip(expected) {
            assert!((state.marginal_for_score(*score).unwrap() - e).abs() < 1e-9);
        }
        state.check_invariants().unwrap();
    }

    #[test]
    fn single_bucket_degenerates() {
        let s = [0.2, 0.5, 0.9, 0.0, 0.3, 0.7];
        let state = run_stream(&s, 2, 1.0, 5);
        let expected = offline_on_rounded(&s, 2, 1.0);
        // ŝ is 1 for every positive score.
        assert!((expected[0] - 0.4).abs() < 1e-12 && expected[3] == 0.0);
        for (score, e) in s.iter().zip(expected) {
            assert!((state.marginal_for_score(*score).unwrap() - e).abs() < 1e-9);
        }
    }

    #[test]
    fn pending_bound_holds() {
        let (k, eps) = (5, 0.25);
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut state = LinearGroupState::new(k, eps).unwrap();
            for i in 0..200 {
                let s: f64 = rng.random();
                state.ingest(i, s, &mut rng).unwrap();
                if state.seen() >= k {
                    assert!(state.pending_count() <= 15, "seed {seed} step {i}: {}", state.pending_count());
                }
                state.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn zero_groups_stay_empty() {
        // Fine buckets put the shift exactly on a group value often; a group
        // that was emptied must never come back with positive probability.
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(1..=10);
            let mut state = LinearGroupState::new(k, 0.05).unwrap();
            for i in 0..200usize {
                let s: f64 = rng.random();
                state.ingest(i, s, &mut rng).unwrap();
                state.check_invariants().unwrap();
            }
        }
    }

    #[test]
    fn rejections_are_final_and_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut state = LinearGroupState::new(3, 0.2).unwrap();
        let mut rejected = std::collections::HashSet::new();
        for i in 0..300usize {
            let s: f64 = rng.random();
            for d in state.ingest(i, s, &mut rng).unwrap() {
                if d.verdict == Verdict::Rejected {
                    assert!(rejected.insert(d.id), "{} rejected twice", d.id);
                }
            }
            for g in state.groups() {
                assert!(g.reps.iter().all(|id| !rejected.contains(id)));
            }
        }
        let cohort = state.finalize(&mut rng).unwrap();
        assert_eq!(cohort.len(), 3);
        assert!(cohort.members.iter().all(|id| !rejected.contains(id)));
    }

    #[test]
    fn newcomer_reported_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut state = LinearGroupState::new(2, 0.5).unwrap();
        for i in 0..50usize {
            let s: f64 = rng.random();
            let decisions = state.ingest(i, s, &mut rng).unwrap();
            let about_new = decisions.iter().filter(|d| d.id == i).count();
            assert_eq!(about_new, 1, "step {i}: {decisions:?}");
        }
    }

    #[test]
    fn four_scores_frequencies() {
        let f = frequencies(&[0.1, 0.3, 0.6, 0.9], 2, 0.1, 100_000);
        for (fi, e) in f.iter().zip([0.125, 0.325, 0.625, 0.925]) {
            assert!((fi - e).abs() < 0.01, "{f:?}");
        }
    }

    #[test]
    fn single_group_is_uniform() {
        let s = [0.5; 10];
        let f = frequencies(&s, 3, 0.5, 100_000);
        for fi in f {
            assert!((fi - 0.3).abs() < 0.01);
        }
    }

    #[test]
    fn random_stream_matches_offline_on_rounded_scores() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..50).map(|_| rng.random()).collect();
        let expected = offline_on_rounded(&s, 4, 0.2);
        let f = frequencies(&s, 4, 0.2, 100_000);
        for (fi, e) in f.iter().zip(&expected) {
            assert!((fi - e).abs() < 0.015, "{fi} vs {e}");
        }
    }

    #[test]
    fn errors() {
        assert!(LinearGroupState::<usize>::new(2, 0.0).is_err());
        assert!(LinearGroupState::<usize>::new(2, 1.5).is_err());
        assert!(LinearGroupState::<usize>::new(0, 0.5).is_err());
        let mut state = LinearGroupState::new(3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(state.ingest(0, 1.5, &mut rng).is_err());
        assert!(state.ingest(0, f64::NAN, &mut rng).is_err());
        state.ingest(0, 0.4, &mut rng).unwrap();
        assert!(matches!(state.finalize(&mut rng), Err(Error::StreamTooShort { seen: 1, k: 3 })));
    }
}
