//! Streaming selection with optimal maxmin utility.
//!
//! While the running score total stays below `k`, the `⌈k/α⌉` best
//! candidates sit in TOP with their raw score, everyone else goes to REST,
//! and REST is rounded towards `{0, 1−α}`. REST members rounded to zero
//! are offered to a size-`k` uniform reservoir. A REST member never needs
//! more than `1−α` before the final additive shift, since candidates
//! outside TOP receive less than `α` from it. The first arrival that brings the total to
//! `k` or more moves TOP ∪ REST into PENDING and drops the reservoir. From
//! then on every arrival enters PENDING scaled by `k/sum`, the existing
//! entries shrink by `(sum − s)/sum`, and PENDING is rounded with cap 1.
//!
//! A stream that ends below `k` is closed by an additive water-fill over
//! TOP ∪ REST, with the reservoir standing in for every eliminated
//! candidate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{check_score, Cohort};
use crate::error::{Error, Result};
use crate::online_linear::StreamDecision;
use crate::rounding::{round_slice, TOLERANCE};

/// Uniform reservoir sample (Algorithm R).
#[derive(Debug, Clone)]
pub struct ReservoirSample<T> {
    capacity: usize,
    members: Vec<T>,
    seen: u64,
}

impl<T> ReservoirSample<T> {
    pub fn new(capacity: usize) -> Self {
        ReservoirSample {
            capacity,
            members: Vec::with_capacity(capacity),
            seen: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn members(&self) -> &[T] {
        &self.members
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Offers a newly eliminated `id` to the sample.
    pub fn offer<R: Rng + ?Sized>(&mut self, id: T, rng: &mut R) -> Offer<T> {
        self.seen += 1;
        if self.members.len() < self.capacity {
            self.members.push(id);
            return Offer::Admitted;
        }
        let slot = rng.random_range(0..self.seen) as usize;
        if slot < self.capacity {
            Offer::Replaced(std::mem::replace(&mut self.members[slot], id))
        } else {
            Offer::Refused(id)
        }
    }

    fn into_members(self) -> Vec<T> {
        self.members
    }
}

/// Result of offering an id to a [`ReservoirSample`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Offer<T> {
    /// Admitted into a free slot.
    Admitted,
    /// Admitted, evicting the returned member.
    Replaced(T),
    /// Not admitted.
    Refused(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    BelowK,
    AtOrAboveK,
}

#[derive(Debug, Clone)]
struct TopEntry<T> {
    score: f64,
    arrival: usize,
    id: T,
}

// Heap order puts the weakest entry on top: lowest score, and among equal
// scores the latest arrival.
impl<T> Ord for TopEntry<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.arrival.cmp(&other.arrival))
    }
}

impl<T> PartialOrd for TopEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> PartialEq for TopEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for TopEntry<T> {}

fn ceil_div(k: usize, x: f64) -> usize {
    (k as f64 / x - TOLERANCE).ceil() as usize
}

/// Streaming state for maxmin utility.
#[derive(Debug, Clone)]
pub struct RatioStreamState<T> {
    alpha: f64,
    k: usize,
    top_capacity: usize,
    phase: Phase,
    top: BinaryHeap<TopEntry<T>>,
    rest_ids: Vec<T>,
    rest_probs: Vec<f64>,
    reservoir: ReservoirSample<T>,
    pending_ids: Vec<T>,
    pending_probs: Vec<f64>,
    sum: f64,
    scale: f64,
    seen: usize,
}

impl<T: Clone> RatioStreamState<T> {
    pub const DEFAULT_ALPHA: f64 = 0.5;

    pub fn new(k: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1/2], got {alpha}")));
        }
        if k == 0 {
            return Err(Error::invalid("cohort size k must be positive"));
        }
        Ok(RatioStreamState {
            alpha,
            k,
            top_capacity: ceil_div(k, alpha),
            phase: Phase::BelowK,
            top: BinaryHeap::new(),
            rest_ids: Vec::new(),
            rest_probs: Vec::new(),
            reservoir: ReservoirSample::new(k),
            pending_ids: Vec::new(),
            pending_probs: Vec::new(),
            sum: 0.0,
            scale: 1.0,
            seen: 0,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    /// Running total of raw scores.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Cumulative scale; equals `k / sum` once the total has reached `k`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn top_len(&self) -> usize {
        self.top.len()
    }

    pub fn rest_probs(&self) -> &[f64] {
        &self.rest_probs
    }

    pub fn reservoir(&self) -> &ReservoirSample<T> {
        &self.reservoir
    }

    pub fn pending_probs(&self) -> &[f64] {
        &self.pending_probs
    }

    /// Candidates held across TOP, REST, the reservoir and PENDING.
    pub fn pending_count(&self) -> usize {
        self.top.len() + self.rest_ids.len() + self.reservoir.len() + self.pending_ids.len()
    }

    /// The pending bound `⌈k/α⌉ + ⌈k/(1−α)⌉ + k + 1`.
    pub fn pending_bound(&self) -> usize {
        self.top_capacity + ceil_div(self.k, 1.0 - self.alpha) + self.k + 1
    }

    /// Adds one candidate and returns every decision the arrival caused.
    pub fn ingest<R: Rng + ?Sized>(&mut self, id: T, score: f64, rng: &mut R) -> Result<Vec<StreamDecision<T>>> {
        check_score(score)?;
        let arrival = self.seen;
        self.seen += 1;
        self.sum += score;
        if self.sum < self.k as f64 {
            self.ingest_below(id, score, arrival, rng)
        } else {
            self.ingest_above(id, score, rng)
        }
    }

    fn ingest_below<R: Rng + ?Sized>(
        &mut self,
        id: T,
        score: f64,
        arrival: usize,
        rng: &mut R,
    ) -> Result<Vec<StreamDecision<T>>> {
        let newcomer = TopEntry { score, arrival, id };
        let mut newcomer_in_rest = false;
        if self.top.len() < self.top_capacity {
            self.top.push(newcomer);
        } else if self.top.peek().is_some_and(|weakest| weakest.score < score) {
            let bumped = self.top.pop().expect("non-empty TOP");
            self.rest_ids.push(bumped.id);
            self.rest_probs.push(bumped.score);
            self.top.push(newcomer);
        } else {
            self.rest_ids.push(newcomer.id);
            self.rest_probs.push(score);
            newcomer_in_rest = true;
        }

        round_slice(&mut self.rest_probs, 1.0 - self.alpha, rng)
            .map_err(|e| Error::Invariant(format!("REST rounding: {e}")))?;

        let mut decisions = Vec::new();
        let last = self.rest_ids.len().saturating_sub(1);
        let mut newcomer_eliminated = false;
        let mut keep = 0;
        for i in 0..self.rest_ids.len() {
            if self.rest_probs[i] > 0.0 {
                self.rest_ids.swap(keep, i);
                self.rest_probs.swap(keep, i);
                keep += 1;
            } else if newcomer_in_rest && i == last {
                newcomer_eliminated = true;
            }
        }
        self.rest_probs.truncate(keep);
        // An eliminated newcomer was last in REST and is never swapped, so it
        // is the last eliminated entry.
        let eliminated = self.rest_ids.len() - keep;
        let mut newcomer_pending = !newcomer_eliminated;
        for (j, id) in self.rest_ids.drain(keep..).enumerate() {
            let is_newcomer = newcomer_eliminated && j + 1 == eliminated;
            let copy = is_newcomer.then(|| id.clone());
            match self.reservoir.offer(id, rng) {
                Offer::Admitted => newcomer_pending |= is_newcomer,
                Offer::Replaced(out) => {
                    newcomer_pending |= is_newcomer;
                    decisions.push(StreamDecision::rejected(out));
                }
                Offer::Refused(out) => decisions.push(StreamDecision::rejected(out)),
            }
            if newcomer_pending && is_newcomer {
                decisions.extend(copy.map(StreamDecision::pending));
            }
        }
        if newcomer_pending && !newcomer_eliminated {
            if let Some(id) = self.newcomer_id(arrival, newcomer_in_rest) {
                decisions.push(StreamDecision::pending(id));
            }
        }
        Ok(decisions)
    }

    // Id of the candidate that just arrived, if it still sits in TOP or REST.
    fn newcomer_id(&self, arrival: usize, in_rest: bool) -> Option<T> {
        if in_rest {
            return self.rest_ids.last().cloned();
        }
        self.top.iter().find(|e| e.arrival == arrival).map(|e| e.id.clone())
    }

    fn ingest_above<R: Rng + ?Sized>(&mut self, id: T, score: f64, rng: &mut R) -> Result<Vec<StreamDecision<T>>> {
        let mut decisions = Vec::new();
        let incr = if self.phase == Phase::BelowK {
            self.phase = Phase::AtOrAboveK;
            let reservoir = std::mem::replace(&mut self.reservoir, ReservoirSample::new(0));
            decisions.extend(reservoir.into_members().into_iter().map(StreamDecision::rejected));
            for entry in std::mem::take(&mut self.top).into_vec() {
                self.pending_ids.push(entry.id);
                self.pending_probs.push(entry.score);
            }
            self.pending_ids.append(&mut self.rest_ids);
            self.pending_probs.append(&mut self.rest_probs);
            let first = self.k as f64 / self.sum;
            self.scale = first;
            first
        } else {
            let incr = (self.sum - score) / self.sum;
            self.scale *= incr;
            incr
        };
        for p in self.pending_probs.iter_mut() {
            *p *= incr;
        }
        self.pending_ids.push(id);
        self.pending_probs.push(score * self.scale);

        round_slice(&mut self.pending_probs, 1.0, rng)?;
        let newcomer_at = self.pending_ids.len() - 1;
        let newcomer_kept = self.pending_probs[newcomer_at] > 0.0;
        let mut keep = 0;
        for i in 0..self.pending_ids.len() {
            if self.pending_probs[i] > 0.0 {
                self.pending_ids.swap(keep, i);
                self.pending_probs.swap(keep, i);
                keep += 1;
            }
        }
        self.pending_probs.truncate(keep);
        decisions.extend(self.pending_ids.drain(keep..).map(StreamDecision::rejected));
        if newcomer_kept {
            decisions.push(StreamDecision::pending(self.pending_ids[keep - 1].clone()));
        }
        Ok(decisions)
    }

    /// Probabilities handed to the final rounding.
    ///
    /// Below `k`, TOP ∪ REST receive `c = (k − sum)/n`, the reservoir shares
    /// what is left of `k`, and overflow above 1 is spread over the
    /// unclipped population with the reservoir taking the share of every
    /// eliminated candidate.
    pub fn closing_probabilities(&self) -> Result<(Vec<T>, Vec<f64>)> {
        if self.seen < self.k {
            return Err(Error::StreamTooShort {
                seen: self.seen,
                k: self.k,
            });
        }
        if self.phase == Phase::AtOrAboveK {
            return Ok((self.pending_ids.clone(), self.pending_probs.clone()));
        }
        let n = self.seen as f64;
        let c = (self.k as f64 - self.sum) / n;
        let mut ids = Vec::new();
        let mut probs = Vec::new();
        for entry in self.top.iter() {
            ids.push(entry.id.clone());
            probs.push(entry.score + c);
        }
        for (id, p) in self.rest_ids.iter().zip(&self.rest_probs) {
            ids.push(id.clone());
            probs.push(p + c);
        }
        let held = ids.len();
        let res = self.reservoir.members();
        if !res.is_empty() {
            let share = (self.k as f64 - probs.iter().sum::<f64>()) / res.len() as f64;
            for id in res {
                ids.push(id.clone());
                probs.push(share);
            }
        }

        // Largest entry above 1 first.
        while let Some((i, over)) = probs[..held]
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, p)| *p > 1.0)
            .max_by(|a, b| a.1.total_cmp(&b.1))
        {
            let saturated = probs.iter().filter(|&&p| p >= 1.0).count() as f64;
            let spread = (over - 1.0) / (n - saturated);
            let mut modified = 0usize;
            for (j, p) in probs[..held].iter_mut().enumerate() {
                if j != i && *p < 1.0 {
                    *p += spread;
                    modified += 1;
                }
            }
            if !res.is_empty() {
                let uncounted = n - saturated - modified as f64;
                let extra = spread * uncounted / res.len() as f64;
                for p in probs[held..].iter_mut() {
                    *p += extra;
                }
            }
            probs[i] = 1.0;
        }
        if let Some(p) = probs[held..].iter().find(|&&p| p > 1.0 + TOLERANCE) {
            return Err(Error::Invariant(format!("reservoir probability {p} exceeds 1")));
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

    /// Checks the phase-specific invariants.
    pub fn check_invariants(&self) -> Result<()> {
        match self.phase {
            Phase::BelowK => {
                if self.top.len() > self.top_capacity {
                    return Err(Error::Invariant(format!("TOP holds {}", self.top.len())));
                }
                let cap = 1.0 - self.alpha;
                let fractional = self.rest_probs.iter().filter(|&&p| p != cap).count();
                if fractional > 1 {
                    return Err(Error::Invariant(format!("{fractional} REST entries below 1 − α")));
                }
                if self.rest_probs.len() > ceil_div(self.k, cap) {
                    return Err(Error::Invariant(format!("REST holds {}", self.rest_probs.len())));
                }
                if self.reservoir.len() > self.k {
                    return Err(Error::Invariant(format!("reservoir holds {}", self.reservoir.len())));
                }
            }
            Phase::AtOrAboveK => {
                let expected = self.k as f64 / self.sum;
                if (self.scale - expected).abs() > TOLERANCE {
                    return Err(Error::Invariant(format!("scale {} differs from k/sum = {expected}", self.scale)));
                }
                let mass: f64 = self.pending_probs.iter().sum();
                if (mass - self.k as f64).abs() > TOLERANCE {
                    return Err(Error::Invariant(format!("PENDING mass {mass} differs from k")));
                }
            }
        }
        if self.pending_count() > self.pending_bound() {
            return Err(Error::Invariant(format!(
                "{} pending exceeds bound {}",
                self.pending_count(),
                self.pending_bound()
            )));
        }
        Ok(())
    }
}
