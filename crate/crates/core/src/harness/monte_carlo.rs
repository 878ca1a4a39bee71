//! Repeated seeded runs of a selector and the resulting frequency estimates.

use serde::Serialize;

use super::baseline::{uniform_baseline, weighted_sampling_baseline};
use super::{Mode, RunConfig};
use crate::candidate::CandidateRecord;
use crate::error::Result;
use crate::exec::{count_selections, trial_rng, TrialRng};
use crate::offline::{draw_indices, linear_probs, ratio_probs};
use crate::online_linear::{LinearGroupState, StreamDecision, Verdict};
use crate::online_ratio::RatioStreamState;
use crate::ScoreVector;

/// Empirical selection frequencies with per-entry confidence half-widths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalMarginals {
    pub ids: Vec<String>,
    pub frequencies: Vec<f64>,
    pub half_widths: Vec<f64>,
    pub trials: u64,
}

/// `4·√(f(1−f)/trials)`.
pub fn half_width(frequency: f64, trials: u64) -> f64 {
    4.0 * (frequency * (1.0 - frequency) / trials as f64).sqrt()
}

/// One arrival of a traced stream run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub step: usize,
    pub id: String,
    pub score: f64,
    pub rejected: Vec<String>,
    pub pending: usize,
}

/// A prepared selector: everything that does not depend on the trial's rng.
pub(crate) enum Selector {
    Fixed(Vec<f64>),
    OnlineLinear { scores: Vec<f64>, k: usize, epsilon: f64 },
    OnlineRatio { scores: Vec<f64>, k: usize, alpha: f64 },
    Weighted(super::baseline::WeightedBaseline),
    Uniform { n: usize, k: usize },
}

impl Selector {
    pub(crate) fn new(config: &RunConfig, records: &[CandidateRecord]) -> Result<Self> {
        let scores = ScoreVector::new(records, config.k)?;
        let s = scores.scores().to_vec();
        let k = config.k;
        Ok(match config.mode {
            Mode::OfflineLinear => Selector::Fixed(linear_probs(&s, k)?.0),
            Mode::OfflineRatio => Selector::Fixed(ratio_probs(&s, k)?.0),
            Mode::OnlineLinear => Selector::OnlineLinear { scores: s, k, epsilon: config.epsilon },
            Mode::OnlineRatio => Selector::OnlineRatio { scores: s, k, alpha: config.alpha },
            Mode::BaselineWeighted => Selector::Weighted(weighted_sampling_baseline(&scores)?),
            Mode::BaselineUniform => Selector::Uniform { n: s.len(), k },
        })
    }

    /// Positions selected in one trial.
    pub(crate) fn draw(&self, rng: &mut TrialRng) -> Result<Vec<usize>> {
        match self {
            Selector::Fixed(p) => draw_indices(p, rng),
            Selector::OnlineLinear { scores, k, epsilon } => {
                let mut state = LinearGroupState::new(*k, *epsilon)?;
                for (i, &s) in scores.iter().enumerate() {
                    state.ingest(i, s, rng)?;
                }
                Ok(state.finalize(rng)?.members)
            }
            Selector::OnlineRatio { scores, k, alpha } => {
                let mut state = RatioStreamState::new(*k, *alpha)?;
                for (i, &s) in scores.iter().enumerate() {
                    state.ingest(i, s, rng)?;
                }
                Ok(state.finalize(rng)?.members)
            }
            Selector::Weighted(b) => Ok(b.sample(rng)),
            Selector::Uniform { n, k } => Ok(uniform_baseline(*n, *k, rng)?.members),
        }
    }
}

/// Runs the configured selector `config.trials` times, trial `t` seeded with
/// `config.seed + t`, and reports per-candidate frequencies.
pub fn estimate_marginals(config: &RunConfig) -> Result<EmpiricalMarginals> {
    config.validate()?;
    let records = config.load()?;
    estimate_for(config, &records)
}

pub(crate) fn estimate_for(config: &RunConfig, records: &[CandidateRecord]) -> Result<EmpiricalMarginals> {
    let selector = Selector::new(config, records)?;
    let counts = count_selections(records.len(), config.trials, config.seed, config.execution, |rng| {
        selector.draw(rng)
    })?;
    let frequencies: Vec<f64> = counts.iter().map(|&c| c as f64 / config.trials as f64).collect();
    Ok(EmpiricalMarginals {
        ids: records.iter().map(|r| r.id.clone()).collect(),
        half_widths: frequencies.iter().map(|&f| half_width(f, config.trials)).collect(),
        frequencies,
        trials: config.trials,
    })
}

/// Replays trial 0 of a streaming mode, recording every arrival, and
/// returns the trace with the selected positions. Each step also checks the
/// state machine's invariants.
pub(crate) fn trace_stream(config: &RunConfig, records: &[CandidateRecord]) -> Result<(Vec<TraceEvent>, Vec<usize>, usize)> {
    let mut rng = trial_rng(config.seed, 0);
    let mut events = Vec::with_capacity(records.len());
    let mut record = |step: usize, decisions: Vec<StreamDecision<usize>>, pending: usize| {
        let r = &records[step];
        events.push(TraceEvent {
            step,
            id: r.id.clone(),
            score: r.score,
            rejected: decisions
                .into_iter()
                .filter(|d| d.verdict == Verdict::Rejected)
                .map(|d| records[d.id].id.clone())
                .collect(),
            pending,
        });
    };
    match config.mode {
        Mode::OnlineLinear => {
            let mut state = LinearGroupState::new(config.k, config.epsilon)?;
            for (i, r) in records.iter().enumerate() {
                let decisions = state.ingest(i, r.score, &mut rng)?;
                state.check_invariants()?;
                record(i, decisions, state.pending_count());
            }
            let bound = state.pending_bound();
            Ok((events, state.finalize(&mut rng)?.members, bound))
        }
        Mode::OnlineRatio => {
            let mut state = RatioStreamState::new(config.k, config.alpha)?;
            for (i, r) in records.iter().enumerate() {
                let decisions = state.ingest(i, r.score, &mut rng)?;
                state.check_invariants()?;
                record(i, decisions, state.pending_count());
            }
            let bound = state.pending_bound();
            Ok((events, state.finalize(&mut rng)?.members, bound))
        }
        _ => Ok((Vec::new(), Vec::new(), 0)),
    }
}
