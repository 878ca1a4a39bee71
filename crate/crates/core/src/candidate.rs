use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A candidate id with the upstream classifier's score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: String,
    pub score: f64,
}

impl CandidateRecord {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        CandidateRecord {
            id: id.into(),
            score,
        }
    }
}

pub(crate) fn check_score(score: f64) -> Result<()> {
    if score.is_nan() {
        return Err(Error::invalid("score is NaN"));
    }
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::invalid(format!("score {score} outside [0, 1]")));
    }
    Ok(())
}

/// Scores for a full candidate pool plus the cohort size.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreVector {
    ids: Vec<String>,
    scores: Vec<f64>,
    k: usize,
}

impl ScoreVector {
    pub fn new(records: &[CandidateRecord], k: usize) -> Result<Self> {
        let ids = records.iter().map(|r| r.id.clone()).collect();
        let scores = records.iter().map(|r| r.score).collect();
        Self::from_parts(ids, scores, k)
    }

    /// Scores with ids `"1"`, `"2"`, ... in order.
    pub fn from_scores(scores: &[f64], k: usize) -> Result<Self> {
        let ids = (1..=scores.len()).map(|i| i.to_string()).collect();
        Self::from_parts(ids, scores.to_vec(), k)
    }

    fn from_parts(ids: Vec<String>, scores: Vec<f64>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("cohort size k must be positive"));
        }
        if k > scores.len() {
            return Err(Error::CohortTooLarge { k, n: scores.len() });
        }
        for (id, &s) in ids.iter().zip(&scores) {
            check_score(s).map_err(|e| Error::invalid(format!("candidate {id}: {e}")))?;
        }
        Ok(ScoreVector { ids, scores, k })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn records(&self) -> Vec<CandidateRecord> {
        self.ids
            .iter()
            .zip(&self.scores)
            .map(|(id, &s)| CandidateRecord::new(id.clone(), s))
            .collect()
    }
}

/// How a marginal vector was obtained from the scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdjustMode {
    ShiftUp,
    ShiftDown,
    ScaleDown,
    Identity,
}

/// Per-candidate selection probabilities summing to `k`.
///
/// `shift` is the additive constant for the shift modes and the
/// multiplicative factor for [`AdjustMode::ScaleDown`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalVector {
    pub ids: Vec<String>,
    pub probs: Vec<f64>,
    pub shift: f64,
    pub mode: AdjustMode,
    pub k: usize,
}

impl MarginalVector {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }
}

/// The realized cohort.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cohort<T = String> {
    pub members: Vec<T>,
}

impl<T> Cohort<T> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
