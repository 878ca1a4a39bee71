//! Offline marginals for both utility models, and the cohort draw.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidate::{AdjustMode, Cohort, MarginalVector, ScoreVector};
use crate::error::{Error, Result};
use crate::rounding::{round_slice, TOLERANCE};
use crate::water_fill::{apply_down, apply_up, shift_down, shift_up};

/// Utility model a marginal vector is optimized for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Linear,
    Maxmin,
}

/// Linear-utility marginals over raw scores: shift all scores by a common
/// constant with clipping so that they sum to `k`.
pub fn linear_probs(scores: &[f64], k: usize) -> Result<(Vec<f64>, f64, AdjustMode)> {
    let target = k as f64;
    let sum: f64 = scores.iter().sum();
    let weights = vec![1.0; scores.len()];
    if sum < target {
        let b = shift_up(scores, &weights, target)?;
        Ok((apply_up(scores, b), b, AdjustMode::ShiftUp))
    } else if sum > target {
        let b = shift_down(scores, &weights, target)?;
        Ok((apply_down(scores, b), b, AdjustMode::ShiftDown))
    } else {
        Ok((scores.to_vec(), 0.0, AdjustMode::Identity))
    }
}

/// Maxmin-utility marginals over raw scores: additive water-filling when the
/// scores sum below `k`, proportional scaling otherwise.
pub fn ratio_probs(scores: &[f64], k: usize) -> Result<(Vec<f64>, f64, AdjustMode)> {
    let target = k as f64;
    let sum: f64 = scores.iter().sum();
    if sum < target {
        let b = shift_up(scores, &vec![1.0; scores.len()], target)?;
        Ok((apply_up(scores, b), b, AdjustMode::ShiftUp))
    } else if sum > target {
        let factor = target / sum;
        Ok((scores.iter().map(|s| s * factor).collect(), factor, AdjustMode::ScaleDown))
    } else {
        Ok((scores.to_vec(), 1.0, AdjustMode::Identity))
    }
}

fn wrap(scores: &ScoreVector, (probs, shift, mode): (Vec<f64>, f64, AdjustMode)) -> MarginalVector {
    MarginalVector {
        ids: scores.ids().to_vec(),
        probs,
        shift,
        mode,
        k: scores.k(),
    }
}

/// Marginals maximizing `Σ p_i s_i` among fairness-preserving solutions.
pub fn linear_marginals(scores: &ScoreVector) -> Result<MarginalVector> {
    Ok(wrap(scores, linear_probs(scores.scores(), scores.k())?))
}

/// Marginals maximizing `min p_i / s_i` among fairness-preserving solutions.
pub fn ratio_marginals(scores: &ScoreVector) -> Result<MarginalVector> {
    Ok(wrap(scores, ratio_probs(scores.scores(), scores.k())?))
}

pub fn marginals(scores: &ScoreVector, objective: Objective) -> Result<MarginalVector> {
    match objective {
        Objective::Linear => linear_marginals(scores),
        Objective::Maxmin => ratio_marginals(scores),
    }
}

/// Rounds `probs` (which must sum to an integer) and returns the positions
/// that came out as 1.
pub fn draw_indices<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let total: f64 = probs.iter().sum();
    if (total - total.round()).abs() > TOLERANCE {
        return Err(Error::invalid(format!("marginals sum to {total}, not an integer")));
    }
    let mut values = probs.to_vec();
    round_slice(&mut values, 1.0, rng)?;
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i)
        .collect())
}

/// Draws a cohort of exactly `k` ids with the given marginals.
pub fn select_cohort<R: Rng + ?Sized>(marginals: &MarginalVector, rng: &mut R) -> Result<Cohort> {
    if (marginals.total() - marginals.k as f64).abs() > TOLERANCE {
        return Err(Error::invalid(format!(
            "marginals sum to {}, expected k = {}",
            marginals.total(),
            marginals.k
        )));
    }
    let picked = draw_indices(&marginals.probs, rng)?;
    Ok(Cohort {
        members: picked.into_iter().map(|i| marginals.ids[i].clone()).collect(),
    })
}
