//! Closed-form water-filling.
//!
//! Raising every value by a common shift `b` and clipping at 1 (or lowering
//! and clipping at 0) until a target sum is met. The shift is found by
//! sorting once and solving the piecewise-linear sum equation segment by
//! segment, so the cost is `O(n log n)` and the result does not depend on
//! any iteration order. Entries may carry integer weights, which lets the
//! streaming algorithm fill a histogram of score buckets directly.

use crate::error::{Error, Result};
use crate::rounding::TOLERANCE;

/// Returns `min(v_i + b, 1)` for the shift `b ≥ 0` that makes the entries
/// sum to `target`, together with `b`.
pub fn water_fill_up(values: &[f64], target: f64) -> Result<(Vec<f64>, f64)> {
    let weights = vec![1.0; values.len()];
    let b = shift_up(values, &weights, target)?;
    Ok((apply_up(values, b), b))
}

/// Returns `max(v_i − b, 0)` for the shift `b ≥ 0` that makes the entries
/// sum to `target`, together with `b`.
pub fn water_fill_down(values: &[f64], target: f64) -> Result<(Vec<f64>, f64)> {
    let weights = vec![1.0; values.len()];
    let b = shift_down(values, &weights, target)?;
    Ok((apply_down(values, b), b))
}

pub(crate) fn apply_up(values: &[f64], b: f64) -> Vec<f64> {
    values.iter().map(|&v| (v + b).min(1.0)).collect()
}

pub(crate) fn apply_down(values: &[f64], b: f64) -> Vec<f64> {
    values.iter().map(|&v| (v - b).max(0.0)).collect()
}

/// Shift `b ≥ 0` with `Σ w_i·min(v_i + b, 1) = target`.
pub(crate) fn shift_up(values: &[f64], weights: &[f64], target: f64) -> Result<f64> {
    debug_assert_eq!(values.len(), weights.len());
    let mut live: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    let capacity: f64 = live.iter().map(|(_, w)| w).sum();
    let mass: f64 = live.iter().map(|(v, w)| v * w).sum();
    if !(target.is_finite()) || target > capacity + TOLERANCE {
        return Err(Error::invalid(format!(
            "target {target} exceeds the total capacity {capacity}"
        )));
    }
    if target < mass - TOLERANCE {
        return Err(Error::invalid(format!(
            "target {target} is below the current sum {mass}; fill down instead"
        )));
    }
    if live.is_empty() {
        return Ok(0.0);
    }
    // Descending: the first `j` entries are the ones clipped at 1.
    live.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut clipped_weight = 0.0;
    let mut free_weight = capacity;
    let mut free_mass = mass;
    for j in 0..live.len() {
        let b = (target - clipped_weight - free_mass) / free_weight;
        let clipped_ok = j == 0 || live[j - 1].0 + b >= 1.0 - TOLERANCE;
        if clipped_ok && live[j].0 + b <= 1.0 + TOLERANCE {
            return Ok(b.max(0.0));
        }
        let (v, w) = live[j];
        clipped_weight += w;
        free_weight -= w;
        free_mass -= v * w;
    }
    // Every entry saturates.
    let lowest = live.last().map(|(v, _)| *v).unwrap_or(0.0);
    Ok((1.0 - lowest).max(0.0))
}

/// Shift `b ≥ 0` with `Σ w_i·max(v_i − b, 0) = target`.
pub(crate) fn shift_down(values: &[f64], weights: &[f64], target: f64) -> Result<f64> {
    debug_assert_eq!(values.len(), weights.len());
    let mut live: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|(&v, &w)| (v, w))
        .collect();
    let capacity: f64 = live.iter().map(|(_, w)| w).sum();
    let mass: f64 = live.iter().map(|(v, w)| v * w).sum();
    if !(target.is_finite()) || target < -TOLERANCE {
        return Err(Error::invalid(format!("target {target} is negative")));
    }
    if target > mass + TOLERANCE {
        return Err(Error::invalid(format!(
            "target {target} exceeds the current sum {mass}; fill up instead"
        )));
    }
    if live.is_empty() {
        return Ok(0.0);
    }
    let highest = live.iter().map(|(v, _)| *v).fold(0.0, f64::max);
    if target <= TOLERANCE {
        return Ok(highest);
    }
    // Ascending: the first `j` entries are the ones clipped at 0.
    live.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut free_weight = capacity;
    let mut free_mass = mass;
    for j in 0..live.len() {
        let b = (free_mass - target) / free_weight;
        let clipped_ok = j == 0 || live[j - 1].0 - b <= TOLERANCE;
        if clipped_ok && live[j].0 - b >= -TOLERANCE {
            return Ok(b.max(0.0));
        }
        let (v, w) = live[j];
        free_weight -= w;
        free_mass -= v * w;
    }
    Ok(highest)
}

#[cfg(test)]
pub(crate) mod loop_oracle {
    //! Literal redistribution loops: set the offender to the bound and spread
    //! its excess evenly over the entries that are still inside the bounds.
    //! Kept independent of the closed form above.

    pub fn fill_up(values: &[f64], target: f64) -> Vec<f64> {
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let c = (target - sum) / n;
        let mut p: Vec<f64> = values.iter().map(|v| v + c).collect();
        for _ in 0..10 * values.len() + 10 {
            let Some(i) = p.iter().position(|&x| x > 1.0 + 1e-15) else {
                break;
            };
            let below: Vec<usize> = (0..p.len()).filter(|&j| p[j] < 1.0).collect();
            let excess = p[i] - 1.0;
            for &j in &below {
                p[j] += excess / below.len() as f64;
            }
            p[i] = 1.0;
        }
        p
    }

    pub fn fill_down(values: &[f64], target: f64) -> Vec<f64> {
        let n = values.len() as f64;
        let sum: f64 = values.iter().sum();
        let c = (sum - target) / n;
        let mut p: Vec<f64> = values.iter().map(|v| v - c).collect();
        for _ in 0..10 * values.len() + 10 {
            let Some(i) = p.iter().position(|&x| x < -1e-15) else {
                break;
            };
            let above: Vec<usize> = (0..p.len()).filter(|&j| p[j] > 0.0).collect();
            let deficit = p[i];
            for &j in &above {
                p[j] += deficit / above.len() as f64;
            }
            p[i] = 0.0;
        }
        p
    }
}
