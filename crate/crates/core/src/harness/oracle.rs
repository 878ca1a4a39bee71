//! Randomized search for feasible marginal vectors that beat a candidate
//! solution. Used as an independent check on the closed-form optima.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::{check_fairness, linear_utility, maxmin_utility};
use crate::offline::Objective;
use crate::water_fill::{apply_down, apply_up, shift_down, shift_up};

/// Smallest gain reported as an improvement.
pub const MIN_IMPROVEMENT: f64 = 1e-6;
/// Number of points on the one-parameter family scan.
pub const GRID_POINTS: usize = 10_000;
const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum OracleVerdict {
    NoImprovementFound,
    ImprovedBy { delta: f64, witness: Vec<f64> },
}

impl OracleVerdict {
    pub fn improved(&self) -> bool {
        matches!(self, OracleVerdict::ImprovedBy { .. })
    }
}

fn objective_value(objective: Objective, p: &[f64], s: &[f64]) -> Result<f64> {
    match objective {
        Objective::Linear => linear_utility(p, s),
        Objective::Maxmin => maxmin_utility(p, s),
    }
}

fn check_feasible(p: &[f64], s: &[f64], k: usize) -> Result<()> {
    let total: f64 = p.iter().sum();
    if (total - k as f64).abs() > FEASIBILITY_TOL {
        return Err(Error::invalid(format!("marginals sum to {total}, expected {k}")));
    }
    if let Some(x) = p.iter().find(|&&x| !(-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&x)) {
        return Err(Error::invalid(format!("marginal {x} outside [0, 1]")));
    }
    let report = check_fairness(p, s)?;
    if !report.holds_within(FEASIBILITY_TOL) {
        return Err(Error::invalid(format!(
            "marginals violate fairness by {} at {:?}",
            report.max_violation, report.violating_pair
        )));
    }
    Ok(())
}

/// Largest `δ ≥ 0` such that moving `δ` of probability from `i` to `j`
/// keeps every entry in `[0, 1]` and every pair within its score gap.
fn transfer_room(p: &[f64], s: &[f64], i: usize, j: usize) -> f64 {
    let mut room = p[i].min(1.0 - p[j]);
    room = room.min((p[i] - p[j] + (s[i] - s[j]).abs()) / 2.0);
    for l in 0..p.len() {
        if l == i || l == j {
            continue;
        }
        room = room.min(p[i] - p[l] + (s[i] - s[l]).abs());
        room = room.min(p[l] + (s[j] - s[l]).abs() - p[j]);
    }
    room.max(0.0)
}

/// Fairness-preserving vector obtained by scaling the scores by `t` and
/// water-filling the result to sum `k`.
fn scaled_fill(s: &[f64], t: f64, k: usize) -> Result<Vec<f64>> {
    let scaled: Vec<f64> = s.iter().map(|x| x * t).collect();
    let weights = vec![1.0; s.len()];
    let target = k as f64;
    let sum: f64 = scaled.iter().sum();
    Ok(if sum < target {
        apply_up(&scaled, shift_up(&scaled, &weights, target)?)
    } else {
        apply_down(&scaled, shift_down(&scaled, &weights, target)?)
    })
}

/// Searches for a feasible vector whose `objective` exceeds that of
/// `marginals` by more than [`MIN_IMPROVEMENT`].
///
/// Two move families are tried: `attempts` random pairwise transfers, each
/// sized within the exact feasibility slack, and a scan over
/// [`GRID_POINTS`] vectors `fill_k(t·s)` for `t ∈ [0, 1]`. Every candidate is
/// re-checked for feasibility before it can count.
pub fn perturbation_oracle<R: Rng + ?Sized>(
    scores: &[f64],
    marginals: &[f64],
    k: usize,
    objective: Objective,
    attempts: usize,
    rng: &mut R,
) -> Result<OracleVerdict> {
    let (s, p) = (scores, marginals);
    check_feasible(p, s, k)?;
    let base = objective_value(objective, p, s)?;
    if base.is_infinite() {
        return Ok(OracleVerdict::NoImprovementFound);
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    let consider = |q: Vec<f64>, best: &mut Option<(f64, Vec<f64>)>| -> Result<()> {
        let gain = objective_value(objective, &q, s)? - base;
        if gain > MIN_IMPROVEMENT
            && best.as_ref().is_none_or(|(g, _)| gain > *g)
            && check_feasible(&q, s, k).is_ok()
        {
            *best = Some((gain, q));
        }
        Ok(())
    };

    let n = p.len();
    if n >= 2 {
        let mut q = p.to_vec();
        for _ in 0..attempts {
            let i = rng.random_range(0..n);
            let j = (i + rng.random_range(1..n)) % n;
            let room = transfer_room(p, s, i, j);
            if room <= 0.0 {
                continue;
            }
            let delta = if rng.random::<bool>() { room } else { room * rng.random::<f64>() };
            q[i] = p[i] - delta;
            q[j] = p[j] + delta;
            let gain = match objective {
                Objective::Linear => delta * (s[j] - s[i]),
                Objective::Maxmin => objective_value(objective, &q, s)? - base,
            };
            if gain > MIN_IMPROVEMENT {
                consider(q.clone(), &mut best)?;
            }
            q[i] = p[i];
            q[j] = p[j];
        }
    }

    for step in 0..=GRID_POINTS {
        let t = step as f64 / GRID_POINTS as f64;
        consider(scaled_fill(s, t, k)?, &mut best)?;
    }

    Ok(match best {
        Some((delta, witness)) => OracleVerdict::ImprovedBy { delta, witness },
        None => OracleVerdict::NoImprovementFound,
    })
}
