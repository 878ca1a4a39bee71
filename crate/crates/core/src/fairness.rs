//! Utilities and fairness checks over a marginal vector.
//!
//! Everything here works from score differences only: a marginal vector is
//! fairness-preserving when `|p_i − p_j| ≤ |s_i − s_j|` for every pair.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn same_len(p: &[f64], s: &[f64]) -> Result<()> {
    if p.len() != s.len() {
        return Err(Error::invalid(format!(
            "{} marginals for {} scores",
            p.len(),
            s.len()
        )));
    }
    Ok(())
}

/// Expected sum of member scores, `Σ p_i·s_i`.
pub fn linear_utility(p: &[f64], s: &[f64]) -> Result<f64> {
    same_len(p, s)?;
    Ok(p.iter().zip(s).map(|(p, s)| p * s).sum())
}

/// `min p_i / s_i` over candidates with a positive score; `+∞` if there
/// are none.
pub fn maxmin_utility(p: &[f64], s: &[f64]) -> Result<f64> {
    same_len(p, s)?;
    Ok(p.iter()
        .zip(s)
        .filter(|(_, &s)| s > 0.0)
        .map(|(p, s)| p / s)
        .fold(f64::INFINITY, f64::min))
}

/// A per-candidate utility vector with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityVector(pub Vec<f64>);

/// Worst ratio `Σ p_i u_i / Σ s_i u_i` over the basis vectors and `trials`
/// random utility vectors. Vectors with `Σ s_i u_i = 0` are skipped.
///
/// The minimum is always attained at a basis vector, so the result equals
/// [`maxmin_utility`].
pub fn worst_case_ratio<R: Rng + ?Sized>(
    p: &[f64],
    s: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<(f64, UtilityVector)> {
    same_len(p, s)?;
    if s.iter().all(|&x| x <= 0.0) {
        return Err(Error::invalid("ratio utility is undefined for all-zero scores"));
    }
    let n = p.len();
    let mut best = f64::INFINITY;
    let mut argmin = vec![0.0; n];
    for j in (0..n).filter(|&j| s[j] > 0.0) {
        let ratio = p[j] / s[j];
        if ratio < best {
            best = ratio;
            argmin = vec![0.0; n];
            argmin[j] = 1.0;
        }
    }
    let mut u = vec![0.0; n];
    for _ in 0..trials {
        for x in u.iter_mut() {
            *x = rng.random::<f64>();
        }
        let den: f64 = s.iter().zip(&u).map(|(s, u)| s * u).sum();
        if den <= 0.0 {
            continue;
        }
        let num: f64 = p.iter().zip(&u).map(|(p, u)| p * u).sum();
        let ratio = num / den;
        if ratio < best {
            best = ratio;
            argmin.copy_from_slice(&u);
        }
    }
    Ok((best, UtilityVector(argmin)))
}

/// Outcome of a pairwise fairness scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    /// Largest `|p_i − p_j| − |s_i − s_j|` over all pairs `i ≠ j`.
    pub max_violation: f64,
    /// The pair attaining `max_violation` when it is positive.
    pub violating_pair: Option<(usize, usize)>,
    /// Smallest slack `ε′ ≥ 0` for which every pair satisfies
    /// `|p_i − p_j| ≤ |s_i − s_j| + ε′`.
    pub epsilon_satisfied: f64,
}

impl FairnessReport {
    pub fn holds_within(&self, slack: f64) -> bool {
        self.max_violation <= slack
    }
}

/// Scans all pairs for the largest fairness violation.
pub fn check_fairness(p: &[f64], s: &[f64]) -> Result<FairnessReport> {
    same_len(p, s)?;
    let n = p.len();
    let mut worst = if n < 2 { 0.0 } else { f64::NEG_INFINITY };
    let mut pair = (0, 0);
    for i in 0..n {
        for j in i + 1..n {
            let v = (p[i] - p[j]).abs() - (s[i] - s[j]).abs();
            if v > worst {
                worst = v;
                pair = (i, j);
            }
        }
    }
    Ok(FairnessReport {
        max_violation: worst,
        violating_pair: (worst > 0.0).then_some(pair),
        epsilon_satisfied: worst.max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const FOUR_S: [f64; 4] = [0.1, 0.3, 0.6, 0.9];
    const FOUR_P: [f64; 4] = [0.125, 0.325, 0.625, 0.925];
    const THREE_S: [f64; 3] = [0.5, 0.5, 1.0];
    const THREE_WEIGHTED: [f64; 3] = [5.0 / 8.0, 5.0 / 8.0, 3.0 / 4.0];

    #[test]
    fn linear_utility_examples() {
        assert!((linear_utility(&FOUR_P, &FOUR_S).unwrap() - 1.3175).abs() < 1e-12);
        let s = [0.2, 0.4, 0.7];
        let sq: f64 = s.iter().map(|x| x * x).sum();
        assert!((linear_utility(&s, &s).unwrap() - sq).abs() < 1e-15);
        assert!((linear_utility(&THREE_WEIGHTED, &THREE_S).unwrap() - 11.0 / 8.0).abs() < 1e-12);
        assert!(linear_utility(&[0.1], &THREE_S).is_err());
    }

    #[test]
    fn maxmin_utility_examples() {
        assert_eq!(maxmin_utility(&[0.5, 0.5, 1.0], &THREE_S).unwrap(), 1.0);
        assert!((maxmin_utility(&THREE_WEIGHTED, &THREE_S).unwrap() - 0.75).abs() < 1e-12);
        let s = [0.2, 0.4, 0.8];
        let total: f64 = s.iter().sum();
        let p: Vec<f64> = s.iter().map(|x| x * 2.0 / total).collect();
        assert!((maxmin_utility(&p, &s).unwrap() - 2.0 / total).abs() < 1e-12);
        assert_eq!(maxmin_utility(&[0.5, 0.5], &[0.0, 0.0]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn worst_case_ratio_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (r, _) = worst_case_ratio(&THREE_S, &THREE_S, 1000, &mut rng).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        let (r, u) = worst_case_ratio(&THREE_WEIGHTED, &THREE_S, 1000, &mut rng).unwrap();
        assert!((r - 0.75).abs() < 1e-12);
        assert_eq!(u.0, vec![0.0, 0.0, 1.0]);

        assert!(worst_case_ratio(&[0.5], &[0.0], 10, &mut rng).is_err());
    }

    #[test]
    fn fairness_examples() {
        let report = check_fairness(&FOUR_P, &FOUR_S).unwrap();
        assert!(report.max_violation <= 1e-12);
        assert!(report.epsilon_satisfied <= 1e-12);

        let uniform = [0.5; 4];
        let report = check_fairness(&uniform, &FOUR_S).unwrap();
        assert!(report.max_violation <= 0.0);
        assert_eq!(report.violating_pair, None);

        let report = check_fairness(&[0.0, 1.0], &[0.5, 0.6]).unwrap();
        assert!((report.max_violation - 0.9).abs() < 1e-12);
        assert_eq!(report.violating_pair, Some((0, 1)));
    }

    proptest! {
        #[test]
        fn basis_minimum_equals_maxmin(
            pairs in prop::collection::vec((0.0f64..=1.0, 0.01f64..=1.0), 1..7),
            seed in any::<u64>(),
        ) {
            let (p, s): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let exact = maxmin_utility(&p, &s).unwrap();
            let (sampled, _) = worst_case_ratio(&p, &s, 200, &mut rng).unwrap();
            prop_assert!((sampled - exact).abs() <= 1e-9);
        }

        #[test]
        fn checker_is_permutation_invariant(
            pairs in prop::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..8),
            rot in 0usize..8,
        ) {
            let (p, s): (Vec<f64>, Vec<f64>) = pairs.iter().cloned().unzip();
            let mut q = p.clone();
            let mut t = s.clone();
            let r = rot % p.len();
            q.rotate_left(r);
            t.rotate_left(r);
            q.reverse();
            t.reverse();
            let a = check_fairness(&p, &s).unwrap();
            let b = check_fairness(&q, &t).unwrap();
            prop_assert!((a.max_violation - b.max_violation).abs() < 1e-15);
            prop_assert!(a.max_violation <= a.epsilon_satisfied + 1e-12);
        }
    }
}
