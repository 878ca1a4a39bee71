//! Seeded synthetic score streams.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::candidate::{check_score, CandidateRecord};
use crate::error::{Error, Result};
use crate::exec::trial_rng;
use crate::online_linear::group_count;

/// Offset applied around bucket edges by the adversarial generator.
pub const BOUNDARY_OFFSET: f64 = 1e-13;

/// Score distribution for [`generate_stream`].
///
/// Textual forms: `uniform01`, `beta(a,b)`, `two-point{x:c,y:d}` and
/// `adversarial-boundary(eps)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    Uniform01,
    Beta { a: f64, b: f64 },
    /// Emits `count` copies of each score in turn, cycling through the pattern.
    TwoPoint([(f64, usize); 2]),
    /// Scores at `gε ± 1e-13` for random buckets `g`.
    AdversarialBoundary { epsilon: f64 },
}

impl GeneratorSpec {
    /// Stream length used when a generator string does not name one.
    pub fn default_len(&self) -> usize {
        match self {
            GeneratorSpec::TwoPoint(pattern) => pattern.iter().map(|(_, c)| c).sum(),
            _ => 100,
        }
    }
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad {what} {text:?} in generator spec")))
}

fn args<'a>(text: &'a str, open: char, close: char) -> Option<&'a str> {
    text.strip_prefix(open)?.strip_suffix(close)
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let spec = if text == "uniform01" {
            GeneratorSpec::Uniform01
        } else if let Some(rest) = text.strip_prefix("beta").and_then(|r| args(r, '(', ')')) {
            let (a, b) = rest
                .split_once(',')
                .ok_or_else(|| Error::invalid("beta needs two parameters"))?;
            GeneratorSpec::Beta {
                a: parse_f64(a, "beta parameter")?,
                b: parse_f64(b, "beta parameter")?,
            }
        } else if let Some(rest) = text.strip_prefix("two-point").and_then(|r| args(r, '{', '}')) {
            let mut points = Vec::new();
            for part in rest.split(',') {
                let (score, count) = part
                    .split_once(':')
                    .ok_or_else(|| Error::invalid(format!("expected score:count, got {part:?}")))?;
                let count: usize = count
                    .trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad count {count:?}")))?;
                points.push((parse_f64(score, "score")?, count));
            }
            let pattern: [(f64, usize); 2] = points
                .try_into()
                .map_err(|_| Error::invalid("two-point needs exactly two score:count entries"))?;
            GeneratorSpec::TwoPoint(pattern)
        } else if let Some(rest) = text.strip_prefix("adversarial-boundary").and_then(|r| args(r, '(', ')')) {
            GeneratorSpec::AdversarialBoundary {
                epsilon: parse_f64(rest, "epsilon")?,
            }
        } else {
            return Err(Error::invalid(format!("unknown generator {text:?}")));
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorSpec::Uniform01 => write!(f, "uniform01"),
            GeneratorSpec::Beta { a, b } => write!(f, "beta({a},{b})"),
            GeneratorSpec::TwoPoint([(x, c), (y, d)]) => write!(f, "two-point{{{x}:{c},{y}:{d}}}"),
            GeneratorSpec::AdversarialBoundary { epsilon } => write!(f, "adversarial-boundary({epsilon})"),
        }
    }
}

impl Serialize for GeneratorSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GeneratorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

impl GeneratorSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            GeneratorSpec::Uniform01 => Ok(()),
            GeneratorSpec::Beta { a, b } => {
                if a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("beta parameters must be positive, got ({a},{b})")))
                }
            }
            GeneratorSpec::TwoPoint(pattern) => {
                for (score, _) in pattern {
                    check_score(score)?;
                }
                if pattern.iter().all(|(_, c)| *c == 0) {
                    return Err(Error::invalid("two-point pattern is empty"));
                }
                Ok(())
            }
            GeneratorSpec::AdversarialBoundary { epsilon } => {
                if epsilon > 0.0 && epsilon <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("epsilon must lie in (0, 1], got {epsilon}")))
                }
            }
        }
    }
}

/// Generates `n` records with ids `"1"..="n"`. Deterministic in `(spec, n, seed)`.
pub fn generate_stream(spec: &GeneratorSpec, n: usize, seed: u64) -> Result<Vec<CandidateRecord>> {
    if n == 0 {
        return Err(Error::invalid("cannot generate an empty stream"));
    }
    spec.validate()?;
    let mut rng = trial_rng(seed, 0);
    let scores: Vec<f64> = match spec {
        GeneratorSpec::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
        GeneratorSpec::Beta { a, b } => {
            let beta = Beta::new(*a, *b).map_err(|e| Error::invalid(e.to_string()))?;
            (0..n).map(|_| beta.sample(&mut rng).clamp(0.0, 1.0)).collect()
        }
        GeneratorSpec::TwoPoint(pattern) => pattern
            .iter()
            .flat_map(|&(score, count)| std::iter::repeat_n(score, count))
            .cycle()
            .take(n)
            .collect(),
        GeneratorSpec::AdversarialBoundary { epsilon } => {
            let m = group_count(*epsilon);
            (0..n)
                .map(|_| {
                    let edge = (rng.random_range(0..=m) as f64 * epsilon).min(1.0);
                    let offset = if rng.random::<bool>() { BOUNDARY_OFFSET } else { -BOUNDARY_OFFSET };
                    (edge + offset).clamp(0.0, 1.0)
                })
                .collect()
        }
    };
    Ok(scores
        .into_iter()
        .enumerate()
        .map(|(i, s)| CandidateRecord::new((i + 1).to_string(), s))
        .collect())
}

/// Splits `"<spec>:<n>"` into a generator and a stream length. Without a
/// length suffix the generator's [`GeneratorSpec::default_len`] is used.
pub fn parse_gen_arg(text: &str) -> Result<(GeneratorSpec, usize)> {
    let text = text.trim();
    let ends_spec = text.ends_with(')') || text.ends_with('}') || !text.contains(':');
    if ends_spec {
        let spec: GeneratorSpec = text.parse()?;
        let n = spec.default_len();
        return Ok((spec, n));
    }
    let (spec, n) = text.rsplit_once(':').expect("checked above");
    let n = n
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("bad stream length {n:?}")))?;
    Ok((spec.parse()?, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online_linear::group_of;

    #[test]
    fn two_point_reproduces_three_scores() {
        let spec: GeneratorSpec = "two-point{0.5:2, 1.0:1}".parse().unwrap();
        let records = generate_stream(&spec, 3, 0).unwrap();
        let scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        assert_eq!(scores, vec![0.5, 0.5, 1.0]);
        assert_eq!(records[2].id, "3");
    }

    #[test]
    fn empty_stream_is_an_error() {
        assert!(generate_stream(&GeneratorSpec::Uniform01, 0, 1).is_err());
    }

    #[test]
    fn beta_is_deterministic() {
        let spec: GeneratorSpec = "beta(2,5)".parse().unwrap();
        let a = serde_json::to_string(&generate_stream(&spec, 100, 7).unwrap()).unwrap();
        let b = serde_json::to_string(&generate_stream(&spec, 100, 7).unwrap()).unwrap();
        assert_eq!(a, b);
        let c = serde_json::to_string(&generate_stream(&spec, 100, 8).unwrap()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn boundary_scores_hug_edges() {
        let eps = 0.1;
        let spec = GeneratorSpec::AdversarialBoundary { epsilon: eps };
        for r in generate_stream(&spec, 500, 3).unwrap() {
            let nearest = (r.score / eps).round() * eps;
            assert!((r.score - nearest).abs() <= 2.0 * BOUNDARY_OFFSET);
            // Within the snap window the bucket is the edge's own; just above
            // zero it is the first bucket.
            let g = group_of(r.score, eps);
            let expected = match (nearest / eps).round() as usize {
                0 if r.score > 0.0 => 1,
                e => e,
            };
            assert_eq!(g, expected, "score {}", r.score);
        }
    }

    #[test]
    fn parse_round_trips() {
        for text in ["uniform01", "beta(2,5)", "two-point{0.5:2,1:1}", "adversarial-boundary(0.25)"] {
            let spec: GeneratorSpec = text.parse().unwrap();
            assert_eq!(spec.to_string().parse::<GeneratorSpec>().unwrap(), spec);
        }
        assert!("beta(0,1)".parse::<GeneratorSpec>().is_err());
        assert!("two-point{0.5:2}".parse::<GeneratorSpec>().is_err());
        assert!("gaussian".parse::<GeneratorSpec>().is_err());
    }

    #[test]
    fn gen_arg_length_suffix() {
        assert_eq!(parse_gen_arg("uniform01:20").unwrap().1, 20);
        assert_eq!(parse_gen_arg("beta(2,5):7").unwrap(), (GeneratorSpec::Beta { a: 2.0, b: 5.0 }, 7));
        assert_eq!(parse_gen_arg("two-point{0.5:2,1.0:1}").unwrap().1, 3);
        assert_eq!(parse_gen_arg("uniform01").unwrap().1, 100);
        assert!(parse_gen_arg("uniform01:x").is_err());
    }
}
