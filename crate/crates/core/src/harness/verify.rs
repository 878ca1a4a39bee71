//! Self-checks behind the `verify` command.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::Serialize;

use super::report::analytic_report;
use super::{monte_carlo::trace_stream, RunConfig};
use crate::error::{Error, Result};
use crate::exec::trial_rng;
use crate::fairness::{maxmin_utility, worst_case_ratio};
use crate::harness::oracle::OracleVerdict;
use crate::rounding::{dependent_round, RoundingInput, RoundingOutput, TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum VerifyTarget {
    Rounding,
    Fairness,
    Invariants,
    Oracle,
    WorstCase,
    All,
}

impl VerifyTarget {
    const NAMES: [(VerifyTarget, &'static str); 6] = [
        (VerifyTarget::Rounding, "rounding"),
        (VerifyTarget::Fairness, "fairness"),
        (VerifyTarget::Invariants, "invariants"),
        (VerifyTarget::Oracle, "oracle"),
        (VerifyTarget::WorstCase, "worst-case"),
        (VerifyTarget::All, "all"),
    ];
}

impl fmt::Display for VerifyTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Self::NAMES.iter().find(|(t, _)| t == self).map(|(_, n)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for VerifyTarget {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .find(|(_, n)| *n == text)
            .map(|(t, _)| *t)
            .ok_or_else(|| Error::invalid(format!("unknown verify target {text:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOutcome {
    pub schema: u32,
    pub config: RunConfig,
    pub target: VerifyTarget,
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn check(name: &str, passed: bool, detail: impl Into<String>) -> Check {
    Check { name: name.into(), passed, detail: detail.into() }
}

/// Confirms that a rounding output has the required shape: the total is
/// unchanged, and every entry is `0` or the cap except at most one.
pub fn rounding_shape_error(input: &RoundingInput, output: &RoundingOutput) -> Option<String> {
    let cap = input.cap;
    let total_in = input.total();
    let total_out: f64 = output.values.iter().sum();
    if (total_in - total_out).abs() > TOLERANCE {
        return Some(format!("sum changed from {total_in} to {total_out}"));
    }
    let partial: Vec<usize> = (0..output.values.len())
        .filter(|&i| output.values[i] != 0.0 && output.values[i] != cap)
        .collect();
    if partial.len() > 1 {
        return Some(format!("entries {partial:?} are strictly between 0 and {cap}"));
    }
    let full = output.values.iter().filter(|&&v| v == cap).count();
    if full != (total_in / cap + TOLERANCE).floor() as usize {
        return Some(format!("{full} entries at the cap for total {total_in}"));
    }
    None
}

fn verify_rounding(config: &RunConfig) -> Result<Check> {
    let mut rng = trial_rng(config.seed, 0);
    for case in 0..config.trials {
        let cap = [1.0, 2.0, 5.0][rng.random_range(0..3)];
        let n = rng.random_range(1..=20);
        let values: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * cap).collect();
        let input = RoundingInput::new(values, cap)?;
        let output = dependent_round(&input, &mut rng)?;
        if let Some(e) = rounding_shape_error(&input, &output) {
            return Ok(check("rounding-shape", false, format!("case {case}: {e}")));
        }
    }
    Ok(check("rounding-shape", true, format!("{} random inputs", config.trials)))
}

fn run_checks(config: &RunConfig, target: VerifyTarget) -> Result<Vec<Check>> {
    use VerifyTarget::*;
    let wants = |t: VerifyTarget| target == t || target == All;
    let mut checks = Vec::new();
    if wants(Rounding) {
        checks.push(verify_rounding(config)?);
    }
    if target == Rounding {
        return Ok(checks);
    }

    let report = analytic_report(config)?;
    let p = report.marginals();
    let s: Vec<f64> = report.candidates.iter().map(|c| c.score).collect();

    if wants(Fairness) {
        let f = &report.fairness;
        let contract = f.contract_slack.map_or("none".to_string(), |t| format!("{t:e}"));
        let detail = format!("max violation {:e}, contract {contract}", f.report.max_violation);
        checks.push(check("fairness", f.satisfied.unwrap_or(true), detail));
    }
    if wants(Invariants) {
        let total: f64 = p.iter().sum();
        let shape_ok = (total - config.k as f64).abs() <= TOLERANCE
            && p.iter().all(|&x| (-TOLERANCE..=1.0 + TOLERANCE).contains(&x));
        checks.push(check("marginals-shape", shape_ok, format!("sum {total}")));
        if config.mode.is_streaming() {
            let records = config.load()?;
            match trace_stream(config, &records) {
                Ok((events, _, bound)) => {
                    let max = events.iter().skip(config.k.saturating_sub(1)).map(|e| e.pending).max().unwrap_or(0);
                    checks.push(check("state-invariants", true, format!("{} arrivals", events.len())));
                    checks.push(check("pending-bound", max <= bound, format!("max {max}, bound {bound}")));
                }
                Err(Error::Invariant(msg)) => checks.push(check("state-invariants", false, msg)),
                Err(e) => return Err(e),
            }
        }
    }
    if wants(Oracle) {
        for o in &report.oracle {
            let (passed, detail) = match (&o.verdict, &o.error) {
                (Some(OracleVerdict::NoImprovementFound), _) => (true, "no improvement found".to_string()),
                (Some(OracleVerdict::ImprovedBy { delta, .. }), _) => {
                    (config.mode.is_baseline(), format!("improved by {delta}"))
                }
                (None, Some(e)) => (config.mode.is_baseline(), e.clone()),
                (None, None) => (true, String::new()),
            };
            checks.push(check(&format!("oracle-{:?}", o.objective).to_lowercase(), passed, detail));
        }
    }
    if wants(WorstCase) && s.iter().any(|&x| x > 0.0) {
        let mut rng = trial_rng(config.seed, 1);
        let exact = maxmin_utility(&p, &s)?;
        let (sampled, _) = worst_case_ratio(&p, &s, config.trials.min(100_000) as usize, &mut rng)?;
        checks.push(check(
            "worst-case",
            (sampled - exact).abs() <= 1e-9,
            format!("basis minimum {exact}, sampled minimum {sampled}"),
        ));
    }
    Ok(checks)
}

/// Runs the self-checks for `target`. Failed checks are reported, not
/// returned as errors; invalid input still errors.
pub fn verify(config: &RunConfig, target: VerifyTarget) -> Result<VerifyOutcome> {
    config.validate()?;
    let checks = if target == VerifyTarget::Rounding {
        verify_rounding(config).map(|c| vec![c])?
    } else {
        run_checks(config, target)?
    };
    Ok(VerifyOutcome {
        schema: super::SCHEMA,
        config: config.clone(),
        target,
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{GeneratorSpec, Mode, Source};

    #[test]
    fn all_targets_pass_on_every_mode() {
        for mode in Mode::ALL {
            let spec = GeneratorSpec::Uniform01;
            let mut c = RunConfig::new(mode, 3, Source::Generated { spec, n: 12 });
            c.trials = 200;
            let out = verify(&c, VerifyTarget::All).unwrap();
            assert!(out.passed, "{mode}: {:?}", out.checks);
        }
    }

    #[test]
    fn shape_checker_catches_bad_outputs() {
        let input = RoundingInput::new(vec![0.5, 0.5, 0.4], 1.0).unwrap();
        let good = RoundingOutput { values: vec![1.0, 0.0, 0.4], remainder_index: Some(2) };
        assert_eq!(rounding_shape_error(&input, &good), None);
        let two_partial = RoundingOutput { values: vec![0.7, 0.3, 0.4], remainder_index: None };
        assert!(rounding_shape_error(&input, &two_partial).is_some());
        let lost_mass = RoundingOutput { values: vec![1.0, 0.0, 0.0], remainder_index: None };
        assert!(rounding_shape_error(&input, &lost_mass).is_some());
    }

    #[test]
    fn target_names() {
        for (t, n) in VerifyTarget::NAMES {
            assert_eq!(n.parse::<VerifyTarget>().unwrap(), t);
            assert_eq!(t.to_string(), n);
        }
        assert!("everything".parse::<VerifyTarget>().is_err());
    }
}
