//! Experiment reports and the top-level `run` dispatch.

use std::io::Write;

use serde::Serialize;

use super::baseline::weighted_sampling_baseline;
use super::monte_carlo::{estimate_for, trace_stream, EmpiricalMarginals, Selector, TraceEvent};
use super::oracle::{perturbation_oracle, OracleVerdict};
use super::{Mode, RunConfig, SCHEMA};
use crate::candidate::{AdjustMode, CandidateRecord, Cohort, ScoreVector};
use crate::error::Result;
use crate::exec::trial_rng;
use crate::fairness::{check_fairness, linear_utility, maxmin_utility, FairnessReport};
use crate::offline::{linear_probs, ratio_probs, Objective};
use crate::online_linear::rounded_score;
use crate::rounding::TOLERANCE;

/// Largest pool on which reports run the perturbation oracle.
pub const ORACLE_MAX_N: usize = 64;
/// Random transfers tried per oracle check in reports.
pub const ORACLE_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateRow {
    pub id: String,
    pub score: f64,
    /// Closed-form selection probability.
    pub marginal: f64,
    pub frequency: Option<f64>,
    pub half_width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Utilities {
    pub linear: f64,
    /// `None` when no score is positive.
    pub maxmin: Option<f64>,
}

impl Utilities {
    fn of(p: &[f64], s: &[f64]) -> Result<Self> {
        let maxmin = maxmin_utility(p, s)?;
        Ok(Utilities {
            linear: linear_utility(p, s)?,
            maxmin: maxmin.is_finite().then_some(maxmin),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Adjustment {
    pub mode: AdjustMode,
    pub shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessCheck {
    #[serde(flatten)]
    pub report: FairnessReport,
    /// Slack the mode promises; `None` for baselines, which promise nothing.
    pub contract_slack: Option<f64>,
    pub satisfied: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendingTrace {
    pub counts: Vec<usize>,
    pub max: usize,
    pub bound: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub objective: Objective,
    pub verdict: Option<OracleVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetRow {
    pub members: Vec<String>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub config: RunConfig,
    pub n: usize,
    pub candidates: Vec<CandidateRow>,
    pub adjustment: Option<Adjustment>,
    /// Cohort drawn by trial 0.
    pub cohort: Vec<String>,
    pub utilities: Utilities,
    pub empirical_utilities: Option<Utilities>,
    pub fairness: FairnessCheck,
    /// Share of candidates whose frequency lies within its half-width of
    /// the closed-form marginal.
    pub coverage: Option<f64>,
    pub pending: Option<PendingTrace>,
    pub subsets: Option<Vec<SubsetRow>>,
    pub oracle: Vec<OracleCheck>,
}

impl ExperimentReport {
    pub fn marginals(&self) -> Vec<f64> {
        self.candidates.iter().map(|c| c.marginal).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

struct Analytic {
    probs: Vec<f64>,
    adjustment: Option<Adjustment>,
    subsets: Option<Vec<SubsetRow>>,
}

fn analytic(config: &RunConfig, records: &[CandidateRecord]) -> Result<Analytic> {
    let s: Vec<f64> = records.iter().map(|r| r.score).collect();
    let k = config.k;
    let adjusted = |(probs, shift, mode): (Vec<f64>, f64, AdjustMode)| Analytic {
        probs,
        adjustment: Some(Adjustment { mode, shift }),
        subsets: None,
    };
    Ok(match config.mode {
        Mode::OfflineLinear => adjusted(linear_probs(&s, k)?),
        Mode::OfflineRatio | Mode::OnlineRatio => adjusted(ratio_probs(&s, k)?),
        Mode::OnlineLinear => {
            let rounded: Vec<f64> = s.iter().map(|&x| rounded_score(x, config.epsilon)).collect();
            adjusted(linear_probs(&rounded, k)?)
        }
        Mode::BaselineWeighted => {
            let b = weighted_sampling_baseline(&ScoreVector::new(records, k)?)?;
            Analytic {
                subsets: Some(
                    b.subsets
                        .iter()
                        .map(|sp| SubsetRow {
                            members: sp.members.iter().map(|&i| records[i].id.clone()).collect(),
                            probability: sp.probability,
                        })
                        .collect(),
                ),
                probs: b.marginals.probs,
                adjustment: None,
            }
        }
        Mode::BaselineUniform => Analytic {
            probs: vec![k as f64 / s.len() as f64; s.len()],
            adjustment: None,
            subsets: None,
        },
    })
}

fn contract_slack(config: &RunConfig) -> Option<f64> {
    match config.mode {
        Mode::OnlineLinear => Some(config.epsilon + TOLERANCE),
        Mode::BaselineWeighted | Mode::BaselineUniform => None,
        _ => Some(TOLERANCE),
    }
}

fn oracle_checks(config: &RunConfig, p: &[f64], s: &[f64]) -> Vec<OracleCheck> {
    let objectives: &[Objective] = match config.mode {
        _ if s.len() > ORACLE_MAX_N => &[],
        Mode::OfflineLinear => &[Objective::Linear],
        Mode::OfflineRatio => &[Objective::Maxmin],
        Mode::BaselineWeighted => &[Objective::Linear, Objective::Maxmin],
        _ => &[],
    };
    objectives
        .iter()
        .map(|&objective| {
            let mut rng = trial_rng(config.seed, config.trials);
            match perturbation_oracle(s, p, config.k, objective, ORACLE_ATTEMPTS, &mut rng) {
                Ok(v) => OracleCheck { objective, verdict: Some(v), error: None },
                Err(e) => OracleCheck { objective, verdict: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

fn build(config: &RunConfig, simulate: bool) -> Result<ExperimentReport> {
    config.validate()?;
    let records = config.load()?;
    let s: Vec<f64> = records.iter().map(|r| r.score).collect();
    let Analytic { probs, adjustment, subsets } = analytic(config, &records)?;

    let (cohort, pending) = if config.mode.is_streaming() {
        let (events, members, bound) = trace_stream(config, &records)?;
        let counts: Vec<usize> = events.iter().map(|e| e.pending).collect();
        let max = counts.iter().copied().max().unwrap_or(0);
        (members, Some(PendingTrace { counts, max, bound }))
    } else {
        let selector = Selector::new(config, &records)?;
        (selector.draw(&mut trial_rng(config.seed, 0))?, None)
    };
    let mut cohort: Vec<String> = cohort.into_iter().map(|i| records[i].id.clone()).collect();
    cohort.sort();

    let empirical: Option<EmpiricalMarginals> = simulate.then(|| estimate_for(config, &records)).transpose()?;

    let report = check_fairness(&probs, &s)?;
    let slack = contract_slack(config);
    let fairness = FairnessCheck {
        satisfied: slack.map(|t| report.holds_within(t)),
        contract_slack: slack,
        report,
    };

    let candidates: Vec<CandidateRow> = records
        .iter()
        .enumerate()
        .map(|(i, r)| CandidateRow {
            id: r.id.clone(),
            score: r.score,
            marginal: probs[i],
            frequency: empirical.as_ref().map(|e| e.frequencies[i]),
            half_width: empirical.as_ref().map(|e| e.half_widths[i]),
        })
        .collect();
    let coverage = empirical.as_ref().map(|e| {
        let inside = (0..records.len())
            .filter(|&i| (e.frequencies[i] - probs[i]).abs() <= e.half_widths[i] + TOLERANCE)
            .count();
        inside as f64 / records.len() as f64
    });

    Ok(ExperimentReport {
        schema: SCHEMA,
        config: config.clone(),
        n: records.len(),
        utilities: Utilities::of(&probs, &s)?,
        empirical_utilities: empirical.as_ref().map(|e| Utilities::of(&e.frequencies, &s)).transpose()?,
        oracle: oracle_checks(config, &probs, &s),
        candidates,
        adjustment,
        cohort,
        fairness,
        coverage,
        pending,
        subsets,
    })
}

/// Full report: closed-form marginals plus `trials` Monte Carlo runs.
pub fn run(config: &RunConfig) -> Result<ExperimentReport> {
    build(config, true)
}

/// Report with closed-form marginals only.
pub fn analytic_report(config: &RunConfig) -> Result<ExperimentReport> {
    build(config, false)
}

/// The cohort of trial 0, as ids.
pub fn select(config: &RunConfig) -> Result<Cohort> {
    config.validate()?;
    let records = config.load()?;
    let selector = Selector::new(config, &records)?;
    let mut members: Vec<String> = selector
        .draw(&mut trial_rng(config.seed, 0))?
        .into_iter()
        .map(|i| records[i].id.clone())
        .collect();
    members.sort();
    Ok(Cohort { members })
}

/// Per-arrival events of trial 0 for a streaming mode; empty otherwise.
pub fn trace(config: &RunConfig) -> Result<Vec<TraceEvent>> {
    config.validate()?;
    let records = config.load()?;
    Ok(trace_stream(config, &records)?.0)
}

/// Flattens a report to `id,score,marginal,frequency,half_width` rows.
pub fn write_csv<W: Write>(report: &ExperimentReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in &report.candidates {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{GeneratorSpec, Source};

    fn two_point(mode: Mode) -> RunConfig {
        let spec: GeneratorSpec = "two-point{0.5:2,1.0:1}".parse().unwrap();
        let mut c = RunConfig::new(mode, 2, Source::Generated { spec, n: 3 });
        c.trials = 20_000;
        c.seed = 5;
        c
    }

    #[test]
    fn every_mode_runs_and_keeps_its_contract() {
        for mode in Mode::ALL {
            let report = run(&two_point(mode)).unwrap();
            assert_eq!(report.n, 3);
            assert_eq!(report.cohort.len(), 2);
            assert!(report.fairness.satisfied.unwrap_or(true), "{mode}");
            let total: f64 = report.marginals().iter().sum();
            assert!((total - 2.0).abs() < 1e-9);
            assert!(report.coverage.unwrap() >= 2.0 / 3.0, "{mode}: {:?}", report.coverage);
            assert_eq!(report.pending.is_some(), mode.is_streaming());
        }
    }

    #[test]
    fn three_scores_reports() {
        let r = run(&two_point(Mode::OfflineRatio)).unwrap();
        assert_eq!(r.utilities.maxmin, Some(1.0));
        assert_eq!(r.utilities.linear, 1.5);
        assert_eq!(r.oracle[0].verdict, Some(OracleVerdict::NoImprovementFound));

        let b = run(&two_point(Mode::BaselineWeighted)).unwrap();
        assert!((b.utilities.maxmin.unwrap() - 0.75).abs() < 1e-12);
        assert_eq!(b.subsets.as_ref().unwrap().len(), 3);
        let maxmin_check = b.oracle.iter().find(|o| o.objective == Objective::Maxmin).unwrap();
        assert!(maxmin_check.verdict.as_ref().unwrap().improved());
    }

    #[test]
    fn replay_is_byte_identical() {
        let mut c = two_point(Mode::OnlineRatio);
        c.source = Source::Generated { spec: GeneratorSpec::Uniform01, n: 40 };
        c.k = 4;
        let a = run(&c).unwrap().to_json().unwrap();
        let b = run(&c).unwrap().to_json().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("\"schema\": 1"));
        c.execution = crate::Execution::Sequential;
        assert_eq!(run(&c).unwrap().to_json().unwrap(), a);
    }

    #[test]
    fn csv_columns() {
        let r = run(&two_point(Mode::OfflineLinear)).unwrap();
        let mut out = Vec::new();
        write_csv(&r, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().next().unwrap(), "id,score,marginal,frequency,half_width");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn analytic_report_skips_simulation() {
        let r = analytic_report(&two_point(Mode::OnlineLinear)).unwrap();
        assert!(r.candidates.iter().all(|c| c.frequency.is_none()));
        assert!(r.coverage.is_none());
        let trace = trace(&two_point(Mode::OnlineLinear)).unwrap();
        assert_eq!(trace.len(), 3);
    }

    #[test]
    fn degenerate_marginals_have_zero_half_width() {
        let spec: GeneratorSpec = "two-point{1.0:2,0.0:2}".parse().unwrap();
        let mut c = RunConfig::new(Mode::OfflineLinear, 2, Source::Generated { spec, n: 4 });
        c.trials = 1000;
        let r = run(&c).unwrap();
        for row in &r.candidates {
            assert_eq!(row.frequency, Some(row.marginal));
            assert_eq!(row.half_width, Some(0.0));
        }
        assert_eq!(r.coverage, Some(1.0));
    }

    #[test]
    fn invalid_configs() {
        let mut c = two_point(Mode::OnlineLinear);
        c.epsilon = 0.0;
        assert!(run(&c).unwrap_err().is_invalid_input());
        let mut c = two_point(Mode::OnlineRatio);
        c.alpha = 0.7;
        assert!(run(&c).unwrap_err().is_invalid_input());
        let mut c = two_point(Mode::OfflineLinear);
        c.k = 4;
        assert!(run(&c).unwrap_err().is_invalid_input());
        let mut c = two_point(Mode::OfflineLinear);
        c.trials = 0;
        assert!(run(&c).unwrap_err().is_invalid_input());
    }
}
