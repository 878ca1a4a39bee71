//! Experiment plumbing: configuration, input loading, Monte Carlo
//! estimation, baselines, optimality oracles and reports.

pub mod baseline;
pub mod generate;
pub mod io;
pub mod monte_carlo;
pub mod oracle;
pub mod report;
pub mod verify;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::candidate::CandidateRecord;
use crate::error::{Error, Result};
use crate::exec::Execution;

pub use baseline::{uniform_baseline, weighted_sampling_baseline, SubsetProbability, WeightedBaseline};
pub use generate::{generate_stream, parse_gen_arg, GeneratorSpec};
pub use io::read_records;
pub use monte_carlo::{estimate_marginals, half_width, EmpiricalMarginals, TraceEvent};
pub use oracle::{perturbation_oracle, OracleVerdict};
pub use report::{analytic_report, run, select, trace, write_csv, ExperimentReport};
pub use verify::{verify, VerifyOutcome, VerifyTarget};

/// Report schema version.
pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    OfflineLinear,
    OfflineRatio,
    OnlineLinear,
    OnlineRatio,
    BaselineWeighted,
    BaselineUniform,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::OfflineLinear,
        Mode::OfflineRatio,
        Mode::OnlineLinear,
        Mode::OnlineRatio,
        Mode::BaselineWeighted,
        Mode::BaselineUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::OfflineLinear => "offline-linear",
            Mode::OfflineRatio => "offline-ratio",
            Mode::OnlineLinear => "online-linear",
            Mode::OnlineRatio => "online-ratio",
            Mode::BaselineWeighted => "baseline-weighted",
            Mode::BaselineUniform => "baseline-uniform",
        }
    }

    pub fn is_streaming(self) -> bool {
        matches!(self, Mode::OnlineLinear | Mode::OnlineRatio)
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Mode::BaselineWeighted | Mode::BaselineUniform)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == text)
            .ok_or_else(|| Error::invalid(format!("unknown mode {text:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Where candidates come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Input(PathBuf),
    Generated { spec: GeneratorSpec, n: usize },
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub k: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub seed: u64,
    pub trials: u64,
    pub source: Source,
    pub format: OutputFormat,
    /// Does not affect results, so it is not echoed in reports.
    #[serde(skip)]
    pub execution: Execution,
}

impl RunConfig {
    pub const DEFAULT_EPSILON: f64 = 0.1;
    pub const DEFAULT_TRIALS: u64 = 10_000;

    pub fn new(mode: Mode, k: usize, source: Source) -> Self {
        RunConfig {
            mode,
            k,
            epsilon: Self::DEFAULT_EPSILON,
            alpha: crate::online_ratio::RatioStreamState::<usize>::DEFAULT_ALPHA,
            seed: 0,
            trials: Self::DEFAULT_TRIALS,
            source,
            format: OutputFormat::Json,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::invalid(format!("epsilon must lie in (0, 1], got {}", self.epsilon)));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1/2], got {}", self.alpha)));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be at least 1"));
        }
        if let Source::Generated { n: 0, .. } = self.source {
            return Err(Error::invalid("cannot generate an empty stream"));
        }
        Ok(())
    }

    /// Loads or generates the candidate list. Generated streams use `seed`.
    pub fn load(&self) -> Result<Vec<CandidateRecord>> {
        let records = match &self.source {
            Source::Input(path) => read_records(path)?,
            Source::Generated { spec, n } => generate_stream(spec, *n, self.seed)?,
        };
        if self.k > records.len() {
            return Err(Error::CohortTooLarge { k: self.k, n: records.len() });
        }
        Ok(records)
    }
}
