use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fair_cohort::harness::{
    self, parse_gen_arg, write_csv, ExperimentReport, Mode, OutputFormat, RunConfig, Source, VerifyTarget,
};
use fair_cohort::Error;

/// Fairness-preserving cohort selection: closed-form marginals, streaming
/// selectors, baselines and self-checks.
#[derive(Parser)]
#[command(name = "fair-cohort", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one cohort.
    Select(Common),
    /// Print closed-form marginals, utilities and the fairness check.
    Marginals(Common),
    /// Closed-form marginals plus Monte Carlo frequencies.
    Simulate(Common),
    /// Run the self-checks; exits with status 3 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        /// rounding, fairness, invariants, oracle, worst-case or all.
        #[arg(long, default_value = "all", value_parser = parse_target)]
        target: VerifyTarget,
    },
    /// Simulate a baseline selector (weighted by default).
    Baseline(Common),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").args(["input", "gen"]))]
struct Common {
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Cohort size.
    #[arg(long)]
    k: Option<usize>,
    /// Bucket width for online-linear.
    #[arg(long, default_value_t = RunConfig::DEFAULT_EPSILON)]
    epsilon: f64,
    /// TOP fraction for online-ratio.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = RunConfig::DEFAULT_TRIALS)]
    trials: u64,
    /// JSONL (`{"id":..,"score":..}` per line) or CSV (`id,score`) file.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Generator, optionally with a length: `uniform01:200`, `beta(2,5):50`,
    /// `two-point{0.5:2,1.0:1}`, `adversarial-boundary(0.1):100`.
    #[arg(long)]
    gen: Option<String>,
    /// Write per-arrival JSON lines for streaming modes to stderr.
    #[arg(long)]
    trace: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "json", value_parser = parse_format)]
    format: OutputFormat,
}

fn parse_mode(text: &str) -> Result<Mode, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

fn parse_target(text: &str) -> Result<VerifyTarget, String> {
    text.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(text: &str) -> Result<OutputFormat, String> {
    match text {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        _ => Err(format!("unknown format {text:?}; expected json or csv")),
    }
}

impl Common {
    fn config(&self, default_mode: Mode) -> fair_cohort::Result<RunConfig> {
        let source = match (&self.input, &self.gen) {
            (Some(path), _) => Source::Input(path.clone()),
            (None, Some(text)) => {
                let (spec, n) = parse_gen_arg(text)?;
                Source::Generated { spec, n }
            }
            (None, None) => return Err(Error::InvalidInput("one of --input or --gen is required".into())),
        };
        let k = self.k.ok_or_else(|| Error::InvalidInput("--k is required".into()))?;
        let mut config = RunConfig::new(self.mode.unwrap_or(default_mode), k, source);
        config.epsilon = self.epsilon;
        config.alpha = self.alpha;
        config.seed = self.seed;
        config.trials = self.trials;
        config.format = self.format;
        config.validate()?;
        Ok(config)
    }

    fn output(&self) -> io::Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn emit_trace(common: &Common, config: &RunConfig) -> fair_cohort::Result<()> {
    if !common.trace || !config.mode.is_streaming() {
        return Ok(());
    }
    let mut err = io::stderr().lock();
    for event in harness::trace(config)? {
        serde_json::to_writer(&mut err, &event)?;
        writeln!(err)?;
    }
    Ok(())
}

fn write_report(common: &Common, report: &ExperimentReport) -> fair_cohort::Result<()> {
    let mut out = common.output()?;
    match common.format {
        OutputFormat::Json => out.write_all(report.to_json()?.as_bytes())?,
        OutputFormat::Csv => write_csv(report, &mut out)?,
    }
    out.flush()?;
    Ok(())
}

/// Returns whether every check passed.
fn execute(cli: Cli) -> fair_cohort::Result<bool> {
    match cli.command {
        Command::Select(common) => {
            let config = common.config(Mode::OfflineLinear)?;
            emit_trace(&common, &config)?;
            let cohort = harness::select(&config)?;
            let mut out = common.output()?;
            match common.format {
                OutputFormat::Json => {
                    let doc = serde_json::json!({
                        "schema": harness::SCHEMA,
                        "config": config,
                        "cohort": cohort.members,
                    });
                    writeln!(out, "{}", serde_json::to_string_pretty(&doc)?)?;
                }
                OutputFormat::Csv => {
                    writeln!(out, "id")?;
                    for id in &cohort.members {
                        writeln!(out, "{id}")?;
                    }
                }
            }
            out.flush()?;
            Ok(true)
        }
        Command::Marginals(common) => {
            let config = common.config(Mode::OfflineLinear)?;
            emit_trace(&common, &config)?;
            write_report(&common, &harness::analytic_report(&config)?)?;
            Ok(true)
        }
        Command::Simulate(common) => {
            let config = common.config(Mode::OfflineLinear)?;
            emit_trace(&common, &config)?;
            write_report(&common, &harness::run(&config)?)?;
            Ok(true)
        }
        Command::Baseline(common) => {
            let config = common.config(Mode::BaselineWeighted)?;
            if !config.mode.is_baseline() {
                return Err(Error::InvalidInput(format!("baseline needs a baseline mode, got {}", config.mode)));
            }
            write_report(&common, &harness::run(&config)?)?;
            Ok(true)
        }
        Command::Verify { common, target } => {
            let config = common.config(Mode::OfflineLinear)?;
            emit_trace(&common, &config)?;
            let outcome = harness::verify(&config, target)?;
            let mut out = common.output()?;
            match common.format {
                OutputFormat::Json => writeln!(out, "{}", serde_json::to_string_pretty(&outcome)?)?,
                OutputFormat::Csv => {
                    let mut w = csv::Writer::from_writer(&mut out);
                    for c in &outcome.checks {
                        w.serialize(c)?;
                    }
                    w.flush()?;
                }
            }
            out.flush()?;
            Ok(outcome.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                _ if e.is_invalid_input() => 2,
                Error::Invariant(_) => 3,
                _ => 1,
            })
        }
    }
}
