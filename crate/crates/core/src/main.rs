use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use syncmarket::calibration::{calibrate, MechanismKind};
use syncmarket::experiments::{
    emit_results, run_duration_grid, run_sweep, write_results, ExperimentConfig, OutputFormat, ResultRow, SweepAxis,
    SweepParam,
};
use syncmarket::market_model::{validate_scenario, MarketScenario, MechanismOutcome};
use syncmarket::mechanisms::{omniscient_given_av, run_omniscient, MarketContext};
use syncmarket::scenario_gen::sample_scenario;
use syncmarket::verification::{run_bound_suite, run_property_suite, NamedBound, PropertySuiteReport};
use syncmarket::{Error, Result};

#[derive(Parser)]
#[command(name = "syncmarket", version, about = "Physical-virtual synchronization market simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured mechanism on a single market.
    RunOnce {
        /// Market scenario as JSON; sampled from the generator when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Trial index used when sampling.
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Sweep one market parameter.
    Sweep {
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// Scale DT and AR requirements separately.
    DurationGrid {
        #[arg(long, value_delimiter = ',')]
        dt_axis: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        ar_axis: Option<Vec<f64>>,
    },
    /// Check strategy-proofness, false-name-proofness and adverse-selection freeness.
    Verify {
        /// Number of sampled scenarios.
        #[arg(long)]
        scenarios: Option<usize>,
    },
    /// Monte Carlo welfare bounds.
    Bounds,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut c = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(t) = g.trials {
        c.trials = t;
    }
    if let Some(o) = &g.out {
        c.output_path = Some(o.clone());
    }
    if let Some(f) = g.format {
        c.format = match f {
            Format::Csv => OutputFormat::Csv,
            Format::Jsonl => OutputFormat::Jsonl,
        };
    }
    if g.workers.is_some() {
        c.workers = g.workers;
    }
    c.generator.rng_seed = c.seed;
    Ok(c)
}

fn emit_rows(c: &ExperimentConfig, rows: &[ResultRow]) -> Result<()> {
    match &c.output_path {
        Some(p) => emit_results(rows, p, c.format),
        None => write_results(rows, io::stdout().lock(), c.format),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text + "\n")?,
        None => writeln!(io::stdout().lock(), "{text}")?,
    }
    Ok(())
}

#[derive(Serialize)]
struct RunOnceReport {
    mechanism: String,
    outcome: MechanismOutcome,
    /// Best welfare over all AVs and ad allocations.
    omniscient_total: f64,
    /// Best welfare with the mechanism's synchronizing AV held fixed.
    conditional_total: Option<f64>,
}

fn run_once(c: &ExperimentConfig, scenario: Option<&Path>, trial: u64) -> Result<bool> {
    c.validate()?;
    let s: MarketScenario = match scenario {
        Some(p) => validate_scenario(serde_json::from_str(&std::fs::read_to_string(p)?)?)?,
        None => sample_scenario(&c.generator, trial)?,
    };
    let calib = calibrate(&c.generator, &c.calibration)?;
    let ctx = MarketContext::new(&s)?;
    let omniscient_total = match run_omniscient(&s) {
        Ok(o) => o.total_welfare,
        Err(Error::NoFeasiblePair) => 0.0,
        Err(e) => return Err(e),
    };
    let mut reports = Vec::new();
    for kind in &c.mechanisms {
        let mech = kind.build(&c.generator, &calib, &c.calibration)?;
        let outcome = mech.run_truthful(&ctx)?;
        let conditional_total = outcome.winner_av.map(|av| omniscient_given_av(&ctx, av).total_welfare);
        reports.push(RunOnceReport { mechanism: kind.to_string(), outcome, omniscient_total, conditional_total });
    }
    write_json(&reports, c.output_path.as_deref())?;
    Ok(true)
}

fn verify(c: &ExperimentConfig, scenarios: Option<usize>) -> Result<bool> {
    c.validate()?;
    let n = scenarios.unwrap_or(c.verify_scenarios);
    let calib = calibrate(&c.generator, &c.calibration)?;
    let reports: Vec<PropertySuiteReport> = c.with_pool(|| {
        c.mechanisms
            .iter()
            .filter(|k| !matches!(k, MechanismKind::Omniscient))
            .map(|k| {
                let m = k.build(&c.generator, &calib, &c.calibration)?;
                let mut r = run_property_suite(m.as_ref(), &c.generator, n)?;
                r.mechanism = k.to_string();
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut err = io::stderr().lock();
    writeln!(err, "{:<32} {:>10} {:>10} {:>10}  result", "mechanism", "sp", "fnp", "asf")?;
    for r in &reports {
        writeln!(
            err,
            "{:<32} {:>10} {:>10} {:>10}  {}",
            r.mechanism,
            r.strategy_proof.len(),
            r.false_name.len(),
            r.adverse_selection.len(),
            if r.pass() { "PASS" } else { "FAIL" }
        )?;
    }
    write_json(&reports, c.output_path.as_deref())?;
    Ok(reports.iter().all(PropertySuiteReport::pass))
}

fn bounds(c: &ExperimentConfig) -> Result<bool> {
    c.validate()?;
    let suite: Vec<NamedBound> = c.with_pool(|| run_bound_suite(&c.generator, &c.calibration, c.trials))??;
    let mut err = io::stderr().lock();
    writeln!(err, "{:<20} {:<36} {:>8} {:>8} {:>6}  result", "bound", "best", "mean", "ci99", "target")?;
    for b in &suite {
        writeln!(
            err,
            "{:<20} {:<36} {:>8.4} {:>8.4} {:>6}  {}",
            b.name,
            b.best.label,
            b.best.ratio_mean,
            b.best.ratio_ci,
            b.best.bound,
            if b.best.pass { "PASS" } else { "FAIL" }
        )?;
    }
    write_json(&suite, c.output_path.as_deref())?;
    Ok(suite.iter().all(|b| b.best.pass))
}

fn execute(cli: Cli) -> Result<bool> {
    let mut c = load_config(&cli.global)?;
    match cli.command {
        Command::RunOnce { scenario, trial } => run_once(&c, scenario.as_deref(), trial),
        Command::Sweep { param, values } => {
            if let Some(p) = param {
                let p = SweepParam::parse(&p)?;
                c.sweep = SweepAxis { param: p, values: SweepAxis::default_for(p).values };
            }
            if let Some(v) = values {
                c.sweep.values = v;
            }
            let rows = run_sweep(&c)?;
            emit_rows(&c, &rows)?;
            Ok(rows.iter().all(|r| !r.mechanism.starts_with("error")))
        }
        Command::DurationGrid { dt_axis, ar_axis } => {
            let dt = dt_axis.unwrap_or_else(|| c.dt_axis.clone());
            let ar = ar_axis.unwrap_or_else(|| c.ar_axis.clone());
            let rows = run_duration_grid(&c, &dt, &ar)?;
            emit_rows(&c, &rows)?;
            Ok(rows.iter().all(|r| !r.mechanism.starts_with("error")))
        }
        Command::Verify { scenarios } => verify(&c, scenarios),
        Command::Bounds => bounds(&c),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
