//! Monte Carlo sweeps over market parameters and result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{calibrate, CalibrationSettings, MechanismKind};
use crate::error::{Error, Result};
use crate::market_model::MechanismOutcome;
use crate::mechanisms::{run_omniscient, MarketContext, Mechanism};
use crate::rng::derive_seed;
use crate::scenario_gen::{sample_scenario, Dist, GeneratorConfig};
use crate::stats::Summary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    NumAvs,
    NumPerfMbps,
    CacheSize,
    Gamma,
    DtScale,
    ArScale,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::NumAvs => "num_avs",
            SweepParam::NumPerfMbps => "num_perf_mbps",
            SweepParam::CacheSize => "cache_size",
            SweepParam::Gamma => "gamma",
            SweepParam::DtScale => "dt_scale",
            SweepParam::ArScale => "ar_scale",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown sweep parameter {s}")))
    }

    /// `config` with this parameter set to `value`.
    pub fn apply(self, config: &GeneratorConfig, value: f64) -> Result<GeneratorConfig> {
        let mut c = config.clone();
        let count = || {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("{} must be a positive integer, got {value}", self.name())))
            }
        };
        match self {
            SweepParam::NumAvs => c.num_avs = count()?,
            SweepParam::NumPerfMbps => c.num_perf_mbps = count()?,
            SweepParam::CacheSize => c.cache_size = Dist::constant(value),
            SweepParam::Gamma => c.gamma = value,
            SweepParam::DtScale => c.dt_scale = value,
            SweepParam::ArScale => c.ar_scale = value,
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    /// Five to fifty in steps of five.
    pub fn default_for(param: SweepParam) -> Self {
        Self { param, values: (1..=10).map(|j| 5.0 * j as f64).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

fn default_axis() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub generator: GeneratorConfig,
    pub mechanisms: Vec<MechanismKind>,
    pub sweep: SweepAxis,
    pub trials: usize,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
    /// Worker threads; all cores when absent.
    pub workers: Option<usize>,
    pub calibration: CalibrationSettings,
    pub dt_axis: Vec<f64>,
    pub ar_axis: Vec<f64>,
    /// Scenarios checked by the property suite.
    pub verify_scenarios: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorConfig::default(),
            mechanisms: MechanismKind::default_set(),
            sweep: SweepAxis::default_for(SweepParam::NumAvs),
            trials: 10_000,
            seed: 42,
            output_path: None,
            format: OutputFormat::Csv,
            workers: None,
            calibration: CalibrationSettings::default(),
            dt_axis: default_axis(),
            ar_axis: default_axis(),
            verify_scenarios: 1000,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.mechanisms.is_empty() {
            return Err(Error::InvalidConfig("no mechanisms configured".into()));
        }
        self.generator.validate()
    }

    /// Runs `f` on a pool with the configured number of workers.
    pub fn with_pool<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.workers {
            b = b.num_threads(n.max(1));
        }
        let pool = b.build().map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        Ok(pool.install(f))
    }
}

/// One aggregated (cell, mechanism) record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub cell_id: usize,
    pub param_name: String,
    pub param_value: f64,
    pub mechanism: String,
    pub trials: usize,
    pub mean_total: f64,
    pub ci_total: f64,
    pub mean_wdt: f64,
    /// Display-weighted brand ad value, `T * Q_0`.
    pub mean_brand: f64,
    /// Display-weighted performance ad value, `T * Q_k`.
    pub mean_perf: f64,
    pub mean_duration_s: f64,
    /// Mean per-trial welfare ratio against the omniscient benchmark.
    pub mean_ratio: f64,
    pub ci_ratio: f64,
}

pub const CSV_COLUMNS: [&str; 13] = [
    "cell_id",
    "param_name",
    "param_value",
    "mechanism",
    "trials",
    "mean_total",
    "ci_total",
    "mean_wdt",
    "mean_brand",
    "mean_perf",
    "mean_duration_s",
    "mean_ratio",
    "ci_ratio",
];

/// Per-trial quantities for one mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrialRecord {
    pub total: f64,
    pub wdt: f64,
    pub brand: f64,
    pub perf: f64,
    pub duration: f64,
    pub ratio: f64,
}

impl TrialRecord {
    fn new(o: &MechanismOutcome, benchmark_total: f64) -> Self {
        let ratio = if benchmark_total > 0.0 { o.total_welfare / benchmark_total } else { 1.0 };
        Self {
            total: o.total_welfare,
            wdt: o.surplus_dt,
            brand: o.display_duration_s * o.surplus_brand,
            perf: o.display_duration_s * o.surplus_perf,
            duration: o.display_duration_s,
            ratio,
        }
    }
}

/// One seeded trial for each mechanism, with ratios against the omniscient benchmark.
pub fn run_trial(config: &GeneratorConfig, trial: u64, mechs: &[Box<dyn Mechanism>]) -> Result<Vec<TrialRecord>> {
    let s = sample_scenario(config, trial)?;
    let bench = match run_omniscient(&s) {
        Ok(o) => o.total_welfare,
        Err(Error::NoFeasiblePair) => 0.0,
        Err(e) => return Err(e),
    };
    let ctx = MarketContext::new(&s)?;
    mechs
        .iter()
        .map(|m| m.run_truthful(&ctx).map(|o| TrialRecord::new(&o, bench)))
        .collect()
}

/// Per-mechanism records of every trial of a cell, in trial order.
pub fn run_cell_records(
    gen: &GeneratorConfig,
    mechanisms: &[MechanismKind],
    settings: &CalibrationSettings,
    trials: usize,
) -> Result<Vec<Vec<TrialRecord>>> {
    let calib = calibrate(gen, settings)?;
    let mechs = mechanisms
        .iter()
        .map(|k| k.build(gen, &calib, settings))
        .collect::<Result<Vec<_>>>()?;
    let per_trial: Vec<Vec<TrialRecord>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| run_trial(gen, t, &mechs))
        .collect::<Result<_>>()?;
    Ok((0..mechs.len()).map(|m| per_trial.iter().map(|r| r[m]).collect()).collect())
}

fn aggregate(cell_id: usize, param_name: &str, param_value: f64, mechanism: String, recs: &[TrialRecord]) -> ResultRow {
    let col = |f: fn(&TrialRecord) -> f64| recs.iter().map(f).collect::<Vec<_>>();
    let total = Summary::of(&col(|r| r.total));
    let ratio = Summary::of(&col(|r| r.ratio));
    ResultRow {
        cell_id,
        param_name: param_name.to_string(),
        param_value,
        mechanism,
        trials: recs.len(),
        mean_total: total.mean,
        ci_total: total.ci,
        mean_wdt: Summary::of(&col(|r| r.wdt)).mean,
        mean_brand: Summary::of(&col(|r| r.brand)).mean,
        mean_perf: Summary::of(&col(|r| r.perf)).mean,
        mean_duration_s: Summary::of(&col(|r| r.duration)).mean,
        mean_ratio: ratio.mean,
        ci_ratio: ratio.ci,
    }
}

fn error_row(cell_id: usize, param_name: &str, param_value: f64, err: &Error) -> ResultRow {
    ResultRow {
        cell_id,
        param_name: param_name.to_string(),
        param_value,
        mechanism: format!("error: {err}"),
        trials: 0,
        mean_total: f64::NAN,
        ci_total: f64::NAN,
        mean_wdt: f64::NAN,
        mean_brand: f64::NAN,
        mean_perf: f64::NAN,
        mean_duration_s: f64::NAN,
        mean_ratio: f64::NAN,
        ci_ratio: f64::NAN,
    }
}

fn run_cells(config: &ExperimentConfig, cells: &[(SweepParam, f64)]) -> Result<Vec<ResultRow>> {
    config.validate()?;
    config.with_pool(|| {
        let mut rows = Vec::new();
        for (cell_id, &(param, value)) in cells.iter().enumerate() {
            let name = param.name();
            let gen = param.apply(&config.generator, value).and_then(|mut g| {
                g.rng_seed = derive_seed(config.seed, cell_id as u64);
                g.validate().map(|_| g)
            });
            let recs = gen.and_then(|g| run_cell_records(&g, &config.mechanisms, &config.calibration, config.trials));
            match recs {
                Ok(recs) => {
                    for (kind, r) in config.mechanisms.iter().zip(&recs) {
                        rows.push(aggregate(cell_id, name, value, kind.to_string(), r));
                    }
                }
                Err(e) => rows.push(error_row(cell_id, name, value, &e)),
            }
        }
        rows
    })
}

/// One row per (sweep value, mechanism).
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let cells: Vec<_> = config.sweep.values.iter().map(|&v| (config.sweep.param, v)).collect();
    run_cells(config, &cells)
}

/// Rows over the DT-requirement axis followed by the AR-requirement axis.
pub fn run_duration_grid(config: &ExperimentConfig, dt_scale_axis: &[f64], ar_scale_axis: &[f64]) -> Result<Vec<ResultRow>> {
    if dt_scale_axis.iter().chain(ar_scale_axis).any(|&x| !(x > 0.0)) {
        return Err(Error::InvalidConfig("scale axes must be positive".into()));
    }
    let cells: Vec<_> = dt_scale_axis
        .iter()
        .map(|&v| (SweepParam::DtScale, v))
        .chain(ar_scale_axis.iter().map(|&v| (SweepParam::ArScale, v)))
        .collect();
    run_cells(config, &cells)
}

/// Writes rows as CSV (header always present) or JSON lines.
pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path)?;
    write_results(rows, BufWriter::new(file), format)
}

pub fn write_results<W: Write>(rows: &[ResultRow], mut out: W, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            w.write_record(CSV_COLUMNS)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
        OutputFormat::Jsonl => {
            for r in rows {
                serde_json::to_writer(&mut out, r)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Reads rows written by [`emit_results`] in CSV form.
pub fn read_csv_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(Error::Serialization(format!("unexpected header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
