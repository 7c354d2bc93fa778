//! Monte Carlo harness: many independent trials of one configuration,
//! summary statistics, comparison against the analytic optimum, parameter
//! sweeps, and CSV/JSONL export.
//!
//! Trial j always uses `SampleStream::new(seed, j)`, so results are
//! identical no matter how many worker threads run and in what order the
//! trials finish.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis;
use crate::dist::RuntimeDistribution;
use crate::engine::{
    run_cached, run_restart, run_wide, run_wide_as_restart, Caps, EngineError, SimOutcome,
};
use crate::dist::SampleStream;
use crate::strategy::{ScheduleError, ScheduleSpec, SpeedSchedule, SpeedSpec, TtlSchedule};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("invalid bench config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Which execution model to run, and with what schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum StrategySpec {
    Restart { schedule: ScheduleSpec },
    Cached { schedule: ScheduleSpec, capacity: usize },
    Wide { speeds: SpeedSpec },
    WideAsRestart { speeds: SpeedSpec },
}

impl StrategySpec {
    pub fn model_label(&self) -> String {
        match self {
            StrategySpec::Restart { .. } => "restart".into(),
            StrategySpec::Cached { capacity, .. } => format!("cached:{capacity}"),
            StrategySpec::Wide { .. } => "wide".into(),
            StrategySpec::WideAsRestart { .. } => "wide_as_restart".into(),
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            StrategySpec::Restart { schedule } | StrategySpec::Cached { schedule, .. } => {
                schedule.kind_label()
            }
            StrategySpec::Wide { speeds } | StrategySpec::WideAsRestart { speeds } => {
                speeds.kind_label()
            }
        }
    }

    pub fn params(&self) -> (Option<f64>, Option<f64>) {
        match self {
            StrategySpec::Restart { schedule } | StrategySpec::Cached { schedule, .. } => {
                schedule.params()
            }
            StrategySpec::Wide { .. } | StrategySpec::WideAsRestart { .. } => (None, None),
        }
    }

    fn validate(&self) -> Result<(), ScheduleError> {
        match self {
            StrategySpec::Restart { schedule } | StrategySpec::Cached { schedule, .. } => {
                schedule.build().map(|_| ())
            }
            StrategySpec::Wide { speeds } | StrategySpec::WideAsRestart { speeds } => {
                speeds.build().map(|_| ())
            }
        }
    }
}

fn default_trim() -> f64 {
    0.01
}

fn default_trials() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub dist: RuntimeDistribution,
    pub strategy: StrategySpec,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub caps: Caps,
    /// Total fraction of trials dropped by the trimmed mean (half per tail).
    #[serde(default = "default_trim")]
    pub trim: f64,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.trials < 1 {
            return Err(BenchError::BadConfig("trials must be >= 1".into()));
        }
        if !(0.0..0.5).contains(&self.trim) {
            return Err(BenchError::BadConfig(format!(
                "trim must be in [0, 0.5), got {}",
                self.trim
            )));
        }
        self.dist
            .validate()
            .map_err(|e| BenchError::BadConfig(e.to_string()))?;
        self.strategy.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub mean: f64,
    pub trimmed_mean: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub censored_count: u64,
    /// Analytic optimum (the optimal-TTL expected cost), when the
    /// distribution admits one.
    pub analytic_opt: Option<f64>,
    /// trimmed_mean / opt.
    pub ratio_opt: Option<f64>,
    /// trimmed_mean / (opt * (1 + log2 max(opt, 2))) — the universal-schedule
    /// overhead scale.
    pub ratio_opt_log: Option<f64>,
}

enum Built {
    Restart(TtlSchedule),
    Cached(TtlSchedule, usize),
    Wide(SpeedSchedule),
    WideAsRestart(SpeedSchedule),
}

fn build_strategy(spec: &StrategySpec) -> Result<Built, ScheduleError> {
    Ok(match spec {
        StrategySpec::Restart { schedule } => Built::Restart(schedule.build()?),
        StrategySpec::Cached { schedule, capacity } => {
            Built::Cached(schedule.build()?, *capacity)
        }
        StrategySpec::Wide { speeds } => Built::Wide(speeds.build()?),
        StrategySpec::WideAsRestart { speeds } => Built::WideAsRestart(speeds.build()?),
    })
}

fn run_one_trial(cfg: &BenchConfig, built: &Built, trial: u64) -> Result<SimOutcome, EngineError> {
    let mut stream = SampleStream::new(cfg.seed, trial);
    match built {
        Built::Restart(proto) => {
            let mut sched = proto.clone();
            Ok(run_restart(&cfg.dist, &mut sched, &mut stream, cfg.caps))
        }
        Built::Cached(proto, capacity) => {
            let mut sched = proto.clone();
            Ok(run_cached(&cfg.dist, &mut sched, *capacity, &mut stream, cfg.caps))
        }
        Built::Wide(sp) => run_wide(&cfg.dist, sp, &stream, cfg.caps),
        Built::WideAsRestart(sp) => run_wide_as_restart(&cfg.dist, sp, &stream, cfg.caps),
    }
}

/// Run `cfg.trials` independent trials and summarize total_work.
pub fn monte_carlo(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    let outcomes = run_trials(cfg)?;
    Ok(summarize(cfg, &outcomes))
}

/// The raw per-trial outcomes behind [`monte_carlo`], in trial order.
pub fn run_trials(cfg: &BenchConfig) -> Result<Vec<SimOutcome>, BenchError> {
    use rayon::prelude::*;
    cfg.validate()?;
    let built = build_strategy(&cfg.strategy)?;
    let results: Vec<Result<SimOutcome, EngineError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|j| run_one_trial(cfg, &built, j))
        .collect();
    // Surface the lowest-trial error so failures are deterministic too.
    let mut outcomes = Vec::with_capacity(results.len());
    for r in results {
        outcomes.push(r?);
    }
    Ok(outcomes)
}

fn summarize(cfg: &BenchConfig, outcomes: &[SimOutcome]) -> BenchResult {
    let n = outcomes.len();
    let mut work: Vec<f64> = outcomes.iter().map(|o| o.total_work).collect();
    work.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = work.iter().sum::<f64>() / n as f64;
    let cut = ((cfg.trim * n as f64) / 2.0).floor() as usize;
    let kept = &work[cut..n - cut];
    let trimmed_mean = kept.iter().sum::<f64>() / kept.len() as f64;
    // Nearest-rank percentiles on the sorted sample.
    let rank = |p: f64| work[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
    let censored_count = outcomes.iter().filter(|o| o.censored).count() as u64;
    let analytic_opt = analysis::optimal_threshold(&cfg.dist)
        .ok()
        .map(|p| p.expected_cost);
    BenchResult {
        mean,
        trimmed_mean,
        median: rank(0.50),
        p90: rank(0.90),
        p99: rank(0.99),
        censored_count,
        analytic_opt,
        ratio_opt: analytic_opt.map(|o| trimmed_mean / o),
        ratio_opt_log: analytic_opt.map(|o| trimmed_mean / (o * (1.0 + o.max(2.0).log2()))),
    }
}

/// One sweep row: the config it came from, and its result or error.
#[derive(Debug)]
pub struct SweepRow {
    pub config: BenchConfig,
    pub result: Result<BenchResult, BenchError>,
}

/// Run every config in the grid; per-row failures are recorded in the row
/// and do not abort the sweep.
pub fn sweep(grid: &[BenchConfig]) -> Vec<SweepRow> {
    grid.iter()
        .map(|cfg| SweepRow { config: cfg.clone(), result: monte_carlo(cfg) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Jsonl,
}

/// One machine-readable output line; field order is the documented column
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub kind: String,
    pub model: String,
    pub dist: String,
    pub param1: Option<f64>,
    pub param2: Option<f64>,
    pub trials: u64,
    pub seed: u64,
    pub mean: f64,
    pub trimmed_mean: f64,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub censored: u64,
    pub analytic_opt: Option<f64>,
    pub ratio_opt: Option<f64>,
    pub ratio_opt_log: Option<f64>,
}

/// Round to 12 significant digits, the export precision.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap()
}

pub fn export_row(config: &BenchConfig, result: &BenchResult) -> ExportRow {
    let (param1, param2) = config.strategy.params();
    ExportRow {
        kind: config.strategy.kind_label().to_string(),
        model: config.strategy.model_label(),
        dist: config.dist.label(),
        param1: param1.map(sig12),
        param2: param2.map(sig12),
        trials: config.trials,
        seed: config.seed,
        mean: sig12(result.mean),
        trimmed_mean: sig12(result.trimmed_mean),
        median: sig12(result.median),
        p90: sig12(result.p90),
        p99: sig12(result.p99),
        censored: result.censored_count,
        analytic_opt: result.analytic_opt.map(sig12),
        ratio_opt: result.ratio_opt.map(sig12),
        ratio_opt_log: result.ratio_opt_log.map(sig12),
    }
}

/// Serialize successful rows to any writer. Rows whose result is an error
/// are skipped (the caller reports them); returns how many rows were
/// written.
pub fn write_rows<W: std::io::Write>(
    rows: &[SweepRow],
    format: ExportFormat,
    mut w: W,
) -> std::io::Result<usize> {
    let out: Vec<ExportRow> = rows
        .iter()
        .filter_map(|r| r.result.as_ref().ok().map(|res| export_row(&r.config, res)))
        .collect();
    match format {
        ExportFormat::Csv => {
            let mut csv_w = csv::Writer::from_writer(w);
            for row in &out {
                csv_w.serialize(row).map_err(io_of_csv)?;
            }
            csv_w.flush()?;
        }
        ExportFormat::Jsonl => {
            for row in &out {
                serde_json::to_writer(&mut w, row)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(out.len())
}

/// [`write_rows`] into a file, with path context on failure.
pub fn export(rows: &[SweepRow], format: ExportFormat, destination: &Path) -> Result<usize, BenchError> {
    let ctx = |source: std::io::Error| BenchError::Io {
        path: destination.display().to_string(),
        source,
    };
    let f = std::fs::File::create(destination).map_err(ctx)?;
    write_rows(rows, format, std::io::BufWriter::new(f)).map_err(ctx)
}

fn io_of_csv(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

pub const CSV_HEADER: &str = "kind,model,dist,param1,param2,trials,seed,mean,trimmed_mean,median,p90,p99,censored,analytic_opt,ratio_opt,ratio_opt_log";
