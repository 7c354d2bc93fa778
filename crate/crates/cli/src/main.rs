//! `restarts` — restart strategies for Las Vegas algorithms.
//!
//! Subcommands: analyze (optimal TTL + profile), sequence (print TTLs),
//! simulate (Monte Carlo of one config), sweep (many configs from a file),
//! run (supervise a real command).
//!
//! Every flag can also come from a JSON config file (`--config`); explicit
//! command-line flags win. Exit codes: 0 ok, 1 usage/config error, 2 limits
//! exhausted (run), 3 spawn error (run).

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use restarts::analysis;
use restarts::bench::{
    export, monte_carlo, sweep as run_sweep, write_rows, BenchConfig, ExportFormat, StrategySpec,
    SweepRow,
};
use restarts::dist::{RuntimeDistribution, SampleStream};
use restarts::engine::Caps;
use restarts::strategy::{ScheduleSpec, SpeedSpec, TtlSchedule};
use restarts_supervisor::{
    supervise, CommandSpec, FinalOutcome, Limits, Mode, Options as SupervisorOptions,
};

#[derive(Parser)]
#[command(
    name = "restarts",
    version,
    about = "Restart strategies for Las Vegas algorithms",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Optimal TTL threshold and profile of a runtime distribution
    Analyze(AnalyzeArgs),
    /// Print the first N TTLs of a schedule
    Sequence(SequenceArgs),
    /// Monte Carlo simulation of one configuration
    Simulate(SimulateArgs),
    /// Run every row of a sweep config and export the table
    Sweep(SweepArgs),
    /// Supervise a real command under a restart strategy
    Run(RunArgs),
}

#[derive(Args, Default)]
struct CommonFlags {
    /// JSON config file supplying defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output file (stdout when omitted)
    #[arg(long)]
    output: Option<PathBuf>,
    /// Output format
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Args, Default)]
struct StrategyFlags {
    /// fixed | exponential | luby | zeta2 | bin (restart/cached models),
    /// harmonic | poly_log (wide models)
    #[arg(long)]
    strategy: Option<String>,
    /// Fixed TTL, or the exponential growth rate
    #[arg(long)]
    delta: Option<f64>,
    /// Exponential scale (first TTL)
    #[arg(long)]
    s: Option<f64>,
    /// Schedule unit; accepts ms/s/m suffixes
    #[arg(long, value_parser = parse_seconds)]
    unit: Option<f64>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Distribution as a tagged JSON object, e.g.
    /// '{"kind":"step_or_forever","run_time":1,"success_prob":0.01}'
    #[arg(long)]
    dist: Option<String>,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct SequenceArgs {
    #[command(flatten)]
    strategy: StrategyFlags,
    /// How many TTLs to print
    #[arg(short = 'n', long)]
    count: Option<u64>,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dist: Option<String>,
    #[command(flatten)]
    strategy: StrategyFlags,
    /// restart | cached | wide | wide_as_restart
    #[arg(long)]
    model: Option<String>,
    /// Suspension cache size (cached model)
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    /// Stop a trial after this many fresh starts
    #[arg(long)]
    max_attempts: Option<u64>,
    /// Stop a trial after this much simulated work (seconds)
    #[arg(long)]
    max_work: Option<f64>,
    /// Total fraction trimmed from the mean (half per tail)
    #[arg(long)]
    trim: Option<f64>,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Override the trial count of every row
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    strategy: StrategyFlags,
    /// restart | cached
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u64>,
    /// Total wall-clock budget; accepts ms/s/m suffixes
    #[arg(long, value_parser = parse_seconds)]
    max_wall: Option<f64>,
    /// SIGTERM-to-SIGKILL delay; accepts ms/s/m suffixes
    #[arg(long, value_parser = parse_seconds)]
    grace: Option<f64>,
    /// Append JSONL attempt records here
    #[arg(long)]
    log: Option<PathBuf>,
    /// Comma-separated exit codes counting as success
    #[arg(long)]
    success_codes: Option<String>,
    /// The command to supervise, after `--`
    #[arg(last = true, required = true)]
    command: Vec<String>,
    #[command(flatten)]
    common: CommonFlags,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for ExportFormat {
    fn from(f: FormatArg) -> ExportFormat {
        match f {
            FormatArg::Csv => ExportFormat::Csv,
            FormatArg::Jsonl => ExportFormat::Jsonl,
        }
    }
}

/// Flags mirrored in the JSON config file; explicit flags override these.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    dist: Option<RuntimeDistribution>,
    strategy: Option<String>,
    model: Option<String>,
    delta: Option<f64>,
    s: Option<f64>,
    unit: Option<f64>,
    capacity: Option<usize>,
    trials: Option<u64>,
    seed: Option<u64>,
    max_attempts: Option<u64>,
    max_work: Option<f64>,
    trim: Option<f64>,
    count: Option<u64>,
    output: Option<PathBuf>,
    format: Option<String>,
    mode: Option<String>,
    max_wall: Option<f64>,
    grace: Option<f64>,
    log: Option<PathBuf>,
    success_codes: Option<Vec<i32>>,
    /// Sweep rows: full bench configs, run in order.
    rows: Option<Vec<BenchConfig>>,
}

struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> CliError {
        CliError { message: message.into(), code: 1 }
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_seconds(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let (num, scale) = if let Some(rest) = t.strip_suffix("ms") {
        (rest, 1e-3)
    } else if let Some(rest) = t.strip_suffix('s') {
        (rest, 1.0)
    } else if let Some(rest) = t.strip_suffix('m') {
        (rest, 60.0)
    } else {
        (t, 1.0)
    };
    let v: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("expected a duration like 250ms, 2s, 1.5m or plain seconds, got {text:?}"))?;
    if !(v >= 0.0 && v.is_finite()) {
        return Err(format!("duration must be finite and nonnegative, got {text:?}"));
    }
    Ok(v * scale)
}

fn load_file_config(path: &Option<PathBuf>) -> CliResult<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("config {}: {e}", p.display())))
        }
    }
}

fn parse_dist(flag: &Option<String>, file: &FileConfig) -> CliResult<RuntimeDistribution> {
    let dist = match flag {
        Some(text) => {
            let json = if text.trim_start().starts_with('{') {
                text.clone()
            } else {
                // Bare names are sugar for parameterless kinds: "zeta2".
                format!("{{\"kind\":\"{}\"}}", text.trim())
            };
            serde_json::from_str(&json)
                .map_err(|e| CliError::usage(format!("--dist: {e}")))?
        }
        None => file
            .dist
            .clone()
            .ok_or_else(|| CliError::usage("missing distribution: pass --dist or set \"dist\" in --config"))?,
    };
    dist.validate()
        .map_err(|e| CliError::usage(format!("invalid distribution: {e}")))?;
    Ok(dist)
}

/// Resolve the schedule spec for the restart/cached models.
fn schedule_spec(flags: &StrategyFlags, file: &FileConfig) -> CliResult<ScheduleSpec> {
    let kind = flags
        .strategy
        .clone()
        .or_else(|| file.strategy.clone())
        .ok_or_else(|| CliError::usage("missing --strategy"))?;
    let delta = flags.delta.or(file.delta);
    let s = flags.s.or(file.s);
    let unit = flags.unit.or(file.unit).unwrap_or(1.0);
    let spec = match kind.as_str() {
        "fixed" => ScheduleSpec::Fixed {
            delta: delta.ok_or_else(|| CliError::usage("--strategy fixed needs --delta"))?,
        },
        "exponential" => ScheduleSpec::Exponential {
            s: s.unwrap_or(1.0),
            delta: delta.unwrap_or(1.0),
        },
        "luby" => ScheduleSpec::Luby { unit },
        "zeta2" => ScheduleSpec::Zeta2 { unit },
        "bin" => ScheduleSpec::Bin { unit },
        other => {
            return Err(CliError::usage(format!(
                "unknown schedule strategy {other:?} (expected fixed, exponential, luby, zeta2, or bin)"
            )))
        }
    };
    spec.build()
        .map_err(|e| CliError::usage(format!("invalid strategy: {e}")))?;
    Ok(spec)
}

fn speed_spec(flags: &StrategyFlags, file: &FileConfig) -> CliResult<SpeedSpec> {
    let kind = flags
        .strategy
        .clone()
        .or_else(|| file.strategy.clone())
        .ok_or_else(|| CliError::usage("missing --strategy"))?;
    match kind.as_str() {
        "harmonic" => Ok(SpeedSpec::Harmonic),
        "poly_log" | "polylog" => Ok(SpeedSpec::PolyLog),
        other => Err(CliError::usage(format!(
            "unknown speed strategy {other:?} (expected harmonic or poly_log)"
        ))),
    }
}

fn resolve_format(common: &CommonFlags, file: &FileConfig) -> CliResult<ExportFormat> {
    if let Some(f) = common.format {
        return Ok(f.into());
    }
    match file.format.as_deref() {
        None => Ok(ExportFormat::Csv),
        Some("csv") => Ok(ExportFormat::Csv),
        Some("jsonl") => Ok(ExportFormat::Jsonl),
        Some(other) => Err(CliError::usage(format!(
            "format must be csv or jsonl, got {other:?}"
        ))),
    }
}

fn emit_rows(rows: &[SweepRow], common: &CommonFlags, file: &FileConfig) -> CliResult<()> {
    let format = resolve_format(common, file)?;
    let output = common.output.clone().or_else(|| file.output.clone());
    match output {
        Some(path) => {
            export(rows, format, &path)
                .map_err(|e| CliError::usage(e.to_string()))?;
        }
        None => {
            let stdout = std::io::stdout();
            write_rows(rows, format, stdout.lock())
                .map_err(|e| CliError::usage(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn cmd_analyze(args: &AnalyzeArgs) -> CliResult<i32> {
    let file = load_file_config(&args.common.config)?;
    let dist = parse_dist(&args.dist, &file)?;
    let policy = analysis::optimal_threshold(&dist)
        .map_err(|e| CliError::usage(format!("analysis failed: {e}")))?;
    let profile = analysis::profile_of(&dist)
        .map_err(|e| CliError::usage(format!("analysis failed: {e}")))?;
    let out = serde_json::json!({
        "delta": policy.delta,
        "expected_cost": policy.expected_cost,
        "inv_rho": profile.inv_rho,
        "threshold": profile.threshold,
        "work": profile.work,
    });
    println!("{out}");
    Ok(0)
}

fn cmd_sequence(args: &SequenceArgs) -> CliResult<i32> {
    let file = load_file_config(&args.common.config)?;
    let n = args.count.or(file.count).unwrap_or(10);
    if n < 1 {
        return Err(CliError::usage("-n must be at least 1"));
    }
    let spec = schedule_spec(&args.strategy, &file)?;
    let mut sched = spec.build().expect("validated");
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let mut rng = SampleStream::new(seed, 0);
    let mut out = String::new();
    for _ in 0..n {
        out.push_str(&format!("{}\n", sched.next_ttl(&mut rng)));
    }
    print!("{out}");
    Ok(0)
}

fn build_bench_config(args: &SimulateArgs, file: &FileConfig) -> CliResult<BenchConfig> {
    let dist = parse_dist(&args.dist, file)?;
    let model = args
        .model
        .clone()
        .or_else(|| file.model.clone())
        .unwrap_or_else(|| "restart".into());
    let strategy = match model.as_str() {
        "restart" => StrategySpec::Restart { schedule: schedule_spec(&args.strategy, file)? },
        "cached" => StrategySpec::Cached {
            schedule: schedule_spec(&args.strategy, file)?,
            capacity: args.capacity.or(file.capacity).unwrap_or(0),
        },
        "wide" => StrategySpec::Wide { speeds: speed_spec(&args.strategy, file)? },
        "wide_as_restart" => {
            StrategySpec::WideAsRestart { speeds: speed_spec(&args.strategy, file)? }
        }
        other => {
            return Err(CliError::usage(format!(
                "unknown model {other:?} (expected restart, cached, wide, or wide_as_restart)"
            )))
        }
    };
    let cfg = BenchConfig {
        dist,
        strategy,
        trials: args.trials.or(file.trials).unwrap_or(1000),
        seed: args.common.seed.or(file.seed).unwrap_or(0),
        caps: Caps {
            max_attempts: args.max_attempts.or(file.max_attempts),
            max_total_work: args.max_work.or(file.max_work),
        },
        trim: args.trim.or(file.trim).unwrap_or(0.01),
    };
    cfg.validate()
        .map_err(|e| CliError::usage(format!("invalid configuration: {e}")))?;
    Ok(cfg)
}

fn cmd_simulate(args: &SimulateArgs) -> CliResult<i32> {
    let file = load_file_config(&args.common.config)?;
    let cfg = build_bench_config(args, &file)?;
    let result = monte_carlo(&cfg).map_err(|e| CliError::usage(format!("simulation failed: {e}")))?;
    let rows = vec![SweepRow { config: cfg, result: Ok(result) }];
    emit_rows(&rows, &args.common, &file)?;
    Ok(0)
}

fn cmd_sweep(args: &SweepArgs) -> CliResult<i32> {
    let file = load_file_config(&args.common.config)?;
    let mut rows_cfg = file
        .rows
        .clone()
        .ok_or_else(|| CliError::usage("sweep needs a --config file with a \"rows\" array"))?;
    if rows_cfg.is_empty() {
        return Err(CliError::usage("sweep config has an empty \"rows\" array"));
    }
    for row in &mut rows_cfg {
        if let Some(t) = args.trials {
            row.trials = t;
        }
        if let Some(s) = args.common.seed {
            row.seed = s;
        }
    }
    let rows = run_sweep(&rows_cfg);
    for row in &rows {
        if let Err(e) = &row.result {
            eprintln!("sweep row {} on {}: {e}", row.config.strategy.model_label(), row.config.dist.label());
        }
    }
    emit_rows(&rows, &args.common, &file)?;
    Ok(0)
}

fn cmd_run(args: &RunArgs) -> CliResult<i32> {
    let file = load_file_config(&args.common.config)?;
    if args.command.is_empty() {
        return Err(CliError::usage("run needs a command after --"));
    }
    // The schedule is built in unit space; --unit scales it to wall seconds
    // inside the supervisor instead.
    let sched_flags = StrategyFlags {
        strategy: args.strategy.strategy.clone(),
        delta: args.strategy.delta,
        s: args.strategy.s,
        unit: Some(1.0),
    };
    let spec = schedule_spec(&sched_flags, &file)?;
    let mut sched: TtlSchedule = spec.build().expect("validated");
    let unit = args.strategy.unit.or(file.unit).unwrap_or(1.0);
    if unit <= 0.0 {
        return Err(CliError::usage("--unit must be positive"));
    }
    let mode = match args
        .mode
        .clone()
        .or_else(|| file.mode.clone())
        .unwrap_or_else(|| "restart".into())
        .as_str()
    {
        "restart" => Mode::Restart,
        "cached" => Mode::Cached { capacity: args.capacity.or(file.capacity).unwrap_or(1) },
        other => {
            return Err(CliError::usage(format!(
                "unknown mode {other:?} (expected restart or cached)"
            )))
        }
    };
    let limits = Limits {
        max_attempts: args.max_attempts.or(file.max_attempts),
        max_wall_clock: args
            .max_wall
            .or(file.max_wall)
            .map(Duration::from_secs_f64),
    };
    let mut opts = SupervisorOptions {
        log_path: args.log.clone().or_else(|| file.log.clone()),
        inherit_stdio: true,
        ..SupervisorOptions::default()
    };
    if let Some(g) = args.grace.or(file.grace) {
        opts.grace = Duration::from_secs_f64(g);
    }
    let mut cmd = CommandSpec::new(args.command[0].clone()).args(args.command[1..].iter().cloned());
    if let Some(codes) = parse_success_codes(&args.success_codes, &file)? {
        cmd.success_codes = codes;
    }
    let seed = args.common.seed.or(file.seed).unwrap_or(0);
    let mut rng = SampleStream::new(seed, 0);
    let report = supervise(&cmd, &mut sched, unit, mode, limits, &opts, &mut rng)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let summary = serde_json::json!({
        "outcome": report.outcome,
        "attempts": report.attempts,
        "success": report.success(),
    });
    println!("{summary}");
    Ok(match report.outcome {
        FinalOutcome::Success => 0,
        FinalOutcome::LimitsExhausted => 2,
        FinalOutcome::SpawnError | FinalOutcome::ClockAnomaly => 3,
    })
}

fn parse_success_codes(
    flag: &Option<String>,
    file: &FileConfig,
) -> CliResult<Option<Vec<i32>>> {
    if let Some(text) = flag {
        let codes: Result<Vec<i32>, _> = text.split(',').map(|p| p.trim().parse()).collect();
        return codes
            .map(Some)
            .map_err(|_| CliError::usage(format!("--success-codes: expected integers, got {text:?}")));
    }
    Ok(file.success_codes.clone())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match &cli.cmd {
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Sequence(args) => cmd_sequence(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Run(args) => cmd_run(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.code);
        }
    }
}
