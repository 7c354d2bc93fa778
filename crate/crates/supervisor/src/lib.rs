//! Run a real external command under a restart strategy.
//!
//! The supervisor drives one child process at a time. Each attempt grants the
//! child a TTL drawn from the schedule (scaled by `unit` seconds); a child
//! that exits with a configured success code before its TTL wins. On expiry
//! the child is either killed (restart mode: SIGTERM, a grace period, then
//! SIGKILL to its process group) or suspended with SIGSTOP (cached mode) so a
//! later, longer TTL can resume it with SIGCONT and grant the difference.
//!
//! Suspended children live in a bounded cache mirroring the virtual engine's
//! policy: resume the largest progress strictly below the new TTL, evict the
//! smallest progress (oldest on ties) when over capacity. Whatever happens,
//! no child outlives `supervise` — every spawned process is reaped before it
//! returns, and the report carries all child pids so callers can verify.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::{Child, Command, ExitStatus, Stdio};
use std::time::{Duration, Instant, SystemTime};

use serde::{Deserialize, Serialize};

use restarts::dist::SampleStream;
use restarts::strategy::TtlSchedule;

#[derive(Debug, thiserror::Error)]
pub enum SupervisorError {
    #[error("attempt log {path}: {source}")]
    Log {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// What to run and what counts as success.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandSpec {
    pub program: String,
    pub args: Vec<String>,
    pub env: Vec<(String, String)>,
    pub cwd: Option<PathBuf>,
    /// Exit codes treated as success; empty is not allowed.
    pub success_codes: Vec<i32>,
}

impl CommandSpec {
    pub fn new(program: impl Into<String>) -> Self {
        CommandSpec {
            program: program.into(),
            args: Vec::new(),
            env: Vec::new(),
            cwd: None,
            success_codes: vec![0],
        }
    }

    pub fn arg(mut self, a: impl Into<String>) -> Self {
        self.args.push(a.into());
        self
    }

    pub fn args<I: IntoIterator<Item = S>, S: Into<String>>(mut self, args: I) -> Self {
        self.args.extend(args.into_iter().map(Into::into));
        self
    }

    fn succeeded(&self, status: ExitStatus) -> bool {
        status.code().is_some_and(|c| self.success_codes.contains(&c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Restart,
    Cached { capacity: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Limits {
    /// Cap on attempts (grants), fresh and resumed alike.
    pub max_attempts: Option<u64>,
    /// Cap on total wall-clock time, checked between attempts.
    pub max_wall_clock: Option<Duration>,
}

#[derive(Debug, Clone)]
pub struct Options {
    /// Delay between SIGTERM and SIGKILL on expiry in restart mode.
    pub grace: Duration,
    /// Child poll interval.
    pub poll: Duration,
    /// Append one JSONL AttemptRecord per attempt here, flushed as written.
    pub log_path: Option<PathBuf>,
    /// Inherit stdout/stderr instead of discarding them.
    pub inherit_stdio: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            grace: Duration::from_millis(100),
            poll: Duration::from_millis(1),
            log_path: None,
            inherit_stdio: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttemptOutcome {
    #[serde(rename = "success")]
    Success,
    #[serde(rename = "killed")]
    Killed,
    #[serde(rename = "suspended")]
    Suspended,
    #[serde(rename = "resumed-then-killed")]
    ResumedThenKilled,
    #[serde(rename = "spawn-error")]
    SpawnError,
}

/// One attempt as it happened. `end_unix_ms >= start_unix_ms` always; a
/// violation is a clock anomaly and aborts the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u64,
    pub ttl_s: f64,
    pub start_unix_ms: u64,
    pub end_unix_ms: u64,
    pub outcome: AttemptOutcome,
    pub exit_code: Option<i32>,
    /// Cumulative seconds granted to this child (cached mode only).
    pub progress_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FinalOutcome {
    Success,
    LimitsExhausted,
    SpawnError,
    ClockAnomaly,
}

#[derive(Debug)]
pub struct Report {
    pub outcome: FinalOutcome,
    /// Total attempts (grants), counting resumes.
    pub attempts: u64,
    pub records: Vec<AttemptRecord>,
    /// Every child pid ever spawned, for orphan checks.
    pub pids: Vec<u32>,
}

impl Report {
    pub fn success(&self) -> bool {
        self.outcome == FinalOutcome::Success
    }
}

/// True if `pid` still exists (including as a zombie or stopped process).
pub fn pid_alive(pid: u32) -> bool {
    unsafe { libc::kill(pid as libc::pid_t, 0) == 0 }
}

fn signal_group(pid: u32, sig: libc::c_int) {
    // The child is its own process group leader; hit the whole group.
    unsafe {
        libc::kill(-(pid as libc::pid_t), sig);
    }
}

fn unix_ms() -> u64 {
    SystemTime::now()
        .duration_since(SystemTime::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct CachedChild {
    child: Child,
    pid: u32,
    /// Wall-clock seconds granted so far.
    progress: f64,
    born: u64,
}

enum WaitResult {
    Exited(ExitStatus),
    Expired,
}

/// Poll the child until it exits or the budget elapses.
fn wait_budget(child: &mut Child, budget: Duration, poll: Duration) -> WaitResult {
    let deadline = Instant::now() + budget;
    loop {
        match child.try_wait().expect("try_wait") {
            Some(status) => return WaitResult::Exited(status),
            None => {
                let now = Instant::now();
                if now >= deadline {
                    return WaitResult::Expired;
                }
                std::thread::sleep(poll.min(deadline - now));
            }
        }
    }
}

/// Terminate gracefully: SIGTERM, wait out the grace period, SIGKILL, reap.
fn kill_and_reap(child: &mut Child, pid: u32, grace: Duration, poll: Duration) -> Option<i32> {
    signal_group(pid, libc::SIGTERM);
    let code = match wait_budget(child, grace, poll) {
        WaitResult::Exited(status) => status.code(),
        WaitResult::Expired => {
            signal_group(pid, libc::SIGKILL);
            child.wait().ok().and_then(|s| s.code())
        }
    };
    code
}

/// Kill a suspended child outright and reap it.
fn kill_suspended(entry: &mut CachedChild) {
    signal_group(entry.pid, libc::SIGKILL);
    // SIGKILL acts on stopped processes too; CONT just speeds up teardown.
    signal_group(entry.pid, libc::SIGCONT);
    let _ = entry.child.wait();
}

struct Logger {
    file: Option<(std::fs::File, String)>,
}

impl Logger {
    fn open(path: &Option<PathBuf>) -> Result<Logger, SupervisorError> {
        let file = match path {
            None => None,
            Some(p) => {
                let f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(p)
                    .map_err(|source| SupervisorError::Log {
                        path: p.display().to_string(),
                        source,
                    })?;
                Some((f, p.display().to_string()))
            }
        };
        Ok(Logger { file })
    }

    fn write(&mut self, rec: &AttemptRecord) -> Result<(), SupervisorError> {
        if let Some((f, path)) = &mut self.file {
            let line = serde_json::to_string(rec).expect("record serializes");
            let io = f
                .write_all(line.as_bytes())
                .and_then(|_| f.write_all(b"\n"))
                .and_then(|_| f.flush());
            io.map_err(|source| SupervisorError::Log { path: path.clone(), source })?;
        }
        Ok(())
    }
}

/// Drive `cmd` under the schedule until success, a limit, or a spawn error.
/// TTLs are `sched` values scaled by `unit` seconds. Randomized schedules
/// consume `rng`, so a run can be replayed exactly from its seed.
pub fn supervise(
    cmd: &CommandSpec,
    sched: &mut TtlSchedule,
    unit: f64,
    mode: Mode,
    limits: Limits,
    opts: &Options,
    rng: &mut SampleStream,
) -> Result<Report, SupervisorError> {
    assert!(unit > 0.0, "unit must be positive seconds");
    assert!(!cmd.program.is_empty(), "program path must be nonempty");
    assert!(!cmd.success_codes.is_empty(), "success code set must be nonempty");

    let capacity = match mode {
        Mode::Restart => 0,
        Mode::Cached { capacity } => capacity,
    };
    let cached_mode = matches!(mode, Mode::Cached { .. });

    let started = Instant::now();
    let mut logger = Logger::open(&opts.log_path)?;
    let mut records: Vec<AttemptRecord> = Vec::new();
    let mut pids: Vec<u32> = Vec::new();
    let mut cache: Vec<CachedChild> = Vec::new();
    let mut attempts = 0u64;
    let mut born = 0u64;

    let outcome = 'driver: loop {
        if limits.max_attempts.is_some_and(|m| attempts >= m) {
            break 'driver FinalOutcome::LimitsExhausted;
        }
        if limits.max_wall_clock.is_some_and(|m| started.elapsed() >= m) {
            break 'driver FinalOutcome::LimitsExhausted;
        }
        let ttl_s = sched.next_ttl(rng) * unit;
        attempts += 1;

        // Prefer resuming the furthest-along suspended child that the new
        // TTL can still advance.
        let mut pick: Option<usize> = None;
        for (idx, c) in cache.iter().enumerate() {
            if c.progress < ttl_s && pick.is_none_or(|p| c.progress > cache[p].progress) {
                pick = Some(idx);
            }
        }

        let start_ms = unix_ms();
        let record = if let Some(idx) = pick {
            let mut entry = cache.remove(idx);
            let grant = Duration::from_secs_f64(ttl_s - entry.progress);
            let resumed_at = Instant::now();
            signal_group(entry.pid, libc::SIGCONT);
            match wait_budget(&mut entry.child, grant, opts.poll) {
                WaitResult::Exited(status) => {
                    let ran = resumed_at.elapsed().as_secs_f64();
                    let outcome = if cmd.succeeded(status) {
                        AttemptOutcome::Success
                    } else {
                        AttemptOutcome::Killed
                    };
                    AttemptRecord {
                        attempt: attempts,
                        ttl_s,
                        start_unix_ms: start_ms,
                        end_unix_ms: unix_ms(),
                        outcome,
                        exit_code: status.code(),
                        progress_s: Some(entry.progress + ran),
                    }
                }
                WaitResult::Expired => {
                    signal_group(entry.pid, libc::SIGSTOP);
                    entry.progress = ttl_s;
                    let pid = entry.pid;
                    cache.push(entry);
                    let evicted_self = evict_over_capacity(&mut cache, capacity) == Some(pid);
                    AttemptRecord {
                        attempt: attempts,
                        ttl_s,
                        start_unix_ms: start_ms,
                        end_unix_ms: unix_ms(),
                        outcome: if evicted_self {
                            AttemptOutcome::ResumedThenKilled
                        } else {
                            AttemptOutcome::Suspended
                        },
                        exit_code: None,
                        progress_s: Some(ttl_s),
                    }
                }
            }
        } else {
            // Fresh spawn, in its own process group so signals reach any
            // descendants too.
            let mut command = Command::new(&cmd.program);
            command.args(&cmd.args).envs(cmd.env.iter().cloned());
            if let Some(dir) = &cmd.cwd {
                command.current_dir(dir);
            }
            if !opts.inherit_stdio {
                command.stdout(Stdio::null()).stderr(Stdio::null());
            }
            command.stdin(Stdio::null());
            std::os::unix::process::CommandExt::process_group(&mut command, 0);
            match command.spawn() {
                Err(_) => {
                    let rec = AttemptRecord {
                        attempt: attempts,
                        ttl_s,
                        start_unix_ms: start_ms,
                        end_unix_ms: unix_ms(),
                        outcome: AttemptOutcome::SpawnError,
                        exit_code: None,
                        progress_s: None,
                    };
                    logger.write(&rec)?;
                    records.push(rec);
                    break 'driver FinalOutcome::SpawnError;
                }
                Ok(mut child) => {
                    let pid = child.id();
                    pids.push(pid);
                    born += 1;
                    match wait_budget(&mut child, Duration::from_secs_f64(ttl_s), opts.poll) {
                        WaitResult::Exited(status) => {
                            let outcome = if cmd.succeeded(status) {
                                AttemptOutcome::Success
                            } else {
                                AttemptOutcome::Killed
                            };
                            AttemptRecord {
                                attempt: attempts,
                                ttl_s,
                                start_unix_ms: start_ms,
                                end_unix_ms: unix_ms(),
                                outcome,
                                exit_code: status.code(),
                                progress_s: None,
                            }
                        }
                        WaitResult::Expired => {
                            if cached_mode {
                                signal_group(pid, libc::SIGSTOP);
                                cache.push(CachedChild {
                                    child,
                                    pid,
                                    progress: ttl_s,
                                    born,
                                });
                                let evicted_self =
                                    evict_over_capacity(&mut cache, capacity) == Some(pid);
                                AttemptRecord {
                                    attempt: attempts,
                                    ttl_s,
                                    start_unix_ms: start_ms,
                                    end_unix_ms: unix_ms(),
                                    outcome: if evicted_self {
                                        AttemptOutcome::Killed
                                    } else {
                                        AttemptOutcome::Suspended
                                    },
                                    exit_code: None,
                                    progress_s: Some(ttl_s),
                                }
                            } else {
                                let code = kill_and_reap(&mut child, pid, opts.grace, opts.poll);
                                AttemptRecord {
                                    attempt: attempts,
                                    ttl_s,
                                    start_unix_ms: start_ms,
                                    end_unix_ms: unix_ms(),
                                    outcome: AttemptOutcome::Killed,
                                    exit_code: code,
                                    progress_s: None,
                                }
                            }
                        }
                    }
                }
            }
        };

        if record.end_unix_ms < record.start_unix_ms {
            break 'driver FinalOutcome::ClockAnomaly;
        }
        let success = record.outcome == AttemptOutcome::Success;
        logger.write(&record)?;
        records.push(record);
        if success {
            break 'driver FinalOutcome::Success;
        }
    };

    // Nothing survives the supervisor: tear down every suspended child.
    for entry in cache.iter_mut() {
        kill_suspended(entry);
    }
    cache.clear();

    Ok(Report { outcome, attempts, records, pids })
}

/// Evict until the cache fits: smallest progress first, oldest on ties.
/// Returns the pid evicted last, if any.
fn evict_over_capacity(cache: &mut Vec<CachedChild>, capacity: usize) -> Option<u32> {
    let mut last = None;
    while cache.len() > capacity {
        let mut evict = 0;
        for idx in 1..cache.len() {
            let (a, b) = (&cache[idx], &cache[evict]);
            if a.progress < b.progress || (a.progress == b.progress && a.born < b.born) {
                evict = idx;
            }
        }
        let mut entry = cache.remove(evict);
        kill_suspended(&mut entry);
        last = Some(entry.pid);
    }
    last
}
