//! Virtual-time simulators for the execution models.
//!
//! Four ways to drive a Las Vegas algorithm whose run time is drawn from a
//! [`RuntimeDistribution`]:
//!
//! - [`run_restart`] — kill on TTL expiry, start fresh (stop/restart model);
//! - [`run_cached`] — suspend on expiry and maybe resume later, with a
//!   bounded cache of suspended instances;
//! - [`run_wide`] — infinitely many copies at decaying speeds, delivered in
//!   one-second slots; computed in closed form, no event queue;
//! - [`run_wide_as_restart`] — the wide search compiled to the restart model
//!   by per-copy budget doubling.
//!
//! Every simulation is a pure function of (inputs, seed): same seed, same
//! `SimOutcome`, bit for bit. Caps turn divergence into `censored = true`
//! rather than an error.

use crate::dist::{RuntimeDistribution, Sample, SampleStream};
use crate::strategy::{SpeedSchedule, TtlSchedule};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error("speed schedule invalid at horizon {horizon} (valid up to {valid_up_to})")]
    ScheduleInvalid { horizon: u64, valid_up_to: u64 },
}

/// Result of one simulated trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOutcome {
    /// Virtual seconds consumed across all copies/attempts.
    pub total_work: f64,
    /// Number of fresh starts.
    pub attempts: u64,
    /// 1-based index of the fresh start that succeeded, if any.
    pub success_attempt: Option<u64>,
    /// Wide model only: the global clock at success.
    pub wall_time: Option<f64>,
    /// True when a cap stopped the run before success.
    pub censored: bool,
}

/// One live instance: its drawn running time (fixed at creation) and how far
/// it has already run. `progress < sampled_x` while the instance lives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunInstance {
    pub sampled_x: Sample,
    pub progress: f64,
}

/// Stopping limits. At least one should be set for schedules that can
/// diverge (exponential search on heavy-tailed inputs).
#[derive(Debug, Clone, Copy, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default)]
    pub max_attempts: Option<u64>,
    #[serde(default)]
    pub max_total_work: Option<f64>,
}

impl Caps {
    pub const NONE: Caps = Caps { max_attempts: None, max_total_work: None };

    pub fn attempts(n: u64) -> Caps {
        Caps { max_attempts: Some(n), max_total_work: None }
    }

    pub fn total_work(w: f64) -> Caps {
        Caps { max_attempts: None, max_total_work: Some(w) }
    }

    fn attempt_limit(&self) -> u64 {
        self.max_attempts.unwrap_or(u64::MAX)
    }

    fn work_limit(&self) -> f64 {
        self.max_total_work.unwrap_or(f64::INFINITY)
    }
}

/// Stop/restart: draw a TTL, run a fresh instance, kill it on expiry.
pub fn run_restart(
    dist: &RuntimeDistribution,
    sched: &mut TtlSchedule,
    rng: &mut SampleStream,
    caps: Caps,
) -> SimOutcome {
    let max_attempts = caps.attempt_limit();
    let max_work = caps.work_limit();
    let mut total_work = 0.0;
    let mut attempts = 0u64;
    loop {
        if attempts >= max_attempts || total_work >= max_work {
            return SimOutcome {
                total_work,
                attempts,
                success_attempt: None,
                wall_time: None,
                censored: true,
            };
        }
        let ttl = sched.next_ttl(rng);
        let x = dist.sample(rng);
        attempts += 1;
        if x.within(ttl) {
            total_work += x.finite().unwrap();
            return SimOutcome {
                total_work,
                attempts,
                success_attempt: Some(attempts),
                wall_time: None,
                censored: false,
            };
        }
        total_work += ttl;
    }
}

/// Like [`run_restart`], but expiry suspends the instance instead of killing
/// it. A later, longer TTL resumes the suspended instance with the largest
/// progress strictly below it; the cache holds at most `capacity` suspended
/// instances, evicting smallest-progress (oldest on ties) beyond that.
/// `capacity = 0` degenerates exactly to [`run_restart`].
pub fn run_cached(
    dist: &RuntimeDistribution,
    sched: &mut TtlSchedule,
    capacity: usize,
    rng: &mut SampleStream,
    caps: Caps,
) -> SimOutcome {
    struct Suspended {
        inst: RunInstance,
        // Fresh-start ordinal, for success_attempt on resume.
        attempt_no: u64,
        // Insertion counter; smaller = older, used for eviction ties.
        born: u64,
    }

    let max_attempts = caps.attempt_limit();
    let max_work = caps.work_limit();
    let mut total_work = 0.0;
    let mut attempts = 0u64;
    let mut born = 0u64;
    let mut cache: Vec<Suspended> = Vec::new();
    loop {
        if attempts >= max_attempts || total_work >= max_work {
            return SimOutcome {
                total_work,
                attempts,
                success_attempt: None,
                wall_time: None,
                censored: true,
            };
        }
        let ttl = sched.next_ttl(rng);
        // Resume candidate: largest progress strictly below the TTL; oldest
        // on ties.
        let mut pick: Option<usize> = None;
        for (idx, s) in cache.iter().enumerate() {
            if s.inst.progress < ttl
                && pick.is_none_or(|p| s.inst.progress > cache[p].inst.progress)
            {
                pick = Some(idx);
            }
        }
        if let Some(idx) = pick {
            let s = cache.swap_remove(idx);
            if s.inst.sampled_x.within(ttl) {
                total_work += s.inst.sampled_x.finite().unwrap() - s.inst.progress;
                return SimOutcome {
                    total_work,
                    attempts,
                    success_attempt: Some(s.attempt_no),
                    wall_time: None,
                    censored: false,
                };
            }
            total_work += ttl - s.inst.progress;
            cache.push(Suspended {
                inst: RunInstance { progress: ttl, ..s.inst },
                ..s
            });
            // Cache size is unchanged; no eviction needed.
            continue;
        }
        // Fresh start.
        let x = dist.sample(rng);
        attempts += 1;
        if x.within(ttl) {
            total_work += x.finite().unwrap();
            return SimOutcome {
                total_work,
                attempts,
                success_attempt: Some(attempts),
                wall_time: None,
                censored: false,
            };
        }
        total_work += ttl;
        cache.push(Suspended {
            inst: RunInstance { sampled_x: x, progress: ttl },
            attempt_no: attempts,
            born: { born += 1; born },
        });
        if cache.len() > capacity {
            let mut evict = 0;
            for idx in 1..cache.len() {
                let (a, b) = (&cache[idx], &cache[evict]);
                if a.inst.progress < b.inst.progress
                    || (a.inst.progress == b.inst.progress && a.born < b.born)
                {
                    evict = idx;
                }
            }
            cache.swap_remove(evict);
        }
    }
}

/// Pause/resume wide search: copy i runs at speed alpha_i and receives its
/// run time in one-second slots, so it has completed floor(t * alpha_i)
/// seconds at global time t and finishes at the smallest t with
/// floor(t * alpha_i) >= ceil(x_i). Copies instantiate lazily at t = 1/alpha_i
/// and everything is computed in closed form per copy.
///
/// `attempts` counts instantiated copies; `wall_time` is the finishing time
/// T*; `total_work` is W(T*), the slot count summed over all live copies with
/// each copy capped at its own completion.
pub fn run_wide(
    dist: &RuntimeDistribution,
    speeds: &SpeedSchedule,
    rng: &SampleStream,
    caps: Caps,
) -> Result<SimOutcome, EngineError> {
    // An enumeration bound: the attempts cap if given, else enough copies
    // that the work cap must be breached first (every live copy completes at
    // least one slot by the frontier).
    let copy_limit = caps
        .max_attempts
        .unwrap_or(u64::MAX)
        .min(match caps.max_total_work {
            Some(w) => w as u64 + 2,
            None => u64::MAX,
        });

    // Pass 1: find the winner — smallest finish time, lowest copy index on
    // ties. Each copy draws once from its own substream; the slot counts are
    // kept so the accounting pass below needs no re-sampling. A forever draw
    // is recorded as infinite slots.
    let mut best: Option<(f64, u64)> = None; // (finish, copy)
    let mut needed: Vec<f64> = Vec::new(); // slots copy i needs, at [i - 1]
    let mut i = 1u64;
    while i <= copy_limit {
        let inv = speeds.inv_speed(i);
        if let Some((t, _)) = best {
            if inv > t {
                break;
            }
        }
        let slots = match dist.sample(&mut rng.substream(i)).finite() {
            Some(x) => {
                let slots = x.ceil().max(1.0);
                let finish = slots * inv;
                if best.is_none_or(|(t, _)| finish < t) {
                    best = Some((finish, i));
                }
                slots
            }
            None => f64::INFINITY,
        };
        needed.push(slots);
        i += 1;
    }
    let frontier = needed.len() as u64; // highest copy index instantiated
    if frontier > speeds.valid_up_to() {
        return Err(EngineError::ScheduleInvalid {
            horizon: frontier,
            valid_up_to: speeds.valid_up_to(),
        });
    }

    match best {
        Some((t_star, winner)) => {
            // W(T*): the winner is charged exactly its own slots; every
            // other copy i with 1/alpha_i <= T* is charged
            // min(floor(T* alpha_i), ceil(x_i)).
            let mut work = 0.0;
            let mut n = 0u64;
            for (ix, &need) in needed.iter().enumerate() {
                let i = ix as u64 + 1;
                let inv = speeds.inv_speed(i);
                if inv > t_star {
                    break;
                }
                n = i;
                work += if i == winner {
                    need
                } else {
                    (t_star / inv).floor().min(need)
                };
            }
            let censored = work >= caps.work_limit();
            Ok(SimOutcome {
                total_work: work,
                attempts: n,
                success_attempt: if censored { None } else { Some(winner) },
                wall_time: Some(t_star),
                censored,
            })
        }
        None => {
            // Nothing finished within the copy limit: report the work burned
            // by the time the next copy would have been instantiated.
            let horizon = speeds.inv_speed(frontier + 1);
            let mut work = 0.0;
            for (ix, &need) in needed.iter().enumerate() {
                let i = ix as u64 + 1;
                work += (horizon / speeds.inv_speed(i)).floor().min(need);
            }
            Ok(SimOutcome {
                total_work: work,
                attempts: frontier,
                success_attempt: None,
                wall_time: None,
                censored: true,
            })
        }
    }
}

/// The wide search compiled to the stop/restart model. Whenever the wide
/// simulation would resume copy i past accumulated time t, a fresh instance
/// with budget 2t replaces it (a new draw, started from scratch). Per copy
/// the budgets are 1, 2, 4, ...: budget 2^k lands at global time
/// (2^(k-1) + 1)/alpha_i, the slot boundary where the wide copy would first
/// exceed 2^(k-1) accumulated seconds. Events are processed in global-time
/// order, lowest copy first on ties; a fresh run succeeds if its draw fits
/// the budget (charging the draw), else the full budget is burned.
pub fn run_wide_as_restart(
    dist: &RuntimeDistribution,
    speeds: &SpeedSchedule,
    rng: &SampleStream,
    caps: Caps,
) -> Result<SimOutcome, EngineError> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    // (time, copy, budget exponent): ordered by time, then copy index.
    #[derive(PartialEq)]
    struct Event(f64, u64, u32);
    impl Eq for Event {}
    impl PartialOrd for Event {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Event {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0
                .partial_cmp(&other.0)
                .unwrap()
                .then(self.1.cmp(&other.1))
                .then(self.2.cmp(&other.2))
        }
    }

    let max_attempts = caps.attempt_limit();
    let max_work = caps.work_limit();
    let mut heap: BinaryHeap<Reverse<Event>> = BinaryHeap::new();
    heap.push(Reverse(Event(speeds.inv_speed(1), 1, 0)));
    let mut streams: Vec<SampleStream> = vec![rng.substream(1)];
    let mut frontier = 1u64;
    let mut total_work = 0.0;
    let mut attempts = 0u64;

    while let Some(Reverse(Event(_, copy, exp))) = heap.pop() {
        if attempts >= max_attempts || total_work >= max_work {
            return Ok(SimOutcome {
                total_work,
                attempts,
                success_attempt: None,
                wall_time: None,
                censored: true,
            });
        }
        if copy == frontier && exp == 0 {
            // This copy just came alive; schedule the birth of the next one.
            frontier += 1;
            if frontier > speeds.valid_up_to() {
                return Err(EngineError::ScheduleInvalid {
                    horizon: frontier,
                    valid_up_to: speeds.valid_up_to(),
                });
            }
            heap.push(Reverse(Event(speeds.inv_speed(frontier), frontier, 0)));
            streams.push(rng.substream(frontier));
        }
        let budget = (1u64 << exp) as f64;
        let x = dist.sample(&mut streams[(copy - 1) as usize]);
        attempts += 1;
        if x.within(budget) {
            total_work += x.finite().unwrap();
            return Ok(SimOutcome {
                total_work,
                attempts,
                success_attempt: Some(attempts),
                wall_time: None,
                censored: false,
            });
        }
        total_work += budget;
        // Next fresh run for this copy: double the budget, land at the slot
        // boundary where the wide copy would first exceed `budget` seconds.
        let next_time = (budget + 1.0) * speeds.inv_speed(copy);
        heap.push(Reverse(Event(next_time, copy, exp + 1)));
    }
    unreachable!("event heap never drains");
}
