//! TTL-sequence generators and speed schedules.
//!
//! Every restart strategy is a stateful generator of positive TTLs:
//!
//! - `Fixed` — the optimal single threshold, when the distribution is known;
//! - `Exponential` — r_i = (1+delta)^(i-1) * s, a geometric ramp;
//! - `LubyCounter` — the universal 1,1,2,1,1,2,4,... sequence, generated by
//!   a binary counter: incrementing c emits u*2^0 .. u*2^tz(c) where tz is
//!   the index of c's lowest set bit (all the bits that flipped);
//! - `Zeta2Search` — random TTLs drawn from the zeta(2) law;
//! - `BinSearch` — random TTLs drawn as binary strings: start with "1",
//!   finalize with probability 1/2 or append a uniform bit.
//!
//! Speed schedules drive the pause/resume wide search: copy i runs at
//! alpha_i. All integer-valued generators scale by a configurable unit.

use serde::{Deserialize, Serialize};

use crate::dist::{sample_zeta2_integer, SampleStream};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScheduleError {
    #[error("fixed TTL must be positive (got {0})")]
    BadDelta(f64),
    #[error("exponential schedule needs s >= 1 and delta >= 0 (got s={s}, delta={delta})")]
    BadExponential { s: f64, delta: f64 },
    #[error("unit must be positive (got {0})")]
    BadUnit(f64),
    #[error("speed table must be nonempty, positive, and nonincreasing")]
    BadSpeedTable,
}

/// Serializable description of a TTL schedule, as found in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Fixed { delta: f64 },
    Exponential {
        #[serde(default = "default_one")]
        s: f64,
        #[serde(default = "default_one")]
        delta: f64,
    },
    Luby {
        #[serde(default = "default_one")]
        unit: f64,
    },
    Zeta2 {
        #[serde(default = "default_one")]
        unit: f64,
    },
    Bin {
        #[serde(default = "default_one")]
        unit: f64,
    },
}

fn default_one() -> f64 {
    1.0
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<TtlSchedule, ScheduleError> {
        match *self {
            ScheduleSpec::Fixed { delta } => TtlSchedule::fixed(delta),
            ScheduleSpec::Exponential { s, delta } => TtlSchedule::exponential(s, delta),
            ScheduleSpec::Luby { unit } => TtlSchedule::luby(unit),
            ScheduleSpec::Zeta2 { unit } => TtlSchedule::zeta2_search(unit),
            ScheduleSpec::Bin { unit } => TtlSchedule::bin_search(unit),
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            ScheduleSpec::Fixed { .. } => "fixed",
            ScheduleSpec::Exponential { .. } => "exponential",
            ScheduleSpec::Luby { .. } => "luby",
            ScheduleSpec::Zeta2 { .. } => "zeta2",
            ScheduleSpec::Bin { .. } => "bin",
        }
    }

    /// Up to two numeric parameters, for export columns.
    pub fn params(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            ScheduleSpec::Fixed { delta } => (Some(delta), None),
            ScheduleSpec::Exponential { s, delta } => (Some(s), Some(delta)),
            ScheduleSpec::Luby { unit }
            | ScheduleSpec::Zeta2 { unit }
            | ScheduleSpec::Bin { unit } => (Some(unit), None),
        }
    }
}

/// A stateful TTL generator. Deterministic kinds ignore the rng argument
/// entirely; randomized kinds consume it, so replaying with the same stream
/// replays the TTL sequence.
#[derive(Debug, Clone)]
pub enum TtlSchedule {
    Fixed { delta: f64 },
    Exponential { s: f64, delta: f64, next: f64 },
    LubyCounter {
        unit: f64,
        counter: u64,
        pending: Vec<f64>,
        cursor: usize,
    },
    Zeta2Search { unit: f64 },
    BinSearch { unit: f64, cap_hits: u64 },
}

impl TtlSchedule {
    pub fn fixed(delta: f64) -> Result<Self, ScheduleError> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(ScheduleError::BadDelta(delta));
        }
        Ok(TtlSchedule::Fixed { delta })
    }

    pub fn exponential(s: f64, delta: f64) -> Result<Self, ScheduleError> {
        if !(s >= 1.0 && delta >= 0.0 && s.is_finite() && delta.is_finite()) {
            return Err(ScheduleError::BadExponential { s, delta });
        }
        Ok(TtlSchedule::Exponential { s, delta, next: s })
    }

    pub fn luby(unit: f64) -> Result<Self, ScheduleError> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(ScheduleError::BadUnit(unit));
        }
        Ok(TtlSchedule::LubyCounter {
            unit,
            counter: 0,
            pending: Vec::with_capacity(8),
            cursor: 0,
        })
    }

    pub fn zeta2_search(unit: f64) -> Result<Self, ScheduleError> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(ScheduleError::BadUnit(unit));
        }
        Ok(TtlSchedule::Zeta2Search { unit })
    }

    pub fn bin_search(unit: f64) -> Result<Self, ScheduleError> {
        if !(unit > 0.0 && unit.is_finite()) {
            return Err(ScheduleError::BadUnit(unit));
        }
        Ok(TtlSchedule::BinSearch { unit, cap_hits: 0 })
    }

    /// Emit the next TTL (always > 0).
    #[inline]
    pub fn next_ttl(&mut self, rng: &mut SampleStream) -> f64 {
        match self {
            TtlSchedule::Fixed { delta } => *delta,
            TtlSchedule::Exponential { delta, next, .. } => {
                let v = *next;
                *next = v * (1.0 + *delta);
                v
            }
            TtlSchedule::LubyCounter { unit, counter, pending, cursor } => {
                if *cursor == pending.len() {
                    *counter += 1;
                    let tz = counter.trailing_zeros();
                    pending.clear();
                    *cursor = 0;
                    // Ascending within the step: u*2^0, u*2^1, ..., u*2^tz.
                    for i in 0..=tz {
                        pending.push(*unit * (1u64 << i) as f64);
                    }
                }
                let v = pending[*cursor];
                *cursor += 1;
                v
            }
            TtlSchedule::Zeta2Search { unit } => *unit * sample_zeta2_integer(rng) as f64,
            TtlSchedule::BinSearch { unit, cap_hits } => {
                let (r, capped) = sample_bin_integer(rng);
                if capped {
                    *cap_hits += 1;
                }
                *unit * r as f64
            }
        }
    }

    /// How often the 63-bit length cap of the BIN sampler fired (zero for
    /// every other kind). Each hit has probability 2^-63.
    pub fn bin_cap_hits(&self) -> u64 {
        match self {
            TtlSchedule::BinSearch { cap_hits, .. } => *cap_hits,
            _ => 0,
        }
    }
}

/// Draw from the BIN law: a uniform-within-length binary string whose length
/// is geometric(1/2). Lengths are capped at 63 bits; the flag reports a cap
/// hit.
#[inline]
fn sample_bin_integer(rng: &mut SampleStream) -> (u64, bool) {
    // P[length = k] = 2^-k realized through trailing zeros of one word.
    let tz = rng.next_u64().trailing_zeros();
    let capped = tz >= 62; // would ask for length > 63
    let len = (tz + 1).min(63);
    if len == 1 {
        return (1, capped);
    }
    let low = rng.next_u64() & ((1u64 << (len - 1)) - 1);
    ((1u64 << (len - 1)) | low, capped)
}

/// Number of bits in t's binary representation: 1 + floor(log2 t).
pub fn binary_length(t: u64) -> u32 {
    assert!(t > 0);
    1 + t.ilog2()
}

/// All TTLs emitted by a unit Luby counter while its counter runs from 1 to
/// 2^k inclusive, in emission order. As a multiset this equals S_k:
/// {2^(k-j) with multiplicity 2^j, j = 0..k}, of size 2^(k+1) - 1.
pub fn luby_prefix_multiset(k: u32) -> Vec<f64> {
    assert!(k <= 20, "S_k grows as 2^(k+1); k > 20 is not supported");
    let mut out = Vec::with_capacity((1usize << (k + 1)) - 1);
    for c in 1u64..=(1 << k) {
        for i in 0..=c.trailing_zeros() {
            out.push((1u64 << i) as f64);
        }
    }
    out
}

/// Serializable description of a speed schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedSpec {
    Harmonic,
    PolyLog,
    Custom { table: Vec<f64> },
}

impl SpeedSpec {
    pub fn build(&self) -> Result<SpeedSchedule, ScheduleError> {
        match self {
            SpeedSpec::Harmonic => Ok(SpeedSchedule::harmonic()),
            SpeedSpec::PolyLog => Ok(SpeedSchedule::poly_log()),
            SpeedSpec::Custom { table } => SpeedSchedule::custom(table.clone()),
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            SpeedSpec::Harmonic => "harmonic",
            SpeedSpec::PolyLog => "poly_log",
            SpeedSpec::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SpeedKind {
    /// alpha_i = 1/i.
    Harmonic,
    /// alpha_1 = 1, alpha_2 = 1/2, alpha_i = 1/(i ln^2 i) beyond.
    PolyLog,
    /// Finite table, extended by repeating the last ratio.
    Custom { table: Vec<f64>, last_ratio: f64 },
}

/// Map from copy index i >= 1 to its execution speed alpha_i in (0, 1].
///
/// The doubling condition alpha_{2i} >= c * alpha_i (for the schedule's
/// declared constant c) is what the wide-search analysis relies on;
/// [`SpeedSchedule::valid_up_to`] reports how far it is known to hold.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedSchedule {
    kind: SpeedKind,
    declared_c: f64,
    valid_up_to: u64,
}

impl SpeedSchedule {
    pub fn harmonic() -> Self {
        // alpha_{2i}/alpha_i = 1/2 exactly, at every i.
        SpeedSchedule {
            kind: SpeedKind::Harmonic,
            declared_c: 0.5,
            valid_up_to: u64::MAX,
        }
    }

    pub fn poly_log() -> Self {
        // The ratio alpha_{2i}/alpha_i = (i ln^2 i)/(2i ln^2 2i) bottoms out
        // at ~0.188 (i = 3) and climbs towards 1/2, so 0.15 is a safe
        // declared constant at every horizon.
        SpeedSchedule {
            kind: SpeedKind::PolyLog,
            declared_c: 0.15,
            valid_up_to: u64::MAX,
        }
    }

    pub fn custom(table: Vec<f64>) -> Result<Self, ScheduleError> {
        if table.is_empty() || table[0] > 1.0 {
            return Err(ScheduleError::BadSpeedTable);
        }
        for w in table.windows(2) {
            if !(w[1] > 0.0 && w[1] <= w[0]) {
                return Err(ScheduleError::BadSpeedTable);
            }
        }
        if !(table[0] > 0.0 && table[0].is_finite()) {
            return Err(ScheduleError::BadSpeedTable);
        }
        let last_ratio = if table.len() >= 2 {
            table[table.len() - 1] / table[table.len() - 2]
        } else {
            1.0
        };
        // Declared constant: the worst doubling ratio realized inside the
        // table (1.0 for tables too short to contain a doubled index).
        let mut declared_c: f64 = 1.0;
        for i in 1..=table.len() / 2 {
            declared_c = declared_c.min(table[2 * i - 1] / table[i - 1]);
        }
        let mut sched = SpeedSchedule {
            kind: SpeedKind::Custom { table, last_ratio },
            declared_c,
            valid_up_to: u64::MAX,
        };
        // Geometric extension decays exponentially, so the doubling
        // condition eventually fails; record where.
        let mut horizon = u64::MAX;
        for i in 1..=(1u64 << 19) {
            if sched.speed(2 * i) < sched.declared_c * sched.speed(i) {
                horizon = 2 * i - 1;
                break;
            }
        }
        sched.valid_up_to = horizon;
        Ok(sched)
    }

    /// alpha_i for i >= 1.
    #[inline]
    pub fn speed(&self, i: u64) -> f64 {
        1.0 / self.inv_speed(i)
    }

    /// 1/alpha_i. Exact (an integer-valued f64) for Harmonic, which the
    /// engine exploits for exact slot arithmetic.
    #[inline]
    pub fn inv_speed(&self, i: u64) -> f64 {
        debug_assert!(i >= 1);
        match &self.kind {
            SpeedKind::Harmonic => i as f64,
            SpeedKind::PolyLog => match i {
                1 => 1.0,
                2 => 2.0,
                _ => {
                    let x = i as f64;
                    let l = x.ln();
                    x * l * l
                }
            },
            SpeedKind::Custom { table, last_ratio } => {
                let n = table.len() as u64;
                if i <= n {
                    1.0 / table[(i - 1) as usize]
                } else {
                    1.0 / (table[(n - 1) as usize] * last_ratio.powi((i - n).min(1 << 30) as i32))
                }
            }
        }
    }

    /// The constant this schedule promises for the doubling condition.
    pub fn assumption_constant(&self) -> f64 {
        self.declared_c
    }

    /// Largest horizon where the doubling condition with the declared
    /// constant is known to hold (u64::MAX when it holds everywhere).
    pub fn valid_up_to(&self) -> u64 {
        self.valid_up_to
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self.kind, SpeedKind::Harmonic)
    }
}

/// Check the wide-search speed assumptions on 1..=horizon: alpha
/// nonincreasing, and alpha_{2i} >= c * alpha_i for all 2i <= horizon.
pub fn validate_speed_schedule(sched: &SpeedSchedule, c: f64, horizon: u64) -> bool {
    assert!(horizon >= 2);
    let mut prev = sched.speed(1);
    for i in 2..=horizon {
        let a = sched.speed(i);
        if a > prev {
            return false;
        }
        prev = a;
    }
    for i in 1..=horizon / 2 {
        if sched.speed(2 * i) < c * sched.speed(i) {
            return false;
        }
    }
    true
}
