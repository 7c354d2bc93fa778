//! Restart strategies for Las Vegas algorithms.
//!
//! A Las Vegas algorithm is always correct when it stops; only its running
//! time is random. When the runtime distribution is heavy-tailed, killing a
//! run once it exceeds a time-to-live (TTL) and starting over can reduce the
//! expected time to success by orders of magnitude. This crate bundles:
//!
//! - [`dist`] — runtime-distribution models with exact sampling and CDFs,
//! - [`analysis`] — optimal TTL thresholds, expected-cost curves, profiles,
//! - [`strategy`] — TTL-sequence generators (fixed, exponential, Luby
//!   counter, zeta(2), random-binary) and speed schedules,
//! - [`engine`] — deterministic virtual-time simulators for the
//!   stop/restart, pause/resume (wide), suspension-cache, and
//!   wide-to-restart execution models,
//! - [`bench`] — a seeded, order-independent Monte Carlo harness with
//!   CSV/JSONL export.
//!
//! Everything is deterministic given a `(seed, stream_id)` pair; trials and
//! simulated copies derive their own independent streams, so results do not
//! depend on thread count or execution order.

pub mod analysis;
pub mod bench;
pub mod dist;
pub mod engine;
pub mod strategy;
