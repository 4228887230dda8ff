//! Deterministic discrete-event engine.
//!
//! Events are ordered by `(at, seq)` where `seq` is a global insertion
//! counter, so two runs of the same scenario with the same seed deliver
//! exactly the same sequence. Randomness comes from named streams derived
//! from the scenario seed; each component owns its own stream.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Simulated time in integer microseconds since scenario start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000)
    }

    /// Rounds to the nearest microsecond; negative input saturates at zero.
    pub fn from_secs_f64(s: f64) -> Self {
        SimTime((s * 1e6).round().max(0.0) as u64)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(rhs.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Event bodies must name their kind for the trace.
pub trait EventKind {
    fn kind(&self) -> &str;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub at: SimTime,
    pub seq: u64,
    pub target: String,
    pub payload: P,
}

struct Queued<P>(Event<P>);

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        (self.0.at, self.0.seq) == (other.0.at, other.0.seq)
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // BinaryHeap is a max-heap; invert so the smallest (at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.0.at, other.0.seq).cmp(&(self.0.at, self.0.seq))
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KernelError {
    #[error("cannot schedule at {at} before current clock {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
}

/// One delivered event, as recorded in the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub t: SimTime,
    pub seq: u64,
    pub target: String,
    pub kind: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Newline-delimited `t_us,seq,target,event_kind` records.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 32);
        for r in &self.records {
            out.push_str(&format!("{},{},{},{}\n", r.t.0, r.seq, r.target, r.kind));
        }
        out
    }

    /// Hex SHA-256 of the serialized trace.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for r in &self.records {
            hasher.update(format!("{},{},{},{}\n", r.t.0, r.seq, r.target, r.kind).as_bytes());
        }
        hex_string(&hasher.finalize())
    }

    fn extend(&mut self, other: &Trace) {
        self.records.extend(other.records.iter().cloned());
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// A named, seeded random stream. The generator is ChaCha8 keyed by
/// SHA-256(scenario seed || name), which is stable across platforms.
#[derive(Debug, Clone)]
pub struct RngStream {
    name: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn derive(scenario_seed: u64, name: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(scenario_seed.to_le_bytes());
        hasher.update(name.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        let mut seed_bytes = [0u8; 8];
        seed_bytes.copy_from_slice(&key[..8]);
        RngStream {
            name: name.to_string(),
            seed: u64::from_le_bytes(seed_bytes),
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The 64-bit stream seed (leading bytes of the derived key).
    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Single-threaded event loop. Instances share nothing and may run in
/// parallel on separate threads.
pub struct Kernel<P> {
    clock: SimTime,
    next_seq: u64,
    seed: u64,
    queue: BinaryHeap<Queued<P>>,
    trace: Trace,
}

impl<P: EventKind> Kernel<P> {
    pub fn new(seed: u64) -> Self {
        Kernel {
            clock: SimTime::ZERO,
            next_seq: 0,
            seed,
            queue: BinaryHeap::new(),
            trace: Trace::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.clock
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Queues an event and returns its sequence number.
    pub fn schedule(
        &mut self,
        at: SimTime,
        target: impl Into<String>,
        payload: P,
    ) -> Result<u64, KernelError> {
        if at < self.clock {
            return Err(KernelError::SchedulingInPast { at, now: self.clock });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Queued(Event {
            at,
            seq,
            target: target.into(),
            payload,
        }));
        Ok(seq)
    }

    pub fn rng(&self, name: &str) -> RngStream {
        RngStream::derive(self.seed, name)
    }

    /// Delivers every queued event with `at <= t_end` (including ones the
    /// handler schedules along the way) and leaves the clock at `t_end`.
    /// Returns the records delivered by this call.
    pub fn run_until_with<E, F>(&mut self, t_end: SimTime, mut deliver: F) -> Result<Trace, E>
    where
        E: From<KernelError>,
        F: FnMut(&mut Kernel<P>, Event<P>) -> Result<(), E>,
    {
        if t_end < self.clock {
            return Err(KernelError::SchedulingInPast {
                at: t_end,
                now: self.clock,
            }
            .into());
        }
        let mut segment = Trace::default();
        while self.queue.peek().is_some_and(|q| q.0.at <= t_end) {
            let Queued(ev) = self.queue.pop().expect("peeked");
            debug_assert!(ev.at >= self.clock);
            self.clock = ev.at;
            segment.records.push(TraceRecord {
                t: ev.at,
                seq: ev.seq,
                target: ev.target.clone(),
                kind: ev.payload.kind().to_string(),
            });
            deliver(self, ev)?;
        }
        self.clock = t_end;
        self.trace.extend(&segment);
        Ok(segment)
    }

    /// Drains events up to `t_end` without a handler.
    pub fn run_until(&mut self, t_end: SimTime) -> Result<Trace, KernelError> {
        self.run_until_with(t_end, |_, _| Ok::<(), KernelError>(()))
    }

    /// Everything delivered since construction.
    pub fn trace(&self) -> &Trace {
        &self.trace
    }
}
