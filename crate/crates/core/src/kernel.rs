//! Deterministic discrete-event engine.
//!
//! Time is an integer nanosecond counter. Events that fire at the same
//! instant are dispatched in ascending sequence order, so a run is a pure
//! function of its configuration and seeds.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::ops::{Add, Sub};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet as HashSet;
use sha2::{Digest, Sha256};

use crate::error::{Fault, KernelError};

/// Nanoseconds since simulation start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative and NaN inputs clamp to zero.
    pub fn from_secs_f64(s: f64) -> Self {
        if s.is_nan() || s <= 0.0 {
            return SimTime::ZERO;
        }
        SimTime((s * 1e9).round() as u64)
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    /// Whole seconds elapsed, used for per-second binning.
    pub const fn whole_secs(self) -> u64 {
        self.0 / 1_000_000_000
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
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

/// Something that can be dispatched by the engine.
pub trait Action {
    /// Short human-readable tag used in fault reports.
    fn label(&self) -> &'static str;
}

/// A queued event. `sequence` breaks ties between equal `fire_at` values.
#[derive(Debug, Clone)]
pub struct Event<A> {
    pub fire_at: SimTime,
    pub sequence: u64,
    pub action: A,
}

impl<A> PartialEq for Event<A> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.sequence == other.sequence
    }
}

impl<A> Eq for Event<A> {}

impl<A> PartialOrd for Event<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Event<A> {
    // Reversed so that BinaryHeap pops the earliest (fire_at, sequence).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// Receives dispatched actions.
pub trait Handler<A> {
    fn handle(&mut self, sched: &mut Scheduler<A>, action: A) -> Result<(), Fault>;
}

impl<A, F> Handler<A> for F
where
    F: FnMut(&mut Scheduler<A>, A) -> Result<(), Fault>,
{
    fn handle(&mut self, sched: &mut Scheduler<A>, action: A) -> Result<(), Fault> {
        self(sched, action)
    }
}

pub struct Scheduler<A> {
    now: SimTime,
    next_sequence: u64,
    queue: BinaryHeap<Event<A>>,
    used_sequences: HashSet<u64>,
    cancelled: HashSet<u64>,
    running: bool,
}

impl<A> Default for Scheduler<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Scheduler<A> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_sequence: 0,
            queue: BinaryHeap::new(),
            used_sequences: HashSet::default(),
            cancelled: HashSet::default(),
            running: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    /// Enqueue `action` at absolute time `at`.
    pub fn schedule(&mut self, at: SimTime, action: A) -> Result<EventHandle, KernelError> {
        while self.used_sequences.contains(&self.next_sequence) {
            self.next_sequence += 1;
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.insert(Event {
            fire_at: at,
            sequence,
            action,
        })
    }

    pub fn schedule_in(&mut self, delay: SimTime, action: A) -> Result<EventHandle, KernelError> {
        self.schedule(self.now + delay, action)
    }

    /// Enqueue a fully-formed event carrying its own sequence number.
    pub fn insert(&mut self, event: Event<A>) -> Result<EventHandle, KernelError> {
        if event.fire_at < self.now {
            return Err(KernelError::InThePast {
                at: event.fire_at,
                now: self.now,
            });
        }
        if !self.used_sequences.insert(event.sequence) {
            return Err(KernelError::DuplicateSequence(event.sequence));
        }
        let handle = EventHandle(event.sequence);
        self.queue.push(event);
        Ok(handle)
    }

    /// Returns false when the event already fired or was cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if !self.used_sequences.contains(&handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Dispatch every event with `fire_at <= end`, including ones scheduled
    /// during dispatch. Leaves the clock at `end`.
    pub fn run_until<H>(&mut self, end: SimTime, handler: &mut H) -> Result<u64, KernelError>
    where
        A: Action,
        H: Handler<A> + ?Sized,
    {
        if self.running {
            return Err(KernelError::AlreadyRunning);
        }
        self.running = true;
        let result = self.dispatch_until(end, handler);
        self.running = false;
        if result.is_ok() && self.now < end {
            self.now = end;
        }
        result
    }

    fn dispatch_until<H>(&mut self, end: SimTime, handler: &mut H) -> Result<u64, KernelError>
    where
        A: Action,
        H: Handler<A> + ?Sized,
    {
        let mut dispatched = 0;
        while let Some(head) = self.queue.peek() {
            if head.fire_at > end {
                break;
            }
            let event = self.queue.pop().expect("peeked");
            self.used_sequences.remove(&event.sequence);
            if self.cancelled.remove(&event.sequence) {
                continue;
            }
            debug_assert!(event.fire_at >= self.now);
            self.now = event.fire_at;
            let label = event.action.label();
            handler
                .handle(self, event.action)
                .map_err(|fault| KernelError::HandlerFault {
                    label,
                    at: event.fire_at,
                    fault,
                })?;
            dispatched += 1;
        }
        Ok(dispatched)
    }
}

/// A named, seeded pseudo-random stream.
///
/// The keystream is ChaCha8 keyed by SHA-256 of the seed and label, so a
/// stream's draws depend only on `(label, seed)`.
#[derive(Clone)]
pub struct RngStream {
    label: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl fmt::Debug for RngStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RngStream")
            .field("label", &self.label)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

impl RngStream {
    pub fn new(label: impl Into<String>, seed: u64) -> Self {
        let label = label.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RngStream {
            label,
            seed,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Uniform integer in `[lo, hi]`, both inclusive.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> Result<i64, KernelError> {
        if lo > hi {
            return Err(KernelError::EmptyRange { lo, hi });
        }
        let span = (hi as i128 - lo as i128 + 1) as u128;
        if span > u64::MAX as u128 {
            return Ok(self.rng.next_u64() as i64);
        }
        let span = span as u64;
        // Lemire's rejection keeps the draw unbiased and platform independent.
        let zone = u64::MAX - (u64::MAX - span + 1) % span;
        loop {
            let v = self.rng.next_u64();
            if v <= zone {
                return Ok((lo as i128 + (v % span) as i128) as i64);
            }
        }
    }

    /// Uniform real in `[0, 1)` with 53 bits of precision.
    pub fn uniform_f64(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform_f64() < p
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

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq)]
    struct Tag(&'static str);

    impl Action for Tag {
        fn label(&self) -> &'static str {
            self.0
        }
    }

    fn record<'a>(
        log: &'a mut Vec<(SimTime, &'static str)>,
    ) -> impl FnMut(&mut Scheduler<Tag>, Tag) -> Result<(), Fault> + 'a {
        move |s, t| {
            log.push((s.now(), t.0));
            Ok(())
        }
    }

    #[test]
    fn schedule_at_zero_fires_first() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1), Tag("later")).unwrap();
        s.schedule(SimTime::ZERO, Tag("now")).unwrap();
        let mut log = Vec::new();
        s.run_until(SimTime::from_secs(2), &mut record(&mut log)).unwrap();
        assert_eq!(log[0], (SimTime::ZERO, "now"));
    }

    #[test]
    fn dispatches_in_time_order() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(5), Tag("five")).unwrap();
        s.schedule(SimTime::from_secs(3), Tag("three")).unwrap();
        let mut log = Vec::new();
        s.run_until(SimTime::from_secs(10), &mut record(&mut log)).unwrap();
        let names: Vec<_> = log.iter().map(|e| e.1).collect();
        assert_eq!(names, ["three", "five"]);
    }

    #[test]
    fn equal_times_break_ties_by_sequence() {
        let mut s = Scheduler::new();
        let at = SimTime::from_secs(3);
        s.insert(Event {
            fire_at: at,
            sequence: 9,
            action: Tag("nine"),
        })
        .unwrap();
        s.insert(Event {
            fire_at: at,
            sequence: 7,
            action: Tag("seven"),
        })
        .unwrap();
        let mut log = Vec::new();
        s.run_until(at, &mut record(&mut log)).unwrap();
        let names: Vec<_> = log.iter().map(|e| e.1).collect();
        assert_eq!(names, ["seven", "nine"]);
    }

    #[test]
    fn rejects_past_and_duplicate_sequence() {
        let mut s: Scheduler<Tag> = Scheduler::new();
        s.run_until(SimTime::from_secs(2), &mut |_: &mut Scheduler<Tag>, _| Ok(()))
            .unwrap();
        assert!(matches!(
            s.schedule(SimTime::from_secs(1), Tag("x")),
            Err(KernelError::InThePast { .. })
        ));
        s.insert(Event {
            fire_at: SimTime::from_secs(3),
            sequence: 4,
            action: Tag("a"),
        })
        .unwrap();
        assert!(matches!(
            s.insert(Event {
                fire_at: SimTime::from_secs(3),
                sequence: 4,
                action: Tag("b")
            }),
            Err(KernelError::DuplicateSequence(4))
        ));
    }

    #[test]
    fn empty_queue_advances_clock_to_end() {
        let mut s: Scheduler<Tag> = Scheduler::new();
        let n = s
            .run_until(SimTime::from_secs(300), &mut |_: &mut Scheduler<Tag>, _| Ok(()))
            .unwrap();
        assert_eq!(n, 0);
        assert_eq!(s.now(), SimTime::from_secs(300));
    }

    #[test]
    fn end_boundary_is_inclusive() {
        let mut s = Scheduler::new();
        for ms in [1000, 2000, 2000] {
            s.schedule(SimTime::from_millis(ms), Tag("e")).unwrap();
        }
        let mut log = Vec::new();
        let n = s.run_until(SimTime::from_secs(2), &mut record(&mut log)).unwrap();
        assert_eq!(n, 3);
    }

    #[test]
    fn cascading_schedule_is_honored() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(2), Tag("parent")).unwrap();
        let n = s
            .run_until(SimTime::from_secs(3), &mut |s: &mut Scheduler<Tag>, t: Tag| {
                if t.0 == "parent" {
                    s.schedule(SimTime::from_millis(2500), Tag("child")).unwrap();
                }
                Ok(())
            })
            .unwrap();
        assert_eq!(n, 2);
    }

    #[test]
    fn cancelled_events_are_skipped() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_secs(1), Tag("gone")).unwrap();
        s.schedule(SimTime::from_secs(1), Tag("kept")).unwrap();
        assert!(s.cancel(h));
        assert!(!s.cancel(h));
        let mut log = Vec::new();
        let n = s.run_until(SimTime::from_secs(1), &mut record(&mut log)).unwrap();
        assert_eq!(n, 1);
        assert_eq!(log[0].1, "kept");
    }

    #[test]
    fn handler_fault_carries_label_and_time() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_millis(1500), Tag("boom")).unwrap();
        let err = s
            .run_until(SimTime::from_secs(2), &mut |_: &mut Scheduler<Tag>, _| {
                Err(Fault::new("broken invariant"))
            })
            .unwrap_err();
        match err {
            KernelError::HandlerFault { label, at, .. } => {
                assert_eq!(label, "boom");
                assert_eq!(at, SimTime::from_millis(1500));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn nested_run_is_rejected() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, Tag("outer")).unwrap();
        let mut inner = None;
        s.run_until(SimTime::from_secs(1), &mut |s: &mut Scheduler<Tag>, _| {
            inner = Some(s.run_until(SimTime::from_secs(1), &mut |_: &mut Scheduler<Tag>, _| Ok(())));
            Ok(())
        })
        .unwrap();
        assert!(matches!(inner, Some(Err(KernelError::AlreadyRunning))));
    }

    #[test]
    fn degenerate_range_returns_bound() {
        let mut r = RngStream::new("rate", 1);
        for _ in 0..10 {
            assert_eq!(r.uniform_int(50, 50).unwrap(), 50);
        }
        assert!(r.uniform_int(51, 50).is_err());
    }

    #[test]
    fn uniform_int_mean_matches_analytic() {
        let mut r = RngStream::new("rate", 2021);
        let n = 100_000;
        let mut sum = 0i64;
        for _ in 0..n {
            let v = r.uniform_int(50, 100).unwrap();
            assert!((50..=100).contains(&v));
            sum += v;
        }
        let mean = sum as f64 / n as f64;
        assert!((mean - 75.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn streams_are_reproducible_and_label_separated() {
        let mut a = RngStream::new("trace-gen", 42);
        let mut b = RngStream::new("trace-gen", 42);
        let mut c = RngStream::new("mac/3", 42);
        let da: Vec<_> = (0..100).map(|_| a.uniform_int(0, 1 << 30).unwrap()).collect();
        let db: Vec<_> = (0..100).map(|_| b.uniform_int(0, 1 << 30).unwrap()).collect();
        let dc: Vec<_> = (0..100).map(|_| c.uniform_int(0, 1 << 30).unwrap()).collect();
        assert_eq!(da, db);
        assert_ne!(da, dc);
    }

    #[test]
    fn stream_depends_on_seed() {
        let mut r = RngStream::new("pin", 7);
        let first = r.next_u64();
        let mut again = RngStream::new("pin", 7);
        assert_eq!(first, again.next_u64());
        assert_ne!(first, RngStream::new("pin", 8).next_u64());
    }
}
