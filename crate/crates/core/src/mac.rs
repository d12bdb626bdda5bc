//! Single-collision-domain 802.11 channel with DCF-style contention.
//!
//! Broadcast frames go out once at the basic rate with no acknowledgement.
//! Unicast frames use the full rate, are acknowledged after SIFS and are
//! retried with binary exponential backoff until the retry limit.
//!
//! Carrier sensing is instantaneous, so two transmissions overlap only when
//! their backoff counters expire in the same slot.

use std::collections::VecDeque;
use std::fmt;

use crate::error::KernelError;
use crate::kernel::{RngStream, Scheduler, SimTime};
use crate::ndn::Packet;
use crate::transport::Encap;

pub type NodeId = usize;

/// Frames allowed in one station's transmit queue.
pub const QUEUE_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub slot: SimTime,
    pub sifs: SimTime,
    pub difs: SimTime,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    /// bits per second
    pub basic_rate: u64,
    pub full_rate: u64,
    pub preamble_basic: SimTime,
    pub preamble_full: SimTime,
    pub ack_duration: SimTime,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            slot: SimTime::from_micros(9),
            sifs: SimTime::from_micros(16),
            difs: SimTime::from_micros(34),
            cw_min: 15,
            cw_max: 1023,
            retry_limit: 7,
            basic_rate: 6_000_000,
            // HE MCS 11, 20 MHz, one spatial stream, 0.8 us GI.
            full_rate: 143_400_000,
            preamble_basic: SimTime::from_micros(20),
            preamble_full: SimTime::from_micros(40),
            ack_duration: SimTime::from_micros(44),
        }
    }
}

impl MacParams {
    pub fn validate(&self) -> Result<(), String> {
        let times = [
            ("slot", self.slot),
            ("sifs", self.sifs),
            ("difs", self.difs),
            ("preamble_basic", self.preamble_basic),
            ("preamble_full", self.preamble_full),
            ("ack_duration", self.ack_duration),
        ];
        if let Some((k, _)) = times.iter().find(|(_, t)| *t == SimTime::ZERO) {
            return Err(format!("{k} must be positive"));
        }
        if self.cw_min == 0 || self.cw_min > self.cw_max {
            return Err(format!(
                "need 0 < cw_min <= cw_max, got {} / {}",
                self.cw_min, self.cw_max
            ));
        }
        if self.basic_rate == 0 || self.full_rate == 0 {
            return Err("rates must be positive".into());
        }
        Ok(())
    }

    pub fn rate(&self, service: Service) -> u64 {
        match service {
            Service::Basic => self.basic_rate,
            Service::Full => self.full_rate,
        }
    }

    pub fn preamble(&self, service: Service) -> SimTime {
        match service {
            Service::Basic => self.preamble_basic,
            Service::Full => self.preamble_full,
        }
    }

    /// Preamble plus payload bits at the service rate, rounded up to whole nanoseconds.
    pub fn airtime(&self, bytes: u32, service: Service) -> SimTime {
        let bits = 8 * bytes as u128 * 1_000_000_000;
        let rate = self.rate(service) as u128;
        let ns = bits.div_ceil(rate) as u64;
        self.preamble(service) + SimTime::from_nanos(ns)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Service {
    Basic,
    Full,
}

impl fmt::Display for Service {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Service::Basic => "basic",
            Service::Full => "full",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dest {
    Broadcast,
    Node(NodeId),
}

impl fmt::Display for Dest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dest::Broadcast => f.write_str("broadcast"),
            Dest::Node(n) => write!(f, "{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Medium {
    Wireless,
    PointToPoint,
}

/// One link-layer transmission unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub src: NodeId,
    pub dest: Dest,
    pub service: Service,
    pub medium: Medium,
    pub bytes: u32,
    pub encap: Encap,
    pub payload: Packet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Delivered,
    Collided,
    QueueDropped,
    RetryExhausted,
    Abandoned,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Delivered => "delivered",
            Outcome::Collided => "collided",
            Outcome::QueueDropped => "queue-dropped",
            Outcome::RetryExhausted => "retry-exhausted",
            Outcome::Abandoned => "abandoned",
        })
    }
}

/// One line of the per-frame outcome log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameRecord {
    pub time: SimTime,
    pub src: NodeId,
    pub dest: Dest,
    pub service: Service,
    pub bytes: u32,
    pub outcome: Outcome,
}

impl FrameRecord {
    pub const HEADER: &'static str = "time_s,src,dest,service,bytes,outcome";

    pub fn to_line(&self) -> String {
        format!(
            "{:.9},{},{},{},{},{}",
            self.time.as_secs_f64(),
            self.src,
            self.dest,
            self.service,
            self.bytes,
            self.outcome
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MacCounters {
    pub enqueued: u64,
    pub delivered: u64,
    pub collided: u64,
    pub queue_dropped: u64,
    pub retry_exhausted: u64,
    pub abandoned: u64,
    pub attempts: u64,
    pub failed_attempts: u64,
    pub broadcast_frames: u64,
    pub unicast_frames: u64,
}

impl MacCounters {
    pub fn dropped(&self) -> u64 {
        self.queue_dropped + self.retry_exhausted + self.abandoned
    }

    /// Every frame handed to the MAC has exactly one terminal outcome.
    pub fn conserved(&self) -> bool {
        self.delivered + self.collided + self.dropped() == self.enqueued
    }

    fn add(&mut self, o: &MacCounters) {
        self.enqueued += o.enqueued;
        self.delivered += o.delivered;
        self.collided += o.collided;
        self.queue_dropped += o.queue_dropped;
        self.retry_exhausted += o.retry_exhausted;
        self.abandoned += o.abandoned;
        self.attempts += o.attempts;
        self.failed_attempts += o.failed_attempts;
        self.broadcast_frames += o.broadcast_frames;
        self.unicast_frames += o.unicast_frames;
    }

    fn count(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Delivered => self.delivered += 1,
            Outcome::Collided => self.collided += 1,
            Outcome::QueueDropped => self.queue_dropped += 1,
            Outcome::RetryExhausted => self.retry_exhausted += 1,
            Outcome::Abandoned => self.abandoned += 1,
        }
    }
}

/// Events the channel schedules for itself.
#[derive(Debug, Clone)]
pub enum MacEvent {
    /// Backoff of one or more stations expires. Stale generations are ignored.
    Access { generation: u64 },
    /// The current busy period ends.
    BusyEnd,
    /// Lossless mode: a frame reaches its receivers.
    IdealArrival { frame: Box<Frame> },
}

/// A successfully received frame and the nodes that received it.
#[derive(Debug, Clone)]
pub struct Delivery {
    pub frame: Frame,
    pub receivers: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelModel {
    Contention,
    /// Test hook: every frame reaches its receivers after its airtime, no
    /// contention or loss.
    Ideal,
}

#[derive(Debug)]
struct Station {
    queue: VecDeque<Frame>,
    attached: bool,
    cw: u32,
    retries: u32,
    backoff_slots: u32,
    /// Start of the idle interval the station is currently sensing.
    sensing_since: SimTime,
    transmitting: bool,
    rng: RngStream,
    counters: MacCounters,
}

impl Station {
    fn access_time(&self, p: &MacParams) -> SimTime {
        self.sensing_since + p.difs + SimTime::from_nanos(p.slot.as_nanos() * self.backoff_slots as u64)
    }

    fn draw_backoff(&mut self) {
        self.backoff_slots = self.rng.uniform_int(0, self.cw as i64).expect("cw >= 0") as u32;
    }
}

#[derive(Debug)]
struct Busy {
    transmitters: Vec<NodeId>,
    end: SimTime,
}

pub struct Channel {
    params: MacParams,
    model: ChannelModel,
    stations: Vec<Station>,
    busy: Option<Busy>,
    idle_since: SimTime,
    generation: u64,
    log: Option<Vec<FrameRecord>>,
    /// Successful transmissions as (start, end) when tracing is on.
    airtime_trace: Option<Vec<(SimTime, SimTime)>>,
}

impl Channel {
    /// `nodes` station slots, all detached. Each station draws backoff from
    /// its own `mac/<node>` stream.
    pub fn new(params: MacParams, model: ChannelModel, nodes: usize, seed: u64) -> Self {
        let stations = (0..nodes)
            .map(|n| Station {
                queue: VecDeque::new(),
                attached: false,
                cw: params.cw_min,
                retries: 0,
                backoff_slots: 0,
                sensing_since: SimTime::ZERO,
                transmitting: false,
                rng: RngStream::new(format!("mac/{n}"), seed),
                counters: MacCounters::default(),
            })
            .collect();
        Channel {
            params,
            model,
            stations,
            busy: None,
            idle_since: SimTime::ZERO,
            generation: 0,
            log: None,
            airtime_trace: None,
        }
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn enable_log(&mut self) {
        self.log.get_or_insert_with(Vec::new);
    }

    pub fn enable_airtime_trace(&mut self) {
        self.airtime_trace.get_or_insert_with(Vec::new);
    }

    pub fn take_log(&mut self) -> Option<Vec<FrameRecord>> {
        self.log.take()
    }

    pub fn airtime_trace(&self) -> Option<&[(SimTime, SimTime)]> {
        self.airtime_trace.as_deref()
    }

    pub fn attach(&mut self, node: NodeId) {
        self.stations[node].attached = true;
    }

    pub fn is_attached(&self, node: NodeId) -> bool {
        self.stations.get(node).is_some_and(|s| s.attached)
    }

    pub fn attached_count(&self) -> usize {
        self.stations.iter().filter(|s| s.attached).count()
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.stations[node].queue.len()
    }

    pub fn station_counters(&self, node: NodeId) -> MacCounters {
        self.stations[node].counters
    }

    pub fn counters(&self) -> MacCounters {
        let mut total = MacCounters::default();
        for s in &self.stations {
            total.add(&s.counters);
        }
        total
    }

    fn record(&mut self, time: SimTime, frame: &Frame, outcome: Outcome) {
        let s = &mut self.stations[frame.src].counters;
        s.count(outcome);
        if outcome != Outcome::QueueDropped && outcome != Outcome::Abandoned {
            match frame.dest {
                Dest::Broadcast => s.broadcast_frames += 1,
                Dest::Node(_) => s.unicast_frames += 1,
            }
        }
        if let Some(log) = &mut self.log {
            log.push(FrameRecord {
                time,
                src: frame.src,
                dest: frame.dest,
                service: frame.service,
                bytes: frame.bytes,
                outcome,
            });
        }
    }

    /// Hands a frame to `node`'s transmit queue.
    pub fn enqueue<A: From<MacEvent>>(
        &mut self,
        sched: &mut Scheduler<A>,
        node: NodeId,
        frame: Frame,
    ) -> Result<(), KernelError> {
        debug_assert!(self.stations[node].attached, "node {node} not attached");
        let now = sched.now();
        self.stations[node].counters.enqueued += 1;

        if self.model == ChannelModel::Ideal {
            let at = now + self.params.airtime(frame.bytes, frame.service);
            sched.schedule(at, MacEvent::IdealArrival { frame: Box::new(frame) }.into())?;
            return Ok(());
        }

        let idle = self.busy.is_none();
        let st = &mut self.stations[node];
        if st.queue.len() >= QUEUE_LIMIT {
            self.record(now, &frame, Outcome::QueueDropped);
            return Ok(());
        }
        st.queue.push_back(frame);
        if st.queue.len() == 1 && !st.transmitting {
            st.draw_backoff();
            st.sensing_since = now;
            if idle {
                self.reschedule_access(sched)?;
            }
        }
        Ok(())
    }

    fn contending(&self) -> impl Iterator<Item = (NodeId, &Station)> {
        self.stations
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.queue.is_empty() && !s.transmitting)
    }

    fn reschedule_access<A: From<MacEvent>>(&mut self, sched: &mut Scheduler<A>) -> Result<(), KernelError> {
        self.generation += 1;
        let next = self.contending().map(|(_, s)| s.access_time(&self.params)).min();
        if let Some(at) = next {
            sched.schedule(
                at,
                MacEvent::Access {
                    generation: self.generation,
                }
                .into(),
            )?;
        }
        Ok(())
    }

    pub fn handle<A: From<MacEvent>>(
        &mut self,
        sched: &mut Scheduler<A>,
        event: MacEvent,
    ) -> Result<Vec<Delivery>, KernelError> {
        match event {
            MacEvent::Access { generation } => {
                if generation == self.generation && self.busy.is_none() {
                    self.start_transmissions(sched)?;
                }
                Ok(Vec::new())
            }
            MacEvent::BusyEnd => self.finish_busy(sched),
            MacEvent::IdealArrival { frame } => {
                let now = sched.now();
                self.record(now, &frame, Outcome::Delivered);
                let receivers = self.receivers(&frame);
                Ok(vec![Delivery {
                    frame: *frame,
                    receivers,
                }])
            }
        }
    }

    fn start_transmissions<A: From<MacEvent>>(&mut self, sched: &mut Scheduler<A>) -> Result<(), KernelError> {
        let now = sched.now();
        let params = &self.params;
        let mut transmitters = Vec::new();
        for (n, st) in self.stations.iter_mut().enumerate() {
            if st.queue.is_empty() || st.transmitting {
                continue;
            }
            let access = st.access_time(params);
            if access == now {
                st.transmitting = true;
                st.backoff_slots = 0;
                transmitters.push(n);
            } else {
                // Freeze: credit the whole idle slots already counted down.
                let counting_from = st.sensing_since + params.difs;
                if now > counting_from {
                    let elapsed = (now - counting_from).as_nanos() / params.slot.as_nanos();
                    st.backoff_slots -= (elapsed as u32).min(st.backoff_slots);
                }
            }
        }
        debug_assert!(!transmitters.is_empty(), "access event with no expiring backoff");
        let mut end = now;
        for &n in &transmitters {
            let f = self.stations[n].queue.front().expect("transmitter has a frame");
            end = end.max(now + params.airtime(f.bytes, f.service));
            self.stations[n].counters.attempts += 1;
        }
        if let [only] = transmitters[..] {
            let f = self.stations[only].queue.front().expect("frame");
            if matches!(f.dest, Dest::Node(_)) {
                end = end + params.sifs + params.ack_duration;
            }
        }
        self.busy = Some(Busy { transmitters, end });
        sched.schedule(end, MacEvent::BusyEnd.into())?;
        Ok(())
    }

    fn receivers(&self, frame: &Frame) -> Vec<NodeId> {
        match frame.dest {
            Dest::Broadcast => self
                .stations
                .iter()
                .enumerate()
                .filter(|(n, s)| s.attached && *n != frame.src)
                .map(|(n, _)| n)
                .collect(),
            Dest::Node(n) if self.is_attached(n) && n != frame.src => vec![n],
            Dest::Node(_) => Vec::new(),
        }
    }

    fn finish_busy<A: From<MacEvent>>(&mut self, sched: &mut Scheduler<A>) -> Result<Vec<Delivery>, KernelError> {
        let now = sched.now();
        let busy = self.busy.take().expect("busy period in progress");
        let collided = busy.transmitters.len() > 1;
        let mut deliveries = Vec::new();

        for &n in &busy.transmitters {
            let frame = self.stations[n].queue.front().cloned().expect("frame");
            let receivers = if collided { Vec::new() } else { self.receivers(&frame) };
            let unicast = matches!(frame.dest, Dest::Node(_));
            let ok = !collided && (!unicast || !receivers.is_empty());
            if ok {
                if let Some(trace) = &mut self.airtime_trace {
                    let air = self.params.airtime(frame.bytes, frame.service);
                    let start = busy.end.saturating_sub(if unicast {
                        self.params.sifs + self.params.ack_duration + air
                    } else {
                        air
                    });
                    trace.push((start, start + air));
                }
            }
            let st = &mut self.stations[n];
            st.transmitting = false;
            let outcome = if ok {
                Some(Outcome::Delivered)
            } else if !unicast {
                Some(Outcome::Collided)
            } else {
                st.counters.failed_attempts += 1;
                st.retries += 1;
                if st.retries > self.params.retry_limit {
                    Some(Outcome::RetryExhausted)
                } else {
                    st.cw = (2 * st.cw + 1).min(self.params.cw_max);
                    st.draw_backoff();
                    None
                }
            };
            if let Some(outcome) = outcome {
                let frame = st.queue.pop_front().expect("frame");
                st.cw = self.params.cw_min;
                st.retries = 0;
                if !st.queue.is_empty() {
                    st.draw_backoff();
                }
                self.record(now, &frame, outcome);
                if outcome == Outcome::Delivered {
                    deliveries.push(Delivery { frame, receivers });
                }
            }
        }

        self.idle_since = now;
        for st in self.stations.iter_mut().filter(|s| !s.queue.is_empty()) {
            st.sensing_since = now;
        }
        self.reschedule_access(sched)?;
        Ok(deliveries)
    }

    /// Closes the books at the end of a run: frames still queued or on the
    /// air are counted as abandoned.
    pub fn finish(&mut self, now: SimTime) {
        let mut pending = Vec::new();
        for st in &mut self.stations {
            pending.extend(st.queue.drain(..));
            st.transmitting = false;
        }
        self.busy = None;
        for f in pending {
            self.record(now, &f, Outcome::Abandoned);
        }
    }

    pub fn idle_since(&self) -> SimTime {
        self.idle_since
    }
}
