//! The four evaluated instances and the event-driven world that runs one of
//! them over a vehicle trace.

use std::collections::VecDeque;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use crate::apps::{emission_time, Consumer, ConsumerCbrState, ModifiedConsumerState, Producer};
use crate::config::Config;
use crate::error::{Fault, SetupError, SimError, UnknownInstance};
use crate::kernel::{self, RngStream, Scheduler, SimTime};
use crate::link::PointToPointLink;
use crate::mac::{Channel, Delivery, Frame, FrameRecord, MacEvent, Medium, NodeId};
use crate::metrics::{AppTotals, RunMetrics, VehicleMetrics};
use crate::ndn::{Action, FaceId, Name, Packet};
use crate::trace::{App, TraceFile};
use crate::transport::{
    build_routes, data_prefix, install_stacks, Deployment, FaceTransport, NodeStack, Role, Topology,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InstanceId {
    Native1,
    Native2,
    Overlay1,
    Overlay2,
}

impl InstanceId {
    pub const ALL: [InstanceId; 4] = [
        InstanceId::Native1,
        InstanceId::Native2,
        InstanceId::Overlay1,
        InstanceId::Overlay2,
    ];

    pub fn deployment(self) -> Deployment {
        match self {
            InstanceId::Native1 | InstanceId::Native2 => Deployment::Native,
            InstanceId::Overlay1 | InstanceId::Overlay2 => Deployment::Overlay,
        }
    }

    /// Half of the vehicles run the modified consumer.
    pub fn mixed(self) -> bool {
        matches!(self, InstanceId::Native2 | InstanceId::Overlay2)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            InstanceId::Native1 => "native-1",
            InstanceId::Native2 => "native-2",
            InstanceId::Overlay1 => "overlay-1",
            InstanceId::Overlay2 => "overlay-2",
        }
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InstanceId {
    type Err = UnknownInstance;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        InstanceId::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| UnknownInstance(s.to_owned()))
    }
}

/// Identifies one run. Per-run streams are keyed by `seed + replication`;
/// the application mix is keyed by `seed` alone so both mixed instances of a
/// replication pick the same vehicles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub instance: InstanceId,
    pub replication: u32,
    pub seed: u64,
}

impl RunSpec {
    pub fn run_seed(&self) -> u64 {
        self.seed.wrapping_add(self.replication as u64)
    }
}

/// Applications for every vehicle of `trace` under `instance`.
///
/// An unassigned trace gets all-cbr, or exactly `n / 2` modified vehicles
/// drawn from the `app-mix/<replication>` stream. A trace with an app column
/// already filled must agree with the instance.
pub fn assign_apps(
    trace: &TraceFile,
    instance: InstanceId,
    seed: u64,
    replication: u32,
) -> Result<Vec<App>, SetupError> {
    let n = trace.vehicles.len();
    let assigned: Vec<App> = trace.vehicles.iter().map(|v| v.app).collect();
    let unassigned = assigned.iter().filter(|a| **a == App::Unassigned).count();
    if unassigned == n {
        let mut apps = vec![App::Cbr; n];
        if instance.mixed() {
            let mut rng = RngStream::new(format!("app-mix/{replication}"), seed);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..n / 2 {
                let j = rng.uniform_int(i as i64, n as i64 - 1).expect("non-empty range") as usize;
                idx.swap(i, j);
                apps[idx[i]] = App::Modified;
            }
        }
        return Ok(apps);
    }
    if unassigned > 0 {
        return Err(SetupError::Inconsistent(format!(
            "{unassigned} of {n} vehicles have no application"
        )));
    }
    let modified = assigned.iter().filter(|a| **a == App::Modified).count();
    let expected = if instance.mixed() { n / 2 } else { 0 };
    if modified != expected {
        return Err(SetupError::Inconsistent(format!(
            "{instance} needs {expected} modified consumers, trace assigns {modified}"
        )));
    }
    Ok(assigned)
}

#[derive(Debug, Clone)]
enum Ev {
    Emit { vehicle: usize, k: u64 },
    Mac(MacEvent),
    Backbone { to: NodeId, frame: Box<Frame> },
    Sweep,
}

impl From<MacEvent> for Ev {
    fn from(e: MacEvent) -> Self {
        Ev::Mac(e)
    }
}

impl kernel::Action for Ev {
    fn label(&self) -> &'static str {
        match self {
            Ev::Emit { .. } => "emit",
            Ev::Mac(_) => "mac",
            Ev::Backbone { .. } => "backbone",
            Ev::Sweep => "sweep",
        }
    }
}

struct Vehicle {
    node: NodeId,
    consumer: Consumer,
    enter: SimTime,
    stop: SimTime,
    nonces: RngStream,
}

struct World {
    lifetime: SimTime,
    stacks: Vec<NodeStack>,
    channel: Channel,
    backbone: PointToPointLink,
    producer: Producer,
    vehicles: Vec<Vehicle>,
    metrics: RunMetrics,
    shared_prefix: Name,
    /// Reused by `receive` across events.
    work: VecDeque<(NodeId, Action)>,
}

/// What a face leads to, detached from the stack borrow.
enum Egress {
    App,
    Net,
}

impl World {
    fn handle(&mut self, sched: &mut Scheduler<Ev>, ev: Ev) -> Result<(), Fault> {
        self.metrics.events += 1;
        let now = sched.now();
        match ev {
            Ev::Emit { vehicle, k } => self.emit(sched, vehicle, k),
            Ev::Mac(e) => {
                let deliveries = self.channel.handle(sched, e).map_err(fault)?;
                for d in deliveries {
                    self.deliver(sched, d)?;
                }
                Ok(())
            }
            Ev::Backbone { to, frame } => {
                let face = self.ingress(to, &frame)?;
                self.receive(sched, to, face, frame.payload)
            }
            Ev::Sweep => {
                for s in &mut self.stacks {
                    s.forwarder.pit_expire(now);
                }
                sched.schedule(now + SimTime::from_secs(1), Ev::Sweep).map_err(fault)?;
                Ok(())
            }
        }
    }

    fn emit(&mut self, sched: &mut Scheduler<Ev>, vehicle: usize, k: u64) -> Result<(), Fault> {
        let now = sched.now();
        let v = &mut self.vehicles[vehicle];
        let node = v.node;
        if k == 0 {
            self.channel.attach(node);
        }
        let interest = v.consumer.emit(now, &mut v.nonces, self.lifetime);
        let next = emission_time(v.enter, v.consumer.rate_pps(), k + 1);
        if next < v.stop {
            sched.schedule(next, Ev::Emit { vehicle, k: k + 1 }).map_err(fault)?;
        }
        self.metrics.record_interest(vehicle, now.whole_secs());
        let app_face = self.stacks[node]
            .app_face
            .ok_or_else(|| Fault::new(format!("vehicle node {node} has no application face")))?;
        self.receive(sched, node, app_face, Packet::Interest(Rc::new(interest)))
    }

    fn deliver(&mut self, sched: &mut Scheduler<Ev>, d: Delivery) -> Result<(), Fault> {
        for &r in &d.receivers {
            let face = self.ingress(r, &d.frame)?;
            self.receive(sched, r, face, d.frame.payload.clone())?;
        }
        Ok(())
    }

    fn ingress(&self, node: NodeId, frame: &Frame) -> Result<FaceId, Fault> {
        self.stacks[node]
            .ingress_face(frame)
            .ok_or_else(|| Fault::new(format!("node {node} has no face for frame from {}", frame.src)))
    }

    /// Hands `packet` to `node`'s forwarder as arriving on `face` and carries
    /// out every resulting action.
    fn receive(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, face: FaceId, packet: Packet) -> Result<(), Fault> {
        let mut work = std::mem::take(&mut self.work);
        self.forward(sched.now(), node, face, packet, &mut work);
        while let Some((node, action)) = work.pop_front() {
            match action {
                Action::Drop(_) => {}
                Action::SendInterest { face, interest } => {
                    self.output(sched, node, face, Packet::Interest(interest), &mut work)?
                }
                Action::SendData { face, data } => self.output(sched, node, face, Packet::Data(data), &mut work)?,
            }
        }
        self.work = work;
        Ok(())
    }

    fn forward(
        &mut self,
        now: SimTime,
        node: NodeId,
        face: FaceId,
        packet: Packet,
        work: &mut VecDeque<(NodeId, Action)>,
    ) {
        let fwd = &mut self.stacks[node].forwarder;
        let actions = match packet {
            Packet::Interest(i) => {
                let watch = node == Topology::ROUTER && self.shared_prefix.is_prefix_of(&i.name);
                let live = watch && fwd.pit_entry(&i.name).is_some_and(|e| e.expires_at > now);
                let actions = fwd.on_interest(now, i, face);
                if watch && actions.iter().any(|a| matches!(a, Action::SendInterest { .. })) {
                    self.metrics.router_shared_forwards += 1;
                    if live {
                        self.metrics.router_shared_reforwards += 1;
                    }
                }
                actions
            }
            Packet::Data(d) => fwd.on_data(now, d, face),
        };
        work.extend(actions.into_iter().map(|a| (node, a)));
    }

    fn output(
        &mut self,
        sched: &mut Scheduler<Ev>,
        node: NodeId,
        face: FaceId,
        packet: Packet,
        work: &mut VecDeque<(NodeId, Action)>,
    ) -> Result<(), Fault> {
        let now = sched.now();
        let stack = &self.stacks[node];
        let egress = match stack.transport(face) {
            Some(FaceTransport::Application) => Egress::App,
            Some(_) => Egress::Net,
            None => return Err(Fault::new(format!("node {node} has no face {face:?}"))),
        };
        match egress {
            Egress::App => match (stack.role, packet) {
                (Role::Producer, Packet::Interest(i)) => {
                    if let Some(data) = self.producer.respond(&i) {
                        self.forward(now, node, face, Packet::Data(Rc::new(data)), work);
                    }
                }
                (Role::Vehicle(v), Packet::Data(_)) => self.metrics.record_data(v, now.whole_secs()),
                (role, p) => {
                    return Err(Fault::new(format!(
                        "{role:?} application received unexpected {}",
                        if p.is_interest() { "interest" } else { "data" }
                    )))
                }
            },
            Egress::Net => {
                let frame = stack.send(face, packet).expect("network face yields a frame");
                match frame.medium {
                    Medium::Wireless => self.channel.enqueue(sched, node, frame).map_err(fault)?,
                    Medium::PointToPoint => {
                        let at = self.backbone.transmit(node, frame.bytes, now);
                        let to = self.backbone.peer(node);
                        self.metrics.backbone_frames += 1;
                        sched
                            .schedule(
                                at,
                                Ev::Backbone {
                                    to,
                                    frame: Box::new(frame),
                                },
                            )
                            .map_err(fault)?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn fault(e: impl fmt::Display) -> Fault {
    Fault::new(e.to_string())
}

/// Output of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub frame_log: Option<Vec<FrameRecord>>,
}

/// A fully wired instance ready to run.
pub struct Simulation {
    spec: RunSpec,
    world: World,
    sched: Scheduler<Ev>,
    end: SimTime,
}

impl Simulation {
    /// Records one line per wireless frame outcome.
    pub fn enable_frame_log(&mut self) {
        self.world.channel.enable_log();
    }

    pub fn end(&self) -> SimTime {
        self.end
    }

    /// Runs until the horizon plus one interest lifetime, so in-flight
    /// requests can still be answered.
    pub fn run(mut self) -> Result<RunOutput, SimError> {
        let world = &mut self.world;
        let result = self
            .sched
            .run_until(self.end, &mut |s: &mut Scheduler<Ev>, ev| world.handle(s, ev));
        result.map_err(|e| SimError::Run {
            instance: self.spec.instance.to_string(),
            replication: self.spec.replication,
            source: Box::new(e.into()),
        })?;
        let end = self.end;
        let mut world = self.world;
        world.channel.finish(end);
        for s in &mut world.stacks {
            s.forwarder.pit_expire(end);
        }
        let mut metrics = world.metrics;
        metrics.mac = world.channel.counters();
        metrics.purity.wireless_broadcast = metrics.mac.broadcast_frames;
        metrics.purity.wireless_unicast = metrics.mac.unicast_frames;
        metrics.router = world.stacks[Topology::ROUTER].forwarder.counters.clone();
        Ok(RunOutput {
            metrics,
            frame_log: world.channel.take_log(),
        })
    }
}

/// Wires the topology, faces, routes, channel, backbone and applications of
/// `spec.instance` over `trace`.
pub fn build_instance(spec: RunSpec, trace: &TraceFile, cfg: &Config) -> Result<Simulation, SimError> {
    cfg.validate()?;
    let apps = assign_apps(trace, spec.instance, spec.seed, spec.replication)?;
    let topology = Topology::new(trace.vehicles.len());
    let cs = cfg.cs_capacity;
    let (mut stacks, _addresses) = install_stacks(&topology, spec.instance.deployment(), |role| match role {
        Role::Router => cs,
        _ => 0,
    })?;
    build_routes(&topology, &mut stacks)?;

    let run_seed = spec.run_seed();
    let mut channel = Channel::new(cfg.mac.clone(), cfg.channel, topology.node_count(), run_seed);
    channel.attach(Topology::ROUTER);
    let backbone = PointToPointLink::new(
        Topology::ROUTER,
        Topology::PRODUCER,
        cfg.backbone_rate,
        cfg.backbone_delay,
    );

    let horizon = cfg.horizon();
    let end = horizon + cfg.interest_lifetime;
    let mut vehicles = Vec::with_capacity(trace.vehicles.len());
    let mut per_vehicle = Vec::with_capacity(trace.vehicles.len());
    for (i, (t, &app)) in trace.vehicles.iter().zip(&apps).enumerate() {
        let consumer = match app {
            App::Modified => Consumer::Modified(ModifiedConsumerState::new(t.rate_pps, cfg.ref_hz)),
            _ => Consumer::Cbr(ConsumerCbrState::new(t.vehicle_id, t.rate_pps)),
        };
        vehicles.push(Vehicle {
            node: topology.vehicle_node(i),
            consumer,
            enter: t.enter(),
            stop: t.exit().min(horizon),
            nonces: RngStream::new(format!("nonce/{}", t.vehicle_id), run_seed),
        });
        per_vehicle.push(VehicleMetrics {
            vehicle_id: t.vehicle_id,
            app,
            totals: AppTotals::default(),
        });
    }
    let seconds = end.as_nanos().div_ceil(1_000_000_000) as usize;

    let mut sched = Scheduler::new();
    for (i, v) in vehicles.iter().enumerate() {
        if v.enter < v.stop {
            sched.schedule(v.enter, Ev::Emit { vehicle: i, k: 0 })?;
        }
    }
    sched.schedule(SimTime::from_secs(1), Ev::Sweep)?;

    let world = World {
        lifetime: cfg.interest_lifetime,
        stacks,
        channel,
        backbone,
        producer: Producer::new(vec![data_prefix()]),
        vehicles,
        metrics: RunMetrics::new(spec.instance, spec.replication, per_vehicle, seconds.max(1)),
        shared_prefix: data_prefix().child("shared"),
        work: VecDeque::new(),
    };
    Ok(Simulation {
        spec,
        world,
        sched,
        end,
    })
}

/// Builds and runs one instance.
pub fn run_instance(spec: RunSpec, trace: &TraceFile, cfg: &Config, frame_log: bool) -> Result<RunOutput, SimError> {
    let mut sim = build_instance(spec, trace, cfg)?;
    if frame_log {
        sim.enable_frame_log();
    }
    sim.run()
}
