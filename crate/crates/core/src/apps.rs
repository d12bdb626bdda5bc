//! Consumer and producer applications.

use rand::RngCore;

use crate::kernel::{RngStream, SimTime};
use crate::ndn::{Data, Interest, Name};
use crate::transport::data_prefix;

/// Requests `/data/veh-<id>/<seq>` at a constant rate.
#[derive(Debug, Clone)]
pub struct ConsumerCbrState {
    pub prefix: Name,
    pub rate_pps: u32,
    pub next_seq: u64,
}

impl ConsumerCbrState {
    pub fn new(vehicle_id: u32, rate_pps: u32) -> Self {
        ConsumerCbrState {
            prefix: data_prefix().child(format!("veh-{vehicle_id}")),
            rate_pps,
            next_seq: 0,
        }
    }
}

/// Requests `/data/shared/<seq>` where `seq` is derived from the emission
/// time, so every modified consumer asks for the same name at the same instant.
#[derive(Debug, Clone)]
pub struct ModifiedConsumerState {
    pub prefix: Name,
    pub rate_pps: u32,
    pub ref_hz: u32,
}

impl ModifiedConsumerState {
    pub fn new(rate_pps: u32, ref_hz: u32) -> Self {
        ModifiedConsumerState {
            prefix: data_prefix().child("shared"),
            rate_pps,
            ref_hz,
        }
    }

    pub fn seq_at(&self, t: SimTime) -> u64 {
        (t.as_nanos() as u128 * self.ref_hz as u128 / 1_000_000_000) as u64
    }
}

#[derive(Debug, Clone)]
pub enum Consumer {
    Cbr(ConsumerCbrState),
    Modified(ModifiedConsumerState),
}

impl Consumer {
    pub fn rate_pps(&self) -> u32 {
        match self {
            Consumer::Cbr(c) => c.rate_pps,
            Consumer::Modified(m) => m.rate_pps,
        }
    }

    pub fn emit(&mut self, t: SimTime, nonces: &mut RngStream, lifetime: SimTime) -> Interest {
        match self {
            Consumer::Cbr(c) => consumer_emit(c, nonces, lifetime),
            Consumer::Modified(m) => modified_emit(m, t, nonces, lifetime),
        }
    }
}

pub fn consumer_emit(state: &mut ConsumerCbrState, nonces: &mut RngStream, lifetime: SimTime) -> Interest {
    let name = state.prefix.child(state.next_seq.to_string());
    state.next_seq += 1;
    Interest::new(name, nonces.next_u32(), lifetime)
}

pub fn modified_emit(state: &ModifiedConsumerState, t: SimTime, nonces: &mut RngStream, lifetime: SimTime) -> Interest {
    let name = state.prefix.child(state.seq_at(t).to_string());
    Interest::new(name, nonces.next_u32(), lifetime)
}

/// Emission instants `enter + k / rate` strictly before `exit`.
pub fn emission_time(enter: SimTime, rate_pps: u32, k: u64) -> SimTime {
    enter + SimTime::from_nanos(k * 1_000_000_000 / rate_pps as u64)
}

/// Stateless producer: answers any Interest under its registered prefixes
/// with a 1024-byte Data of the same name.
#[derive(Debug, Clone)]
pub struct Producer {
    pub prefixes: Vec<Name>,
    pub served: u64,
}

impl Producer {
    pub fn new(prefixes: Vec<Name>) -> Self {
        Producer { prefixes, served: 0 }
    }

    pub fn respond(&mut self, interest: &Interest) -> Option<Data> {
        let data = producer_respond(&self.prefixes, interest)?;
        self.served += 1;
        Some(data)
    }
}

pub fn producer_respond(prefixes: &[Name], interest: &Interest) -> Option<Data> {
    prefixes
        .iter()
        .any(|p| p.is_prefix_of(&interest.name))
        .then(|| Data::new(interest.name.clone()))
}
