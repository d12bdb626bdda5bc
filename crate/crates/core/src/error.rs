use std::path::PathBuf;

use thiserror::Error;

use crate::kernel::SimTime;

/// An unrecoverable condition raised inside an event handler.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct Fault(pub String);

impl Fault {
    pub fn new(msg: impl Into<String>) -> Self {
        Fault(msg.into())
    }
}

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("cannot schedule at {at}: clock is already at {now}")]
    InThePast { at: SimTime, now: SimTime },
    #[error("sequence number {0} is already queued")]
    DuplicateSequence(u64),
    #[error("engine is already running")]
    AlreadyRunning,
    #[error("empty range [{lo}, {hi}]")]
    EmptyRange { lo: i64, hi: i64 },
    #[error("handler for `{label}` failed at {at}: {fault}")]
    HandlerFault {
        label: &'static str,
        at: SimTime,
        fault: Fault,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name must start with '/': {0:?}")]
    MissingLeadingSlash(String),
    #[error("name has no components")]
    Empty,
    #[error("empty component in {0:?}")]
    EmptyComponent(String),
    #[error("component of {0} bytes exceeds 255")]
    ComponentTooLong(usize),
    #[error("bad percent escape in {0:?}")]
    BadEscape(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("buffer truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown packet type 0x{0:02x}")]
    UnknownType(u8),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Name(#[from] NameError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SetupError {
    #[error("address {0} assigned twice")]
    DuplicateAddress(std::net::Ipv4Addr),
    #[error("no link address for {0}")]
    Unresolvable(std::net::Ipv4Addr),
    #[error("node {0} has no link attachment")]
    Unattached(usize),
    #[error("inconsistent scenario: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown instance {0:?} (expected native-1, native-2, overlay-1 or overlay-2)")]
pub struct UnknownInstance(pub String);

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error("bad header: {0:?}")]
    Header(String),
    #[error("expected {expected} vehicles, found {found}")]
    Count { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
}

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("sample contains a non-finite value")]
    NonFinite,
    #[error("sample size {0} outside supported range [{1}, {2}]")]
    SizeOutOfRange(usize, usize, usize),
    #[error("sample has zero variance")]
    ZeroVariance,
    #[error("no interests sent for {0}")]
    NoInterests(String),
    #[error("missing instance {0}")]
    MissingInstance(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("instance {0} has fewer than 2 replications")]
    TooFewReplications(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Instance(#[from] UnknownInstance),
    #[error("run {instance} replication {replication}: {source}")]
    Run {
        instance: String,
        replication: u32,
        #[source]
        source: Box<SimError>,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Campaign(String),
}
