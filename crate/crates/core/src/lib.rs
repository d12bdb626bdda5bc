//! Discrete-event simulation of Named Data Networking over a Wi-Fi 6
//! vehicular hotspot, in a native (link-layer broadcast) and an overlay
//! (UDP/IPv4 unicast tunnel) deployment.

pub mod apps;
pub mod campaign;
pub mod config;
pub mod error;
pub mod kernel;
pub mod link;
pub mod mac;
pub mod metrics;
pub mod ndn;
pub mod scenario;
pub mod stats;
pub mod trace;
pub mod transport;

pub use error::{Fault, KernelError};
pub use kernel::{RngStream, Scheduler, SimTime};
