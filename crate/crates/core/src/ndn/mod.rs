//! NDN packet model and forwarder: names, Interest/Data, content store,
//! pending interest table and FIB.

mod cs;
mod fib;
mod forwarder;
mod name;
mod packet;

pub use cs::ContentStore;
pub use fib::{fib_lookup, FibTable};
pub use forwarder::{Action, DropReason, FaceId, FaceKind, ForwarderCounters, ForwarderState, PitEntry};
pub use name::{name_is_prefix, Name, MAX_COMPONENT_LEN};
pub use packet::{Data, Interest, Packet, DATA_HEADER_LEN, DATA_PAYLOAD_LEN, INTEREST_HEADER_LEN};
