use crate::kernel::SimTime;
use crate::mac::NodeId;

/// Lossless full-duplex wired link with per-direction FIFO serialization.
#[derive(Debug, Clone)]
pub struct PointToPointLink {
    pub a: NodeId,
    pub b: NodeId,
    /// bits per second
    pub rate: u64,
    pub delay: SimTime,
    busy_until: [SimTime; 2],
    pub frames: u64,
}

impl PointToPointLink {
    pub fn new(a: NodeId, b: NodeId, rate: u64, delay: SimTime) -> Self {
        PointToPointLink {
            a,
            b,
            rate,
            delay,
            busy_until: [SimTime::ZERO; 2],
            frames: 0,
        }
    }

    pub fn serialization(&self, bytes: u32) -> SimTime {
        SimTime::from_nanos((8 * bytes as u128 * 1_000_000_000).div_ceil(self.rate as u128) as u64)
    }

    pub fn peer(&self, node: NodeId) -> NodeId {
        if node == self.a {
            self.b
        } else {
            self.a
        }
    }

    /// Queues a frame from `src` at `now`; returns its arrival time at the peer.
    pub fn transmit(&mut self, src: NodeId, bytes: u32, now: SimTime) -> SimTime {
        let dir = usize::from(src != self.a);
        let start = now.max(self.busy_until[dir]);
        let done = start + self.serialization(bytes);
        self.busy_until[dir] = done;
        self.frames += 1;
        done + self.delay
    }
}
