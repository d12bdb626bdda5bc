//! Per-node forwarding state and the Interest/Data pipelines.

use std::fmt;
use std::rc::Rc;

use rustc_hash::FxHashMap as HashMap;

use crate::kernel::SimTime;
use crate::ndn::{ContentStore, Data, FibTable, Interest, Name};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FaceKind {
    Application,
    NativeLink,
    OverlayTunnel,
    PointToPoint,
}

#[derive(Debug, Clone)]
pub struct PitEntry {
    pub name: Name,
    pub in_faces: Vec<FaceId>,
    pub seen_nonces: Vec<u32>,
    pub expires_at: SimTime,
}

impl PitEntry {
    fn add_in_face(&mut self, face: FaceId) {
        if !self.in_faces.contains(&face) {
            self.in_faces.push(face);
        }
    }
}

/// What the forwarder wants done after processing a packet.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    SendInterest { face: FaceId, interest: Rc<Interest> },
    SendData { face: FaceId, data: Rc<Data> },
    Drop(DropReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropReason {
    DuplicateNonce,
    Aggregated,
    NoRoute,
    Unsolicited,
    UnknownFace,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ForwarderCounters {
    pub interests_in: u64,
    pub interests_forwarded: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub cs_hits: u64,
    pub aggregated: u64,
    pub duplicate_nonces: u64,
    pub no_route: u64,
    pub unsolicited: u64,
    pub unsatisfied: u64,
}

#[derive(Debug)]
pub struct ForwarderState {
    faces: Vec<(FaceId, FaceKind)>,
    next_face: u32,
    pub cs: ContentStore,
    pit: HashMap<Name, PitEntry>,
    pub fib: FibTable,
    pub counters: ForwarderCounters,
}

impl ForwarderState {
    pub fn new(cs_capacity: usize) -> Self {
        ForwarderState {
            faces: Vec::new(),
            next_face: 0,
            cs: ContentStore::new(cs_capacity),
            pit: HashMap::default(),
            fib: FibTable::new(),
            counters: ForwarderCounters::default(),
        }
    }

    /// Face ids are never reused.
    pub fn add_face(&mut self, kind: FaceKind) -> FaceId {
        let id = FaceId(self.next_face);
        self.next_face += 1;
        self.faces.push((id, kind));
        id
    }

    pub fn face_kind(&self, face: FaceId) -> Option<FaceKind> {
        self.faces.iter().find(|(f, _)| *f == face).map(|(_, k)| *k)
    }

    pub fn faces(&self) -> &[(FaceId, FaceKind)] {
        &self.faces
    }

    pub fn pit_len(&self) -> usize {
        self.pit.len()
    }

    pub fn pit_entry(&self, name: &Name) -> Option<&PitEntry> {
        self.pit.get(name)
    }

    /// Removes `name`'s entry if it has already expired.
    fn reap(&mut self, name: &Name, now: SimTime) {
        if let Some(e) = self.pit.get(name) {
            if e.expires_at <= now {
                self.pit.remove(name);
                self.counters.unsatisfied += 1;
            }
        }
    }

    pub fn on_interest(&mut self, now: SimTime, interest: Rc<Interest>, in_face: FaceId) -> Vec<Action> {
        if self.face_kind(in_face).is_none() {
            return vec![Action::Drop(DropReason::UnknownFace)];
        }
        self.counters.interests_in += 1;
        self.reap(&interest.name, now);

        if let Some(entry) = self.pit.get(&interest.name) {
            if entry.seen_nonces.contains(&interest.nonce) {
                self.counters.duplicate_nonces += 1;
                return vec![Action::Drop(DropReason::DuplicateNonce)];
            }
        }

        if let Some(data) = self.cs.lookup(&interest.name) {
            self.counters.cs_hits += 1;
            self.counters.data_out += 1;
            return vec![Action::SendData { face: in_face, data }];
        }

        if let Some(entry) = self.pit.get_mut(&interest.name) {
            entry.add_in_face(in_face);
            entry.seen_nonces.push(interest.nonce);
            entry.expires_at = entry.expires_at.max(now + interest.lifetime);
            self.counters.aggregated += 1;
            return vec![Action::Drop(DropReason::Aggregated)];
        }

        // An interest whose only route leads back out its arrival face is
        // dropped without leaving PIT state behind.
        let out_face = match self.fib.lookup(&interest.name) {
            Some(f) if f != in_face => f,
            _ => {
                self.counters.no_route += 1;
                return vec![Action::Drop(DropReason::NoRoute)];
            }
        };
        self.pit.insert(
            interest.name.clone(),
            PitEntry {
                name: interest.name.clone(),
                in_faces: vec![in_face],
                seen_nonces: vec![interest.nonce],
                expires_at: now + interest.lifetime,
            },
        );
        self.counters.interests_forwarded += 1;
        let mut fwd = (*interest).clone();
        fwd.hop_count = fwd.hop_count.saturating_add(1);
        vec![Action::SendInterest {
            face: out_face,
            interest: Rc::new(fwd),
        }]
    }

    pub fn on_data(&mut self, now: SimTime, data: Rc<Data>, in_face: FaceId) -> Vec<Action> {
        self.counters.data_in += 1;
        self.reap(&data.name, now);
        let Some(entry) = self.pit.remove(&data.name) else {
            self.counters.unsolicited += 1;
            return vec![Action::Drop(DropReason::Unsolicited)];
        };
        self.cs.insert(Rc::clone(&data));
        let out: Vec<Action> = entry
            .in_faces
            .into_iter()
            .filter(|f| *f != in_face)
            .map(|face| Action::SendData {
                face,
                data: Rc::clone(&data),
            })
            .collect();
        self.counters.data_out += out.len() as u64;
        out
    }

    /// Removes every entry with `expires_at <= now`.
    pub fn pit_expire(&mut self, now: SimTime) -> usize {
        let before = self.pit.len();
        self.pit.retain(|_, e| e.expires_at > now);
        let expired = before - self.pit.len();
        self.counters.unsatisfied += expired as u64;
        expired
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LIFETIME: SimTime = SimTime::from_secs(4);

    fn interest(name: &str, nonce: u32) -> Rc<Interest> {
        Rc::new(Interest::new(name.parse().unwrap(), nonce, LIFETIME))
    }

    fn data(name: &str) -> Rc<Data> {
        Rc::new(Data::new(name.parse().unwrap()))
    }

    /// Router-like node: faces 0..=9 wireless-ish, 9 upstream, route /data -> 9.
    fn router(cs: usize) -> ForwarderState {
        let mut f = ForwarderState::new(cs);
        for _ in 0..10 {
            f.add_face(FaceKind::OverlayTunnel);
        }
        f.fib.insert("/data".parse().unwrap(), FaceId(9));
        f
    }

    fn sends(actions: &[Action]) -> Vec<FaceId> {
        let mut v: Vec<_> = actions
            .iter()
            .filter_map(|a| match a {
                Action::SendInterest { face, .. } | Action::SendData { face, .. } => Some(*face),
                Action::Drop(_) => None,
            })
            .collect();
        v.sort();
        v
    }

    #[test]
    fn cs_hit_answers_on_in_face() {
        let mut f = router(10);
        f.cs.insert(data("/data/x"));
        let a = f.on_interest(SimTime::ZERO, interest("/data/x", 1), FaceId(2));
        assert!(matches!(&a[..], [Action::SendData { face: FaceId(2), .. }]));
        assert_eq!(f.pit_len(), 0);
    }

    #[test]
    fn second_interest_aggregates() {
        let mut f = router(0);
        let a = f.on_interest(SimTime::ZERO, interest("/data/x", 1), FaceId(2));
        assert_eq!(sends(&a), [FaceId(9)]);
        let b = f.on_interest(SimTime::ZERO, interest("/data/x", 2), FaceId(5));
        assert_eq!(b, [Action::Drop(DropReason::Aggregated)]);
        assert_eq!(f.pit_entry(&"/data/x".parse().unwrap()).unwrap().in_faces.len(), 2);
    }

    #[test]
    fn duplicate_nonce_dropped() {
        let mut f = router(0);
        f.on_interest(SimTime::ZERO, interest("/data/x", 7), FaceId(2));
        let a = f.on_interest(SimTime::ZERO, interest("/data/x", 7), FaceId(3));
        assert_eq!(a, [Action::Drop(DropReason::DuplicateNonce)]);
    }

    #[test]
    fn never_forwards_out_arrival_face() {
        let mut f = router(0);
        let a = f.on_interest(SimTime::ZERO, interest("/data/x", 1), FaceId(9));
        assert_eq!(a, [Action::Drop(DropReason::NoRoute)]);
        assert_eq!(f.pit_len(), 0);
        let b = f.on_interest(SimTime::ZERO, interest("/video/x", 1), FaceId(1));
        assert_eq!(b, [Action::Drop(DropReason::NoRoute)]);
    }

    #[test]
    fn data_fans_out_to_in_faces() {
        let mut f = router(10);
        f.on_interest(SimTime::ZERO, interest("/data/x", 1), FaceId(2));
        f.on_interest(SimTime::ZERO, interest("/data/x", 2), FaceId(5));
        let a = f.on_data(SimTime::from_millis(60), data("/data/x"), FaceId(9));
        assert_eq!(sends(&a), [FaceId(2), FaceId(5)]);
        assert_eq!(f.pit_len(), 0);
        assert_eq!(f.cs.len(), 1);
        // Idempotent re-delivery.
        let again = f.on_data(SimTime::from_millis(61), data("/data/x"), FaceId(9));
        assert_eq!(again, [Action::Drop(DropReason::Unsolicited)]);
    }

    #[test]
    fn data_not_returned_on_arrival_face() {
        let mut f = router(0);
        f.on_interest(SimTime::ZERO, interest("/data/x", 1), FaceId(2));
        f.on_interest(SimTime::ZERO, interest("/data/x", 2), FaceId(4));
        let a = f.on_data(SimTime::ZERO, data("/data/x"), FaceId(4));
        assert_eq!(sends(&a), [FaceId(2)]);
    }

    #[test]
    fn unsolicited_data_is_dropped() {
        let mut f = router(10);
        let a = f.on_data(SimTime::ZERO, data("/data/y"), FaceId(9));
        assert_eq!(a, [Action::Drop(DropReason::Unsolicited)]);
        assert!(f.cs.is_empty());
    }

    #[test]
    fn expiry_boundary_is_inclusive() {
        let mut f = router(0);
        assert_eq!(f.pit_expire(SimTime::from_secs(10)), 0);
        f.on_interest(SimTime::ZERO, interest("/data/a", 1), FaceId(1));
        f.on_interest(SimTime::from_secs(2), interest("/data/b", 2), FaceId(1));
        assert_eq!(f.pit_expire(LIFETIME), 1);
        assert_eq!(f.pit_len(), 1);
        assert_eq!(f.counters.unsatisfied, 1);
    }

    #[test]
    fn expired_entry_does_not_satisfy() {
        let mut f = router(0);
        f.on_interest(SimTime::ZERO, interest("/data/a", 1), FaceId(1));
        let a = f.on_data(LIFETIME, data("/data/a"), FaceId(9));
        assert_eq!(a, [Action::Drop(DropReason::Unsolicited)]);
        assert_eq!(f.counters.unsatisfied, 1);
    }

    #[test]
    fn unknown_face_is_dropped() {
        let mut f = router(0);
        let a = f.on_interest(SimTime::ZERO, interest("/data/a", 1), FaceId(42));
        assert_eq!(a, [Action::Drop(DropReason::UnknownFace)]);
    }
}
