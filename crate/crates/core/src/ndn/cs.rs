use std::collections::BTreeMap;
use std::rc::Rc;

use rustc_hash::FxHashMap as HashMap;

use crate::ndn::{Data, Name};

/// Exact-name Data cache with least-recently-used eviction.
#[derive(Debug, Default)]
pub struct ContentStore {
    capacity: usize,
    tick: u64,
    entries: HashMap<Name, (Rc<Data>, u64)>,
    recency: BTreeMap<u64, Name>,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            ..Default::default()
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn bump(&mut self) -> u64 {
        self.tick += 1;
        self.tick
    }

    /// A hit refreshes the entry's recency.
    pub fn lookup(&mut self, name: &Name) -> Option<Rc<Data>> {
        if self.capacity == 0 {
            return None;
        }
        let tick = self.bump();
        let (data, stamp) = self.entries.get_mut(name)?;
        let old = std::mem::replace(stamp, tick);
        let data = Rc::clone(data);
        let key = self.recency.remove(&old).expect("recency index in sync");
        self.recency.insert(tick, key);
        Some(data)
    }

    pub fn contains(&self, name: &Name) -> bool {
        self.entries.contains_key(name)
    }

    /// Insert or refresh; returns the evicted name, if any.
    pub fn insert(&mut self, data: Rc<Data>) -> Option<Name> {
        if self.capacity == 0 {
            return None;
        }
        let tick = self.bump();
        if let Some((slot, stamp)) = self.entries.get_mut(&data.name) {
            *slot = data;
            let old = std::mem::replace(stamp, tick);
            let key = self.recency.remove(&old).expect("recency index in sync");
            self.recency.insert(tick, key);
            return None;
        }
        let mut evicted = None;
        if self.entries.len() >= self.capacity {
            let (_, victim) = self.recency.pop_first().expect("non-empty at capacity");
            self.entries.remove(&victim);
            evicted = Some(victim);
        }
        self.recency.insert(tick, data.name.clone());
        self.entries.insert(data.name.clone(), (data, tick));
        evicted
    }
}
