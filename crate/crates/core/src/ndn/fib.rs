use crate::ndn::{FaceId, Name};

/// Name-prefix routes with longest-prefix-match lookup.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FibTable {
    routes: Vec<(Name, FaceId)>,
}

impl FibTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Installs or replaces the route for the exact `prefix`.
    pub fn insert(&mut self, prefix: Name, out_face: FaceId) {
        match self.routes.iter_mut().find(|(p, _)| *p == prefix) {
            Some(route) => route.1 = out_face,
            None => self.routes.push((prefix, out_face)),
        }
    }

    pub fn remove(&mut self, prefix: &Name) -> Option<FaceId> {
        let at = self.routes.iter().position(|(p, _)| p == prefix)?;
        Some(self.routes.remove(at).1)
    }

    pub fn routes(&self) -> &[(Name, FaceId)] {
        &self.routes
    }

    pub fn len(&self) -> usize {
        self.routes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.routes.is_empty()
    }

    pub fn lookup(&self, name: &Name) -> Option<FaceId> {
        self.routes
            .iter()
            .filter(|(p, _)| p.is_prefix_of(name))
            .max_by_key(|(p, _)| p.len())
            .map(|(_, f)| *f)
    }
}

pub fn fib_lookup(fib: &FibTable, name: &Name) -> Option<FaceId> {
    fib.lookup(name)
}
