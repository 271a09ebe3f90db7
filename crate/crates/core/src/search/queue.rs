use std::cmp::{Ordering, Reverse};
use std::collections::BTreeSet;

use rustc_hash::FxHashMap;

use crate::graph::NodeId;

/// Totally ordered float for use in ordered sets.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ord64(pub f64);

impl Eq for Ord64 {}

impl PartialOrd for Ord64 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ord64 {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Priority data of a queued state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Entry {
    pub key: f64,
    pub g: f64,
    pub f: f64,
}

type KeyOrder = (Ord64, Reverse<Ord64>, NodeId);

/// Open list for one search direction.
///
/// Pops the smallest key, ties to larger `g`, then smaller id. Also answers
/// the smallest `g` and smallest `f = g + ĥ` among its members.
#[derive(Clone, Debug, Default)]
pub struct OpenQueue {
    by_key: BTreeSet<KeyOrder>,
    by_g: BTreeSet<(Ord64, NodeId)>,
    by_f: BTreeSet<(Ord64, NodeId)>,
    members: FxHashMap<NodeId, Entry>,
}

impl OpenQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.members.contains_key(&id)
    }

    pub fn get(&self, id: NodeId) -> Option<Entry> {
        self.members.get(&id).copied()
    }

    /// Inserts `id`, replacing any previous entry.
    pub fn upsert(&mut self, id: NodeId, e: Entry) {
        self.remove(id);
        self.by_key.insert((Ord64(e.key), Reverse(Ord64(e.g)), id));
        self.by_g.insert((Ord64(e.g), id));
        self.by_f.insert((Ord64(e.f), id));
        self.members.insert(id, e);
    }

    pub fn remove(&mut self, id: NodeId) -> Option<Entry> {
        let e = self.members.remove(&id)?;
        self.by_key.remove(&(Ord64(e.key), Reverse(Ord64(e.g)), id));
        self.by_g.remove(&(Ord64(e.g), id));
        self.by_f.remove(&(Ord64(e.f), id));
        Some(e)
    }

    pub fn peek(&self) -> Option<(NodeId, Entry)> {
        self.by_key.first().map(|&(_, _, id)| (id, self.members[&id]))
    }

    pub fn pop(&mut self) -> Option<(NodeId, Entry)> {
        let (id, _) = self.peek()?;
        self.remove(id).map(|e| (id, e))
    }

    /// Smallest key, `+∞` when empty.
    pub fn min_key(&self) -> f64 {
        self.by_key.first().map_or(f64::INFINITY, |k| k.0 .0)
    }

    pub fn min_g(&self) -> f64 {
        self.by_g.first().map_or(f64::INFINITY, |k| k.0 .0)
    }

    pub fn min_f(&self) -> f64 {
        self.by_f.first().map_or(f64::INFINITY, |k| k.0 .0)
    }

    pub fn clear(&mut self) {
        self.by_key.clear();
        self.by_g.clear();
        self.by_f.clear();
        self.members.clear();
    }

    /// Members in pop order.
    pub fn iter(&self) -> impl Iterator<Item = (NodeId, Entry)> + '_ {
        self.by_key.iter().map(move |&(_, _, id)| (id, self.members[&id]))
    }
}
