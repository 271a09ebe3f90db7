//! The implicit random geometric graph: a store of sampled states with
//! per-state bidirectional tree bookkeeping, and the neighbor queries that
//! define its edges.
//!
//! Distances are Euclidean after each coordinate is scaled to `[0, 1]` by
//! the workspace bounds. They only select candidate edges; edge costs always
//! come from steering.

mod kdtree;

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::geometry::Workspace;
use kdtree::KdTree;

/// Stable state identifier. Ids are never reused within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Search direction: forward from the start or backward from the goal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Forward = 0,
    Backward = 1,
}

impl Dir {
    pub const BOTH: [Dir; 2] = [Dir::Forward, Dir::Backward];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Dir {
        match self {
            Dir::Forward => Dir::Backward,
            Dir::Backward => Dir::Forward,
        }
    }
}

impl fmt::Display for Dir {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dir::Forward => "F",
            Dir::Backward => "B",
        })
    }
}

/// One state and its place in both search trees.
///
/// Arrays are indexed by [`Dir::index`]. `g[d]` is finite exactly when the
/// state belongs to tree `d`; `h_hat[Forward]` estimates the cost to the
/// goal and `h_hat[Backward]` the cost from the start.
#[derive(Clone, Debug)]
pub struct NodeRecord {
    pub id: NodeId,
    pub x: DVector<f64>,
    pub(crate) norm: Vec<f64>,
    pub g: [f64; 2],
    pub h_hat: [f64; 2],
    /// Heuristic values before any on-the-fly update.
    pub h_prior: [f64; 2],
    pub parent: [Option<NodeId>; 2],
    pub children: [Vec<NodeId>; 2],
    /// Cost of the tree edge to `parent[d]`.
    pub edge_cost: [f64; 2],
}

impl NodeRecord {
    pub fn in_tree(&self, dir: Dir) -> bool {
        self.g[dir.index()].is_finite()
    }

    /// Admissible total-cost estimate through this state.
    pub fn f_prior(&self) -> f64 {
        self.h_prior[0] + self.h_prior[1]
    }
}

/// PRM*-style default for the radius constant in dimension `d`.
pub fn default_radius_gamma(d: usize) -> f64 {
    let d = d as f64;
    2.0 * (1.0 + 1.0 / d).powf(1.0 / d)
}

/// `gamma · (ln q / q)^(1/d)` for `q` states in dimension `d`.
pub fn connection_radius(gamma: f64, q: f64, d: usize) -> Result<f64> {
    if !(q >= 2.0) {
        return Err(Error::Precondition(format!("connection radius needs q >= 2, got {q}")));
    }
    if d == 0 {
        return Err(Error::Precondition("connection radius needs d >= 1".into()));
    }
    Ok(gamma * (q.ln() / q).powf(1.0 / d as f64))
}

/// `ceil(2 ln q)`, at least one.
pub fn knn_count(q: usize) -> usize {
    ((2.0 * (q.max(2) as f64).ln()).ceil() as usize).max(1)
}

/// State store, spatial index and radius constant.
#[derive(Clone, Debug)]
pub struct Rgg {
    nodes: Vec<Option<NodeRecord>>,
    live: usize,
    lower: Vec<f64>,
    span: Vec<f64>,
    index: KdTree,
    index_fresh: bool,
    radius_gamma: f64,
}

impl Rgg {
    pub fn new(workspace: &Workspace, radius_gamma: Option<f64>) -> Self {
        let lower = workspace.lower().to_vec();
        let span = workspace
            .lower()
            .iter()
            .zip(workspace.upper())
            .map(|(l, u)| u - l)
            .collect();
        Rgg {
            nodes: Vec::new(),
            live: 0,
            radius_gamma: radius_gamma.unwrap_or_else(|| default_radius_gamma(workspace.dim())),
            lower,
            span,
            index: KdTree::default(),
            index_fresh: true,
        }
    }

    /// A store of `n` state-less vertices, used for explicit graphs.
    pub(crate) fn abstract_vertices(n: usize) -> Self {
        let mut rgg = Rgg {
            nodes: Vec::with_capacity(n),
            live: 0,
            lower: Vec::new(),
            span: Vec::new(),
            index: KdTree::default(),
            index_fresh: true,
            radius_gamma: 1.0,
        };
        for _ in 0..n {
            rgg.add(DVector::zeros(0), [0.0; 2]);
        }
        rgg
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn radius_gamma(&self) -> f64 {
        self.radius_gamma
    }

    /// Number of stored states.
    pub fn q(&self) -> usize {
        self.live
    }

    /// One past the largest id ever issued.
    pub fn capacity(&self) -> usize {
        self.nodes.len()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.span))
            .map(|(v, (l, s))| (v - l) / s)
            .collect()
    }

    /// Stores `x` with the given prior heuristics. The index is stale until
    /// [`Rgg::rebuild_index`].
    pub fn add(&mut self, x: DVector<f64>, h_prior: [f64; 2]) -> NodeId {
        let id = NodeId(u32::try_from(self.nodes.len()).expect("fewer than 2^32 states"));
        let norm = self.normalize(x.as_slice());
        self.nodes.push(Some(NodeRecord {
            id,
            x,
            norm,
            g: [f64::INFINITY; 2],
            h_hat: h_prior,
            h_prior,
            parent: [None; 2],
            children: [Vec::new(), Vec::new()],
            edge_cost: [f64::INFINITY; 2],
        }));
        self.live += 1;
        self.index_fresh = false;
        id
    }

    /// Removes a state; tree links must already be detached.
    pub(crate) fn remove(&mut self, id: NodeId) {
        if let Some(slot) = self.nodes.get_mut(id.index()) {
            if slot.take().is_some() {
                self.live -= 1;
                self.index_fresh = false;
            }
        }
    }

    pub fn rebuild_index(&mut self) {
        let entries: Vec<(NodeId, &[f64])> = self
            .nodes
            .iter()
            .flatten()
            .map(|n| (n.id, n.norm.as_slice()))
            .collect();
        self.index = KdTree::build(self.lower.len(), entries);
        self.index_fresh = true;
    }

    pub fn index_is_fresh(&self) -> bool {
        self.index_fresh
    }

    pub fn get(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(id.index()).and_then(Option::as_ref)
    }

    pub(crate) fn get_mut(&mut self, id: NodeId) -> Option<&mut NodeRecord> {
        self.nodes.get_mut(id.index()).and_then(Option::as_mut)
    }

    pub(crate) fn node(&self, id: NodeId) -> &NodeRecord {
        self.get(id).expect("live node")
    }

    pub(crate) fn node_mut(&mut self, id: NodeId) -> &mut NodeRecord {
        self.get_mut(id).expect("live node")
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.get(id).is_some()
    }

    /// Live records in ascending id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.iter().flatten()
    }

    /// Radius for the current number of states.
    pub fn radius(&self) -> Result<f64> {
        connection_radius(self.radius_gamma, self.live as f64, self.dim())
    }

    /// Ids within normalized distance `r` (inclusive) of `x`, excluding
    /// `exclude`, ascending.
    pub fn near(&self, x: &DVector<f64>, r: f64, exclude: Option<NodeId>) -> Result<Vec<NodeId>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut out = Vec::new();
        self.near_normalized(&self.normalize(x.as_slice()), r, exclude, &mut out);
        Ok(out)
    }

    /// Appends the radius neighbors of a normalized point; returns the
    /// number of index nodes visited.
    pub(crate) fn near_normalized(&self, q: &[f64], r: f64, exclude: Option<NodeId>, out: &mut Vec<NodeId>) -> usize {
        debug_assert!(self.index_fresh, "index rebuilt after the last change");
        let start = out.len();
        let visited = self.index.within(q, r, out);
        out[start..].sort_unstable();
        if let Some(ex) = exclude {
            if let Ok(pos) = out[start..].binary_search(&ex) {
                out.remove(start + pos);
            }
        }
        visited
    }

    /// Appends the `k` nearest neighbors of a normalized point.
    pub(crate) fn nearest_normalized(&self, q: &[f64], k: usize, exclude: Option<NodeId>, out: &mut Vec<NodeId>) -> usize {
        debug_assert!(self.index_fresh, "index rebuilt after the last change");
        self.index.nearest(q, k, exclude, out)
    }

    pub fn nearest(&self, x: &DVector<f64>, k: usize, exclude: Option<NodeId>) -> Result<Vec<NodeId>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut out = Vec::new();
        self.nearest_normalized(&self.normalize(x.as_slice()), k, exclude, &mut out);
        Ok(out)
    }

    /// Appends the tree links that always join the neighbor set of `id`
    /// when expanded in `dir`: its parent in the opposite tree and its
    /// children in `dir`.
    pub(crate) fn tree_links(&self, dir: Dir, id: NodeId, out: &mut Vec<NodeId>) {
        let n = self.node(id);
        if let Some(p) = n.parent[dir.other().index()] {
            out.push(p);
        }
        out.extend_from_slice(&n.children[dir.index()]);
    }

    /// Radius neighbors of a stored state plus its tree links, deduplicated
    /// and ascending.
    pub fn neighbors(&self, dir: Dir, id: NodeId, r: f64) -> Result<Vec<NodeId>> {
        let n = self
            .get(id)
            .ok_or_else(|| Error::Precondition(format!("unknown state {id}")))?;
        let mut out = Vec::new();
        self.near_normalized(&n.norm, r, Some(id), &mut out);
        self.tree_links(dir, id, &mut out);
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Ids of all states, ascending.
    pub fn ids(&self) -> Vec<NodeId> {
        self.nodes().map(|n| n.id).collect()
    }

    /// Follows `parent[dir]` from `id` to the root of tree `dir`.
    pub fn tree_path(&self, dir: Dir, id: NodeId) -> Vec<NodeId> {
        let mut path = vec![id];
        let mut cur = id;
        while let Some(p) = self.node(cur).parent[dir.index()] {
            path.push(p);
            cur = p;
            debug_assert!(path.len() <= self.nodes.len(), "tree is acyclic");
        }
        path
    }
}
