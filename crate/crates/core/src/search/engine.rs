//! Search layer shared by the kinodynamic planner and the explicit-graph
//! adapter. The engine owns the graph store, the trees and the queues; an
//! [`EdgeModel`] supplies neighbor candidates, edge costs and validity.

use rustc_hash::FxHashSet;

use super::config::{PriorityPolicy, TerminationPolicy};
use super::queue::{Entry, OpenQueue};
use crate::graph::{Dir, NodeId, Rgg};

/// Costs are compared with this absolute slack.
pub(crate) const COST_EPS: f64 = 1e-9;

/// Edge source for one search run.
pub(crate) trait EdgeModel {
    /// Appends the graph neighbors of `x` for an expansion in `dir`: its
    /// successors when forward, its predecessors when backward.
    fn candidates(&mut self, rgg: &Rgg, dir: Dir, x: NodeId, out: &mut Vec<NodeId>);
    /// Admissible cost of the edge `from → to` along the dynamics, `+∞`
    /// when there is none.
    fn cost(&mut self, rgg: &Rgg, from: NodeId, to: NodeId) -> f64;
    /// Collision check of the edge `from → to`.
    fn valid(&mut self, rgg: &Rgg, from: NodeId, to: NodeId) -> bool;
    fn exhausted(&mut self) -> bool;
    /// Current time stamp for anytime events.
    fn now(&self) -> f64;
    fn on_expand(&mut self);
    /// Drops cached data about removed states.
    fn forget(&mut self, removed: &FxHashSet<NodeId>);
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct EngineParams {
    pub priority: PriorityPolicy,
    pub termination: TerminationPolicy,
    /// Raise `ĥ` from the opposite search's costs.
    pub heuristic_update: bool,
    /// `false` runs the forward search alone.
    pub bidirectional: bool,
    pub stop_at_first_solution: bool,
    pub log_expansions: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum BatchEnd {
    Terminated { by_flag: bool },
    OutOfTime,
    Solved,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Improvement {
    pub time: f64,
    pub cost: f64,
    pub batch: u64,
    pub path: Vec<NodeId>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Expansion {
    pub dir: Dir,
    pub id: NodeId,
    pub g: f64,
    pub key: f64,
    pub batch: u64,
}

/// Where a state with a finite cost-to-come was filed by the enqueue test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Filed {
    Open,
    /// Passes the `g + ĥ` test but not the half-cost test.
    Parked,
    /// Cannot lie on a solution cheaper than the incumbent.
    Dropped,
}

pub(crate) struct Engine {
    pub rgg: Rgg,
    params: EngineParams,
    roots: [NodeId; 2],
    queues: [OpenQueue; 2],
    parked: [OpenQueue; 2],
    dropped: [OpenQueue; 2],
    /// Smallest candidate cost-to-come discarded by the bound test before
    /// its edge was checked, per direction and batch.
    skipped_g: [f64; 2],
    pub c_best: f64,
    pub incumbent: Option<Vec<NodeId>>,
    pub meet: Option<NodeId>,
    pub improvements: Vec<Improvement>,
    first_hit: bool,
    pub batch: u64,
    pub expansions: usize,
    pub expansion_log: Vec<Expansion>,
    pub pruned: usize,
    scratch: Vec<NodeId>,
}

impl Engine {
    /// `rgg` must already hold both roots.
    pub fn new(mut rgg: Rgg, start: NodeId, goal: NodeId, params: EngineParams) -> Self {
        for (d, root) in [(Dir::Forward, start), (Dir::Backward, goal)] {
            let n = rgg.node_mut(root);
            n.g[d.index()] = 0.0;
            n.edge_cost[d.index()] = 0.0;
        }
        Engine {
            rgg,
            params,
            roots: [start, goal],
            queues: Default::default(),
            parked: Default::default(),
            dropped: Default::default(),
            skipped_g: [f64::INFINITY; 2],
            c_best: f64::INFINITY,
            incumbent: None,
            meet: None,
            improvements: Vec::new(),
            first_hit: false,
            batch: 0,
            expansions: 0,
            expansion_log: Vec::new(),
            pruned: 0,
            scratch: Vec::new(),
        }
    }

    pub fn root(&self, dir: Dir) -> NodeId {
        self.roots[dir.index()]
    }

    /// Records a solution that needs no search, such as `start == goal`.
    pub fn record_trivial(&mut self, time: f64) {
        self.c_best = 0.0;
        self.meet = Some(self.roots[0]);
        self.incumbent = Some(vec![self.roots[0]]);
        self.improvements.push(Improvement {
            time,
            cost: 0.0,
            batch: self.batch,
            path: vec![self.roots[0]],
        });
    }

    /// Starts batch `batch`: empties every set and requeues the roots.
    /// Heuristics return to their priors when the graph changed, since C1
    /// values are only admissible for the graph they were computed on.
    pub fn reseed(&mut self, batch: u64, graph_changed: bool) {
        self.batch = batch;
        for d in 0..2 {
            self.queues[d].clear();
            self.parked[d].clear();
            self.dropped[d].clear();
        }
        self.skipped_g = [f64::INFINITY; 2];
        self.first_hit = false;
        if graph_changed {
            self.reset_heuristics();
        }
        self.filter_enqueue(Dir::Forward, self.roots[0]);
        if self.params.bidirectional {
            self.filter_enqueue(Dir::Backward, self.roots[1]);
        }
    }

    pub fn reset_heuristics(&mut self) {
        for id in self.rgg.ids() {
            let n = self.rgg.node_mut(id);
            n.h_hat = n.h_prior;
        }
    }

    /// Runs the current batch until termination, exhaustion or, when
    /// requested, the first solution.
    pub fn run_batch<M: EdgeModel>(&mut self, model: &mut M) -> BatchEnd {
        loop {
            if self.params.stop_at_first_solution && self.c_best.is_finite() {
                return BatchEnd::Solved;
            }
            if model.exhausted() {
                return BatchEnd::OutOfTime;
            }
            if self.terminate() {
                return BatchEnd::Terminated { by_flag: self.first_hit };
            }
            let Some((dir, x, e)) = self.pop_min() else {
                return BatchEnd::Terminated { by_flag: false };
            };
            self.expansions += 1;
            model.on_expand();
            if self.params.log_expansions {
                self.expansion_log.push(Expansion {
                    dir,
                    id: x,
                    g: e.g,
                    key: e.key,
                    batch: self.batch,
                });
            }
            self.expand(model, dir, x);
        }
    }

    /// Batch termination test.
    ///
    /// Besides the first-intersection flag, the batch ends once the
    /// incumbent is no worse than a lower bound on any undiscovered
    /// solution. Parked states keep their costs in the `f` and `g` bounds
    /// because they still lie on the frontier.
    pub fn terminate(&self) -> bool {
        if self.first_hit && self.params.termination == TerminationPolicy::FirstIntersectionPlusLb {
            return true;
        }
        let [qf, qb] = &self.queues;
        if !self.params.bidirectional {
            return qf.is_empty() || self.c_best <= qf.min_f();
        }
        if qf.is_empty() && qb.is_empty() {
            return true;
        }
        let k_min = qf.min_key().min(qb.min_key());
        let f_min = |d: usize| self.queues[d].min_f().min(self.parked[d].min_f());
        let g_min = |d: usize| self.queues[d].min_g().min(self.parked[d].min_g());
        let bound = k_min.max(f_min(0)).max(f_min(1)).max(g_min(0) + g_min(1));
        self.c_best <= bound
    }

    /// Removes and returns the smallest-key entry over both queues. Ties go
    /// to the larger `g`, then the smaller id, then the forward queue.
    pub fn pop_min(&mut self) -> Option<(Dir, NodeId, Entry)> {
        let best = Dir::BOTH
            .into_iter()
            .filter_map(|d| self.queues[d.index()].peek().map(|(id, e)| (d, id, e)))
            .min_by(|a, b| {
                a.2.key
                    .total_cmp(&b.2.key)
                    .then(b.2.g.total_cmp(&a.2.g))
                    .then(a.1.cmp(&b.1))
                    .then(a.0.cmp(&b.0))
            })?;
        self.queues[best.0.index()].remove(best.1);
        Some(best)
    }

    fn key(&self, g: f64, h: f64) -> f64 {
        match self.params.priority {
            PriorityPolicy::MmMax if self.params.bidirectional => (g + h).max(2.0 * g),
            _ => g + h,
        }
    }

    /// Files `y` by its current cost-to-come in `dir`.
    fn filter_enqueue(&mut self, dir: Dir, y: NodeId) {
        let di = dir.index();
        self.queues[di].remove(y);
        self.parked[di].remove(y);
        self.dropped[di].remove(y);
        if y == self.roots[dir.other().index()] {
            return;
        }
        let n = self.rgg.node(y);
        let (g, h) = (n.g[di], n.h_hat[di]);
        if !g.is_finite() {
            return;
        }
        let e = Entry {
            key: self.key(g, h),
            g,
            f: g + h,
        };
        let filed = if !self.params.bidirectional {
            if e.f <= self.c_best {
                Filed::Open
            } else {
                Filed::Dropped
            }
        } else if g + g.max(h) <= self.c_best {
            Filed::Open
        } else if e.f <= self.c_best {
            Filed::Parked
        } else {
            Filed::Dropped
        };
        match filed {
            Filed::Open => self.queues[di].upsert(y, e),
            Filed::Parked => self.parked[di].upsert(y, e),
            Filed::Dropped => self.dropped[di].upsert(y, e),
        }
    }

    /// Lower bound on the optimal cost-to-come in `dir` of any state not
    /// yet settled by that search in this batch.
    fn frontier_g(&self, dir: Dir) -> f64 {
        let d = dir.index();
        self.queues[d]
            .min_g()
            .min(self.parked[d].min_g())
            .min(self.dropped[d].min_g())
            .min(self.skipped_g[d])
    }

    /// On-the-fly heuristic update: the opposite search bounds the
    /// remaining cost of `y` from below by its own cost to `y` or by its
    /// frontier, whichever is smaller.
    fn update_heuristic(&mut self, dir: Dir, y: NodeId) {
        if !self.params.heuristic_update || !self.params.bidirectional {
            return;
        }
        let o = dir.other();
        let bound = self.rgg.node(y).g[o.index()].min(self.frontier_g(o));
        let h = &mut self.rgg.node_mut(y).h_hat[dir.index()];
        if bound > *h {
            *h = bound;
        }
    }

    fn expand<M: EdgeModel>(&mut self, model: &mut M, dir: Dir, x: NodeId) {
        let di = dir.index();
        let mut nb = std::mem::take(&mut self.scratch);
        nb.clear();
        model.candidates(&self.rgg, dir, x, &mut nb);
        self.rgg.tree_links(dir, x, &mut nb);
        nb.sort_unstable();
        nb.dedup();
        let gx = self.rgg.node(x).g[di];
        for &y in &nb {
            if y == x || !self.rgg.contains(y) {
                continue;
            }
            if self.rgg.node(y).parent[di] == Some(x) {
                if self.check_meet_at(model.now(), y) {
                    break;
                }
                self.filter_enqueue(dir, y);
                continue;
            }
            let (from, to) = match dir {
                Dir::Forward => (x, y),
                Dir::Backward => (y, x),
            };
            let c = model.cost(&self.rgg, from, to);
            if !c.is_finite() {
                continue;
            }
            let cand = gx + c;
            let ny = self.rgg.node(y);
            if !(cand < ny.g[di] - COST_EPS) {
                continue;
            }
            if cand + ny.h_hat[di] > self.c_best {
                self.skipped_g[di] = self.skipped_g[di].min(cand);
                continue;
            }
            if !model.valid(&self.rgg, from, to) {
                continue;
            }
            self.rewire(dir, y, x, c);
            if self.settle_subtree(model, dir, y) {
                break;
            }
        }
        self.scratch = nb;
    }

    /// Makes `p` the parent of `y` in tree `dir` and propagates the new
    /// costs to every descendant.
    fn rewire(&mut self, dir: Dir, y: NodeId, p: NodeId, c: f64) {
        let di = dir.index();
        if let Some(old) = self.rgg.node(y).parent[di] {
            let ch = &mut self.rgg.node_mut(old).children[di];
            if let Some(pos) = ch.iter().position(|&z| z == y) {
                ch.swap_remove(pos);
            }
        }
        self.rgg.node_mut(p).children[di].push(y);
        let g = self.rgg.node(p).g[di] + c;
        let n = self.rgg.node_mut(y);
        n.parent[di] = Some(p);
        n.edge_cost[di] = c;
        n.g[di] = g;
        let mut stack = self.rgg.node(y).children[di].clone();
        while let Some(z) = stack.pop() {
            let n = self.rgg.node(z);
            let g = self.rgg.node(n.parent[di].expect("child has a parent")).g[di] + n.edge_cost[di];
            stack.extend_from_slice(&n.children[di]);
            self.rgg.node_mut(z).g[di] = g;
        }
    }

    /// Meeting checks, heuristic updates and filing for `y` and its
    /// descendants after a cost change. Returns true when the batch's
    /// first intersection stopped the expansion.
    fn settle_subtree<M: EdgeModel>(&mut self, model: &mut M, dir: Dir, y: NodeId) -> bool {
        let di = dir.index();
        let mut stack = vec![y];
        while let Some(z) = stack.pop() {
            if self.check_meet_at(model.now(), z) {
                return true;
            }
            self.update_heuristic(dir, z);
            self.filter_enqueue(dir, z);
            stack.extend(self.rgg.node(z).children[di].iter().rev());
        }
        false
    }

    /// Takes the path through `y` as the incumbent when it improves on it.
    /// Tree edges are collision-checked on insertion, so the joined path is
    /// valid. Returns true when this sets the first-intersection flag.
    fn check_meet_at(&mut self, now: f64, y: NodeId) -> bool {
        let n = self.rgg.node(y);
        let total = n.g[0] + n.g[1];
        if !(total < self.c_best - COST_EPS) {
            return false;
        }
        let mut path = self.rgg.tree_path(Dir::Forward, y);
        path.reverse();
        path.extend(self.rgg.tree_path(Dir::Backward, y).into_iter().skip(1));
        self.c_best = total;
        self.incumbent = Some(path.clone());
        self.meet = Some(y);
        self.improvements.push(Improvement {
            time: now,
            cost: total,
            batch: self.batch,
            path,
        });
        if self.params.termination == TerminationPolicy::FirstIntersectionPlusLb {
            self.first_hit = true;
            return true;
        }
        false
    }

    /// Removes states that cannot improve the incumbent. Tree vertices with
    /// `f̂ > C_best` are removed with their subtrees orphaned; then samples
    /// outside every tree with `f̂ ≥ C_best` are removed. The roots and the
    /// incumbent path are kept.
    pub fn prune<M: EdgeModel>(&mut self, model: &mut M) -> usize {
        if !self.c_best.is_finite() {
            return 0;
        }
        let c = self.c_best;
        let tol = COST_EPS * c.max(1.0);
        let mut keep: FxHashSet<NodeId> = self.roots.into_iter().collect();
        if let Some(p) = &self.incumbent {
            keep.extend(p.iter().copied());
        }
        let doomed: Vec<NodeId> = self
            .rgg
            .nodes()
            .filter(|n| !keep.contains(&n.id))
            .filter(|n| (n.in_tree(Dir::Forward) || n.in_tree(Dir::Backward)) && n.f_prior() > c + tol)
            .map(|n| n.id)
            .collect();
        let mut removed: FxHashSet<NodeId> = FxHashSet::default();
        for &id in &doomed {
            for d in Dir::BOTH {
                self.detach(d, id);
            }
            removed.insert(id);
        }
        for &id in &doomed {
            self.rgg.remove(id);
        }
        let samples: Vec<NodeId> = self
            .rgg
            .nodes()
            .filter(|n| !keep.contains(&n.id))
            .filter(|n| !n.in_tree(Dir::Forward) && !n.in_tree(Dir::Backward) && n.f_prior() >= c)
            .map(|n| n.id)
            .collect();
        for id in samples {
            self.rgg.remove(id);
            removed.insert(id);
        }
        for d in 0..2 {
            self.queues[d].clear();
            self.parked[d].clear();
            self.dropped[d].clear();
        }
        if !removed.is_empty() {
            model.forget(&removed);
            self.rgg.rebuild_index();
        }
        self.pruned += removed.len();
        removed.len()
    }

    /// Cuts `id` out of tree `dir`; its descendants leave the tree.
    fn detach(&mut self, dir: Dir, id: NodeId) {
        let di = dir.index();
        let Some(n) = self.rgg.get(id) else { return };
        if !n.in_tree(dir) {
            return;
        }
        if let Some(p) = n.parent[di] {
            if let Some(pn) = self.rgg.get_mut(p) {
                pn.children[di].retain(|&z| z != id);
            }
        }
        let mut stack = vec![id];
        while let Some(z) = stack.pop() {
            let n = self.rgg.node_mut(z);
            stack.append(&mut n.children[di]);
            n.parent[di] = None;
            n.g[di] = f64::INFINITY;
            n.edge_cost[di] = f64::INFINITY;
        }
    }
}
