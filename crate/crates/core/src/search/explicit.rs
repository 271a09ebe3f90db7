//! The search layer over a caller-supplied weighted digraph, with no
//! sampling or steering. Used to check the search against exact oracles.

use rustc_hash::FxHashSet;

use super::config::{PriorityPolicy, TerminationPolicy};
use super::engine::{BatchEnd, EdgeModel, Engine, EngineParams};
use crate::error::{Error, Result};
use crate::graph::{Dir, NodeId, NodeRecord, Rgg};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExplicitEdge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
    /// `false` models an edge that fails its collision check.
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExplicitGraph {
    pub vertices: usize,
    pub edges: Vec<ExplicitEdge>,
    pub start: usize,
    pub goal: usize,
    /// Admissible estimate of each vertex's cost to the goal.
    pub h_to_goal: Vec<f64>,
    /// Admissible estimate of each vertex's cost from the start.
    pub h_from_start: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphSearchConfig {
    pub priority: PriorityPolicy,
    pub termination: TerminationPolicy,
    pub heuristic_update: bool,
    /// `false` runs the unidirectional baseline.
    pub bidirectional: bool,
    pub max_batches: usize,
}

impl Default for GraphSearchConfig {
    fn default() -> Self {
        GraphSearchConfig {
            priority: PriorityPolicy::Fhat,
            termination: TerminationPolicy::LbOnly,
            heuristic_update: true,
            bidirectional: true,
            max_batches: 1000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphExpansion {
    pub dir: Dir,
    pub vertex: usize,
    pub g: f64,
    pub key: f64,
    pub batch: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphPlan {
    /// `+∞` when no path was found.
    pub cost: f64,
    pub path: Option<Vec<usize>>,
    /// Every expansion in order.
    pub expansions: Vec<GraphExpansion>,
    /// Incumbent costs in the order they were found.
    pub improvements: Vec<f64>,
    pub batches: u64,
    /// Heuristics at the end of the last batch, `[to goal, from start]`,
    /// `None` for vertices removed by pruning.
    pub h_hat: Vec<Option<[f64; 2]>>,
    /// Cost-to-come per direction at the end of the last batch.
    pub g: Vec<Option<[f64; 2]>>,
    /// Tree parents per direction at the end of the last batch.
    pub parents: Vec<Option<[Option<usize>; 2]>>,
}

/// Adjacency sorted by neighbor with the best weight per ordered pair.
struct ExplicitModel {
    out: Vec<Vec<(u32, f64, bool)>>,
    inc: Vec<Vec<(u32, f64, bool)>>,
}

/// Keeps, per ordered pair, the cheapest valid edge, or the cheapest edge
/// when none is valid.
fn better(a: (f64, bool), b: (f64, bool)) -> bool {
    match (a.1, b.1) {
        (true, false) => true,
        (false, true) => false,
        _ => a.0 < b.0,
    }
}

fn insert_best(list: &mut Vec<(u32, f64, bool)>, v: u32, w: f64, ok: bool) {
    match list.binary_search_by_key(&v, |e| e.0) {
        Ok(i) => {
            if better((w, ok), (list[i].1, list[i].2)) {
                list[i] = (v, w, ok);
            }
        }
        Err(i) => list.insert(i, (v, w, ok)),
    }
}

impl ExplicitModel {
    fn new(g: &ExplicitGraph) -> Self {
        let mut out = vec![Vec::new(); g.vertices];
        let mut inc = vec![Vec::new(); g.vertices];
        for e in &g.edges {
            insert_best(&mut out[e.from], e.to as u32, e.weight, e.valid);
            insert_best(&mut inc[e.to], e.from as u32, e.weight, e.valid);
        }
        ExplicitModel { out, inc }
    }

    fn edge(&self, from: NodeId, to: NodeId) -> Option<(f64, bool)> {
        let list = &self.out[from.index()];
        list.binary_search_by_key(&to.0, |e| e.0).ok().map(|i| (list[i].1, list[i].2))
    }
}

impl EdgeModel for ExplicitModel {
    fn candidates(&mut self, rgg: &Rgg, dir: Dir, x: NodeId, out: &mut Vec<NodeId>) {
        let list = match dir {
            Dir::Forward => &self.out[x.index()],
            Dir::Backward => &self.inc[x.index()],
        };
        out.extend(list.iter().map(|e| NodeId(e.0)).filter(|&id| rgg.contains(id)));
    }

    fn cost(&mut self, _rgg: &Rgg, from: NodeId, to: NodeId) -> f64 {
        self.edge(from, to).map_or(f64::INFINITY, |e| e.0)
    }

    fn valid(&mut self, _rgg: &Rgg, from: NodeId, to: NodeId) -> bool {
        self.edge(from, to).is_some_and(|e| e.1)
    }

    fn exhausted(&mut self) -> bool {
        false
    }

    fn now(&self) -> f64 {
        0.0
    }

    fn on_expand(&mut self) {}

    fn forget(&mut self, _removed: &FxHashSet<NodeId>) {}
}

fn check_graph(g: &ExplicitGraph) -> Result<()> {
    let n = g.vertices;
    if n == 0 {
        return Err(Error::Precondition("graph has no vertices".into()));
    }
    if g.start >= n || g.goal >= n {
        return Err(Error::Precondition("start and goal must be vertices".into()));
    }
    if g.h_to_goal.len() != n || g.h_from_start.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.h_to_goal.len().min(g.h_from_start.len()),
        });
    }
    if g.h_to_goal.iter().chain(&g.h_from_start).any(|h| h.is_nan() || *h < 0.0) {
        return Err(Error::Precondition("heuristics must be nonnegative".into()));
    }
    for e in &g.edges {
        if e.from >= n || e.to >= n {
            return Err(Error::Precondition(format!("edge {} -> {} leaves the graph", e.from, e.to)));
        }
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            return Err(Error::Precondition(format!(
                "edge {} -> {} has weight {}, expected finite and nonnegative",
                e.from, e.to, e.weight
            )));
        }
    }
    Ok(())
}

/// Runs the search on `graph`, repeating batches until one ends without
/// the first-intersection flag or `max_batches` is reached. Pruning runs
/// between batches.
pub fn plan_on_graph(graph: &ExplicitGraph, cfg: &GraphSearchConfig) -> Result<GraphPlan> {
    check_graph(graph)?;
    if cfg.max_batches == 0 {
        return Err(Error::Precondition("max_batches must be positive".into()));
    }
    let mut rgg = Rgg::abstract_vertices(graph.vertices);
    for v in 0..graph.vertices {
        let n = rgg.node_mut(NodeId(v as u32));
        n.h_prior = [graph.h_to_goal[v], graph.h_from_start[v]];
        n.h_hat = n.h_prior;
    }
    let params = EngineParams {
        priority: cfg.priority,
        termination: if cfg.bidirectional {
            cfg.termination
        } else {
            TerminationPolicy::LbOnly
        },
        heuristic_update: cfg.heuristic_update,
        bidirectional: cfg.bidirectional,
        stop_at_first_solution: false,
        log_expansions: true,
    };
    let (start, goal) = (NodeId(graph.start as u32), NodeId(graph.goal as u32));
    let mut model = ExplicitModel::new(graph);
    let mut engine = Engine::new(rgg, start, goal, params);
    let mut batches = 0;
    if start == goal {
        engine.record_trivial(0.0);
    } else {
        let mut changed = false;
        loop {
            engine.reseed(batches, changed);
            batches += 1;
            let end = engine.run_batch(&mut model);
            if end != (BatchEnd::Terminated { by_flag: true }) || batches as usize >= cfg.max_batches {
                break;
            }
            changed = engine.prune(&mut model) > 0;
        }
    }
    let snapshot = |f: &dyn Fn(&NodeRecord) -> [f64; 2]| {
        (0..graph.vertices)
            .map(|v| engine.rgg.get(NodeId(v as u32)).map(f))
            .collect::<Vec<_>>()
    };
    let parents = (0..graph.vertices)
        .map(|v| {
            engine
                .rgg
                .get(NodeId(v as u32))
                .map(|n| n.parent.map(|p| p.map(NodeId::index)))
        })
        .collect();
    Ok(GraphPlan {
        cost: engine.c_best,
        path: engine
            .incumbent
            .as_ref()
            .map(|p| p.iter().map(|id| id.index()).collect()),
        expansions: engine
            .expansion_log
            .iter()
            .map(|e| GraphExpansion {
                dir: e.dir,
                vertex: e.id.index(),
                g: e.g,
                key: e.key,
                batch: e.batch,
            })
            .collect(),
        improvements: engine.improvements.iter().map(|i| i.cost).collect(),
        batches: batches.max(1),
        h_hat: snapshot(&|n| n.h_hat),
        g: snapshot(&|n| n.g),
        parents,
    })
}
