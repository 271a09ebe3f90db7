//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use btit::search::{ExplicitEdge, ExplicitGraph, Ord64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Single-source shortest distances over `adj[u] = [(v, w)]`.
pub fn dijkstra(n: usize, adj: &[Vec<(usize, f64)>], src: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[src] = 0.0;
    heap.push(Reverse((Ord64(0.0), src)));
    while let Some(Reverse((Ord64(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Ord64(nd), v)));
            }
        }
    }
    dist
}

/// Forward and reverse adjacency, optionally restricted to valid edges and
/// to vertices for which `keep` holds.
pub fn adjacency(g: &ExplicitGraph, valid_only: bool, keep: &dyn Fn(usize) -> bool) -> [Vec<Vec<(usize, f64)>>; 2] {
    let mut fwd = vec![Vec::new(); g.vertices];
    let mut rev = vec![Vec::new(); g.vertices];
    for e in &g.edges {
        if (valid_only && !e.valid) || !keep(e.from) || !keep(e.to) {
            continue;
        }
        fwd[e.from].push((e.to, e.weight));
        rev[e.to].push((e.from, e.weight));
    }
    [fwd, rev]
}

/// Optimal cost from start and to goal over valid edges.
pub fn optimal(g: &ExplicitGraph) -> (Vec<f64>, Vec<f64>) {
    let [fwd, rev] = adjacency(g, true, &|_| true);
    (dijkstra(g.vertices, &fwd, g.start), dijkstra(g.vertices, &rev, g.goal))
}

/// Random digraph with at most `max_n` vertices and out-degree at most 6.
///
/// Weights have three decimals so distinct path costs differ by far more
/// than rounding. About one edge in ten fails its validity check. The
/// heuristics are the distances over all edges scaled by a random factor
/// in `[0, 1]`, which keeps them admissible and consistent for the valid
/// subgraph.
pub fn random_graph(seed: u64, max_n: usize) -> ExplicitGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_n);
    let mut edges = Vec::new();
    for u in 0..n {
        for _ in 0..rng.gen_range(0..=6) {
            let v = rng.gen_range(0..n);
            if v == u {
                continue;
            }
            edges.push(ExplicitEdge {
                from: u,
                to: v,
                weight: rng.gen_range(0..10_000) as f64 / 1000.0,
                valid: rng.gen_bool(0.9),
            });
        }
    }
    let start = 0;
    let goal = n - 1;
    let mut g = ExplicitGraph {
        vertices: n,
        edges,
        start,
        goal,
        h_to_goal: vec![0.0; n],
        h_from_start: vec![0.0; n],
    };
    let [fwd, rev] = adjacency(&g, false, &|_| true);
    let alpha = rng.gen_range(0.0..=1.0);
    let beta = rng.gen_range(0.0..=1.0);
    let scale = |k: f64| move |d: f64| if d.is_finite() { k * d } else { f64::INFINITY };
    g.h_to_goal = dijkstra(n, &rev, goal).into_iter().map(scale(alpha)).collect();
    g.h_from_start = dijkstra(n, &fwd, start).into_iter().map(scale(beta)).collect();
    g
}

/// Cost of `path` using the cheapest valid edge per hop.
pub fn path_cost(g: &ExplicitGraph, path: &[usize]) -> Option<f64> {
    let mut total = 0.0;
    for w in path.windows(2) {
        let best = g
            .edges
            .iter()
            .filter(|e| e.from == w[0] && e.to == w[1] && e.valid)
            .map(|e| e.weight)
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return None;
        }
        total += best;
    }
    Some(total)
}
