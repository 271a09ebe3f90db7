//! Static k-d tree over normalized states.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::NodeId;

const LEAF_SIZE: usize = 8;

#[derive(Clone, Debug)]
struct KdNode {
    start: usize,
    end: usize,
    split_dim: usize,
    split: f64,
    children: Option<(usize, usize)>,
}

/// Balanced tree built once per batch; queries never mutate it.
#[derive(Clone, Debug, Default)]
pub(crate) struct KdTree {
    dim: usize,
    /// Points in tree order, flattened.
    points: Vec<f64>,
    ids: Vec<NodeId>,
    nodes: Vec<KdNode>,
}

#[derive(PartialEq)]
struct Candidate(f64, NodeId);

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KdTree {
    pub fn build(dim: usize, entries: Vec<(NodeId, &[f64])>) -> Self {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        let mut tree = KdTree {
            dim,
            points: Vec::with_capacity(entries.len() * dim),
            ids: Vec::with_capacity(entries.len()),
            nodes: Vec::new(),
        };
        if entries.is_empty() {
            return tree;
        }
        tree.split(&entries, &mut order, 0);
        for &i in &order {
            tree.ids.push(entries[i].0);
            tree.points.extend_from_slice(entries[i].1);
        }
        tree
    }

    fn split(&mut self, entries: &[(NodeId, &[f64])], order: &mut [usize], offset: usize) -> usize {
        let node = self.nodes.len();
        self.nodes.push(KdNode {
            start: offset,
            end: offset + order.len(),
            split_dim: 0,
            split: 0.0,
            children: None,
        });
        if order.len() <= LEAF_SIZE || self.dim == 0 {
            return node;
        }
        // split on the widest coordinate
        let mut best = (0, -1.0);
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in order.iter() {
                lo = lo.min(entries[i].1[d]);
                hi = hi.max(entries[i].1[d]);
            }
            if hi - lo > best.1 {
                best = (d, hi - lo);
            }
        }
        let d = best.0;
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            entries[a].1[d]
                .total_cmp(&entries[b].1[d])
                .then(entries[a].0.cmp(&entries[b].0))
        });
        let split = entries[order[mid]].1[d];
        let (left, right) = order.split_at_mut(mid);
        let l = self.split(entries, left, offset);
        let r = self.split(entries, right, offset + mid);
        let n = &mut self.nodes[node];
        n.split_dim = d;
        n.split = split;
        n.children = Some((l, r));
        node
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Appends every id within distance `r` (inclusive) of `q`, unordered.
    /// Returns the number of tree nodes visited.
    pub fn within(&self, q: &[f64], r: f64, out: &mut Vec<NodeId>) -> usize {
        if self.nodes.is_empty() {
            return 0;
        }
        let r2 = r * r;
        let mut stack = vec![0usize];
        let mut visited = 0;
        while let Some(ni) = stack.pop() {
            visited += 1;
            let node = &self.nodes[ni];
            match node.children {
                None => {
                    for i in node.start..node.end {
                        if dist2(self.point(i), q) <= r2 {
                            out.push(self.ids[i]);
                        }
                    }
                }
                Some((l, rr)) => {
                    let diff = q[node.split_dim] - node.split;
                    if diff <= 0.0 {
                        stack.push(l);
                        if diff * diff <= r2 {
                            stack.push(rr);
                        }
                    } else {
                        stack.push(rr);
                        if diff * diff <= r2 {
                            stack.push(l);
                        }
                    }
                }
            }
        }
        visited
    }

    /// The `k` nearest ids to `q`, ties broken by smaller id, skipping
    /// `exclude`. Returned in ascending id order.
    pub fn nearest(&self, q: &[f64], k: usize, exclude: Option<NodeId>, out: &mut Vec<NodeId>) -> usize {
        if self.nodes.is_empty() || k == 0 {
            return 0;
        }
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let mut stack = vec![0usize];
        let mut visited = 0;
        while let Some(ni) = stack.pop() {
            visited += 1;
            let node = &self.nodes[ni];
            match node.children {
                None => {
                    for i in node.start..node.end {
                        if Some(self.ids[i]) == exclude {
                            continue;
                        }
                        let c = Candidate(dist2(self.point(i), q), self.ids[i]);
                        if heap.len() < k {
                            heap.push(c);
                        } else if c < *heap.peek().expect("heap is full") {
                            heap.pop();
                            heap.push(c);
                        }
                    }
                }
                Some((l, rr)) => {
                    let diff = q[node.split_dim] - node.split;
                    let (near, far) = if diff <= 0.0 { (l, rr) } else { (rr, l) };
                    let bound = if heap.len() < k {
                        f64::INFINITY
                    } else {
                        heap.peek().expect("heap is full").0
                    };
                    if diff * diff <= bound {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        let start = out.len();
        out.extend(heap.into_iter().map(|c| c.1));
        out[start..].sort_unstable();
        visited
    }
}
