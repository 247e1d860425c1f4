use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use super::RoadNetwork;
use crate::{ArcId, NodeId};

/// Minimal travel times between every ordered node pair, with one shortest
/// path per pair recoverable through predecessor arcs.
#[derive(Debug, Clone)]
pub struct ShortestPathTable {
    n: usize,
    dist: Vec<f64>,
    pred: Vec<Option<ArcId>>,
    arc_tails: Vec<NodeId>,
}

impl ShortestPathTable {
    pub fn node_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dist(&self, o: NodeId, d: NodeId) -> f64 {
        self.dist[o * self.n + d]
    }

    /// Last arc of the stored `o -> d` shortest path.
    pub fn pred_arc(&self, o: NodeId, d: NodeId) -> Option<ArcId> {
        self.pred[o * self.n + d]
    }

    /// Arcs of the stored `o -> d` shortest path, in travel order. Empty iff
    /// `o == d`.
    pub fn reconstruct_path(&self, o: NodeId, d: NodeId) -> Vec<ArcId> {
        let mut arcs = Vec::new();
        let mut v = d;
        while v != o {
            let a = self.pred[o * self.n + v].expect("network is strongly connected");
            arcs.push(a);
            v = self.arc_tails[a];
        }
        arcs.reverse();
        arcs
    }
}

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    node: NodeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn dijkstra(net: &RoadNetwork, source: NodeId) -> (Vec<f64>, Vec<Option<ArcId>>) {
    let n = net.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<ArcId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Entry {
        dist: 0.0,
        node: source,
    });
    while let Some(Entry { dist: du, node: u }) = heap.pop() {
        if done[u] {
            continue;
        }
        done[u] = true;
        for &a in net.out_arcs(u) {
            let arc = net.arc(a);
            let v = arc.head;
            let nd = du + arc.travel_time;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(a);
                heap.push(Entry { dist: nd, node: v });
            } else if nd == dist[v] && v != source {
                // Equal-cost tie: prefer the lower-index predecessor node.
                let current = pred[v].map(|p| net.arc(p).tail);
                if current.is_some_and(|t| u < t) {
                    pred[v] = Some(a);
                }
            }
        }
    }
    (dist, pred)
}

/// One Dijkstra per source, run in parallel and merged by source index.
pub fn all_pairs_shortest_paths(net: &RoadNetwork) -> ShortestPathTable {
    let n = net.node_count();
    let rows: Vec<(Vec<f64>, Vec<Option<ArcId>>)> =
        (0..n).into_par_iter().map(|s| dijkstra(net, s)).collect();
    let mut dist = Vec::with_capacity(n * n);
    let mut pred = Vec::with_capacity(n * n);
    for (d, p) in rows {
        dist.extend(d);
        pred.extend(p);
    }
    ShortestPathTable {
        n,
        dist,
        pred,
        arc_tails: net.arcs().iter().map(|a| a.tail).collect(),
    }
}
