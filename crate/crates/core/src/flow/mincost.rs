//! Uncapacitated min-cost flow by successive shortest paths.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::network::RoadNetwork;
use crate::{Error, NodeId, Result};

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

/// Residual edge step: forward along an arc, or back against its flow.
#[derive(Copy, Clone)]
enum Step {
    Forward(usize),
    Backward(usize),
}

/// Minimum-cost arc flow with divergence (outflow minus inflow) `supply[v]`
/// at every node, on uncapacitated arcs with costs equal to travel times.
///
/// Each augmentation runs Dijkstra with node potentials from all nodes with
/// remaining supply at once, and pushes along the path to the nearest node
/// with remaining deficit. Amounts below `tol` count as zero.
pub fn min_cost_flow(net: &RoadNetwork, supply: &[f64], tol: f64) -> Result<Vec<f64>> {
    let n = net.node_count();
    assert_eq!(supply.len(), n);
    let scale: f64 = supply.iter().map(|s| s.abs()).sum::<f64>().max(1.0);
    let total: f64 = supply.iter().sum();
    if total.abs() > 1e-9 * scale {
        return Err(Error::Infeasible(format!(
            "node supplies sum to {total}, not zero"
        )));
    }
    let arcs = net.arcs();
    let mut in_arcs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, arc) in arcs.iter().enumerate() {
        in_arcs[arc.head].push(a);
    }
    let mut flow = vec![0.0; arcs.len()];
    let mut excess: Vec<f64> = supply.to_vec();
    let mut potential = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut via: Vec<Option<Step>> = vec![None; n];
    let max_rounds = 4 * (n + arcs.len()) * (n + 1) + 16;

    for _ in 0..max_rounds {
        if excess.iter().all(|&e| e <= tol) {
            return Ok(flow);
        }
        dist.fill(f64::INFINITY);
        via.fill(None);
        let mut heap = BinaryHeap::new();
        for v in 0..n {
            if excess[v] > tol {
                dist[v] = 0.0;
                heap.push(Entry { dist: 0.0, node: v });
            }
        }
        let mut target = None;
        while let Some(Entry { dist: d, node: v }) = heap.pop() {
            if d > dist[v] {
                continue;
            }
            if excess[v] < -tol {
                target = Some(v);
                break;
            }
            let mut relax = |w: NodeId, cost: f64, step: Step, heap: &mut BinaryHeap<Entry>| {
                // Reduced costs are nonnegative up to round-off.
                let nd = d + (cost + potential[v] - potential[w]).max(0.0);
                if nd < dist[w] {
                    dist[w] = nd;
                    via[w] = Some(step);
                    heap.push(Entry { dist: nd, node: w });
                }
            };
            for &a in net.out_arcs(v) {
                relax(arcs[a].head, arcs[a].travel_time, Step::Forward(a), &mut heap);
            }
            for &a in &in_arcs[v] {
                if flow[a] > tol {
                    relax(arcs[a].tail, -arcs[a].travel_time, Step::Backward(a), &mut heap);
                }
            }
        }
        let Some(t) = target else {
            return Err(Error::Infeasible("no augmenting path for rebalancing".into()));
        };
        let dt = dist[t];
        for v in 0..n {
            potential[v] += dist[v].min(dt);
        }

        // Sources are never relaxed, so the walk back stops at one.
        let mut path = Vec::new();
        let mut v = t;
        let mut amount = -excess[t];
        while let Some(step) = via[v] {
            path.push(step);
            v = match step {
                Step::Forward(a) => arcs[a].tail,
                Step::Backward(a) => {
                    amount = amount.min(flow[a]);
                    arcs[a].head
                }
            };
        }
        let s = v;
        amount = amount.min(excess[s]);
        for step in path {
            match step {
                Step::Forward(a) => flow[a] += amount,
                Step::Backward(a) => {
                    flow[a] -= amount;
                    if flow[a] <= tol {
                        flow[a] = 0.0;
                    }
                }
            }
        }
        excess[s] -= amount;
        excess[t] += amount;
    }
    Err(Error::ResourceLimit(
        "rebalancing did not converge within the augmentation cap".into(),
    ))
}
