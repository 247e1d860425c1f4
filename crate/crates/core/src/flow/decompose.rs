use serde::{Deserialize, Serialize};

use super::FlowSolution;
use crate::network::RoadNetwork;
use crate::{ArcId, NodeId};

/// Arc flows below this are treated as zero.
const FLOW_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ItineraryKind {
    Active,
    Rebalancing,
}

/// A path or cycle of vehicles carrying a constant flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleItinerary {
    pub arcs: Vec<ArcId>,
    /// Vehicles per hour.
    pub flow: f64,
    pub kind: ItineraryKind,
    pub is_cycle: bool,
}

/// Splits the active flow `X 1` and the rebalancing flow `x_r` separately into
/// paths and cycles whose arc-wise sum reproduces `X 1 + x_r`.
pub fn decompose_flows(sol: &FlowSolution, net: &RoadNetwork) -> Vec<VehicleItinerary> {
    let mut out = decompose_arc_flow(net, &sol.active_flow(), ItineraryKind::Active);
    out.extend(decompose_arc_flow(net, &sol.rebalancing, ItineraryKind::Rebalancing));
    out
}

/// Standard path-then-cycle decomposition of one arc flow. Walks always
/// leave a node by its lowest-index arc with remaining flow, and every
/// extraction zeroes its bottleneck arc or a node excess.
pub fn decompose_arc_flow(
    net: &RoadNetwork,
    arc_flow: &[f64],
    kind: ItineraryKind,
) -> Vec<VehicleItinerary> {
    let n = net.node_count();
    let arcs = net.arcs();
    let mut rem: Vec<f64> = arc_flow
        .iter()
        .map(|&f| if f > FLOW_EPS { f } else { 0.0 })
        .collect();
    let mut excess = net.divergence(&rem);
    let scale = rem.iter().fold(0.0f64, |m, &f| m.max(f)).max(1.0);
    let tol = FLOW_EPS * scale;
    let mut out = Vec::new();

    let next_arc = |rem: &[f64], v: NodeId| net.out_arcs(v).iter().copied().find(|&a| rem[a] > 0.0);

    // Paths from surplus to deficit nodes.
    for start in 0..n {
        while excess[start] > tol {
            let mut walk: Vec<ArcId> = Vec::new();
            let mut pos_of = vec![usize::MAX; n];
            pos_of[start] = 0;
            let mut v = start;
            let mut cycle_at = None;
            while excess[v] >= -tol || v == start {
                let Some(a) = next_arc(&rem, v) else { break };
                walk.push(a);
                v = arcs[a].head;
                if pos_of[v] != usize::MAX {
                    cycle_at = Some(pos_of[v]);
                    break;
                }
                pos_of[v] = walk.len();
            }
            if let Some(p) = cycle_at {
                push_cycle(&mut out, &mut rem, walk[p..].to_vec(), kind);
                continue;
            }
            if walk.is_empty() || excess[v] >= -tol {
                // Round-off left surplus with nowhere to go.
                excess[start] = 0.0;
                break;
            }
            let mut amount = excess[start].min(-excess[v]);
            for &a in &walk {
                amount = amount.min(rem[a]);
            }
            subtract(&mut rem, &walk, amount);
            excess[start] -= amount;
            excess[v] += amount;
            out.push(VehicleItinerary {
                arcs: walk,
                flow: amount,
                kind,
                is_cycle: false,
            });
        }
    }

    // What is left is a circulation.
    for start in 0..n {
        while let Some(first) = next_arc(&rem, start) {
            let mut walk = vec![first];
            let mut pos_of = vec![usize::MAX; n];
            pos_of[start] = 0;
            let mut v = arcs[first].head;
            let mut stuck = false;
            while pos_of[v] == usize::MAX {
                pos_of[v] = walk.len();
                match next_arc(&rem, v) {
                    Some(a) => {
                        walk.push(a);
                        v = arcs[a].head;
                    }
                    None => {
                        stuck = true;
                        break;
                    }
                }
            }
            if stuck {
                // Round-off residue: drop the dead-end arc.
                let last = *walk.last().expect("walk is nonempty");
                rem[last] = 0.0;
                continue;
            }
            let p = pos_of[v];
            push_cycle(&mut out, &mut rem, walk[p..].to_vec(), kind);
        }
    }
    out
}

fn subtract(rem: &mut [f64], walk: &[ArcId], amount: f64) {
    for &a in walk {
        rem[a] -= amount;
        if rem[a] <= FLOW_EPS * amount.max(1.0) {
            rem[a] = 0.0;
        }
    }
}

fn push_cycle(out: &mut Vec<VehicleItinerary>, rem: &mut [f64], cycle: Vec<ArcId>, kind: ItineraryKind) {
    let amount = cycle.iter().map(|&a| rem[a]).fold(f64::INFINITY, f64::min);
    subtract(rem, &cycle, amount);
    out.push(VehicleItinerary {
        arcs: cycle,
        flow: amount,
        kind,
        is_cycle: true,
    });
}

/// Arc-wise sum of itinerary flows.
pub fn recompose(itineraries: &[VehicleItinerary], n_arcs: usize) -> Vec<f64> {
    let mut total = vec![0.0; n_arcs];
    for it in itineraries {
        for &a in &it.arcs {
            total[a] += it.flow;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_edge_list;

    fn net() -> RoadNetwork {
        parse_edge_list("1 2 1\n2 3 1\n3 1 1\n1 3 2\n3 2 1\n2 1 1\n").unwrap()
    }

    #[test]
    fn zero_flow_has_no_itineraries() {
        let net = net();
        assert!(decompose_arc_flow(&net, &[0.0; 6], ItineraryKind::Active).is_empty());
    }

    #[test]
    fn single_path() {
        let net = net();
        let flow = [2.5, 2.5, 0.0, 0.0, 0.0, 0.0];
        let its = decompose_arc_flow(&net, &flow, ItineraryKind::Active);
        assert_eq!(its.len(), 1);
        assert_eq!(its[0].arcs, vec![0, 1]);
        assert_eq!(its[0].flow, 2.5);
        assert!(!its[0].is_cycle);
    }

    #[test]
    fn path_plus_cycle_recomposes() {
        let net = net();
        // Cycle 1->2->3->1 with 1.0, plus path 1->3 with 0.5.
        let flow = [1.0, 1.0, 1.0, 0.5, 0.0, 0.0];
        let its = decompose_arc_flow(&net, &flow, ItineraryKind::Rebalancing);
        let back = recompose(&its, 6);
        for (a, b) in back.iter().zip(&flow) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(its.iter().any(|i| i.is_cycle));
        for it in &its {
            assert!(it.flow > 0.0);
            for w in it.arcs.windows(2) {
                assert_eq!(net.arc(w[0]).head, net.arc(w[1]).tail);
            }
        }
    }
}
