//! Road networks, file ingestion, and all-pairs shortest paths.

mod edge_list;
mod paths;
mod tntp;

pub use edge_list::{parse_edge_list, parse_requests, write_requests};
pub use paths::{all_pairs_shortest_paths, ShortestPathTable};
pub use tntp::{parse_tntp, parse_tntp_scaled, read_metadata, TntpMetadata};

use std::collections::HashMap;
use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::{ArcId, Error, NodeId, Result};

/// A directed road link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    /// Minutes.
    pub travel_time: f64,
}

/// Directed road graph with strictly positive arc travel times.
///
/// The arc order is fixed at construction and defines the column order of the
/// incidence matrix and of every arc-flow vector. A constructed network is
/// always strongly connected.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadNetwork {
    n_nodes: usize,
    arcs: Vec<Arc>,
    coords: Option<Vec<[f64; 2]>>,
    out_arcs: Vec<Vec<ArcId>>,
}

impl RoadNetwork {
    /// Validates and builds a network.
    ///
    /// Parallel arcs are collapsed to the cheapest one (keeping the position of
    /// the first occurrence) and a warning is logged.
    pub fn new(n_nodes: usize, arcs: Vec<Arc>, coords: Option<Vec<[f64; 2]>>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidNetwork("network has no nodes".into()));
        }
        if let Some(c) = &coords {
            if c.len() != n_nodes {
                return Err(Error::InvalidNetwork(format!(
                    "{} coordinates for {} nodes",
                    c.len(),
                    n_nodes
                )));
            }
            if c.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidNetwork("non-finite node coordinate".into()));
            }
        }

        let mut kept: Vec<Arc> = Vec::with_capacity(arcs.len());
        let mut seen: HashMap<(NodeId, NodeId), usize> = HashMap::new();
        let mut collapsed = 0usize;
        for arc in arcs {
            if arc.tail >= n_nodes || arc.head >= n_nodes {
                return Err(Error::InvalidNetwork(format!(
                    "arc ({}, {}) references a node outside 1..{}",
                    arc.tail + 1,
                    arc.head + 1,
                    n_nodes
                )));
            }
            if arc.tail == arc.head {
                return Err(Error::InvalidNetwork(format!(
                    "self-loop arc at node {}",
                    arc.tail + 1
                )));
            }
            if !arc.travel_time.is_finite() || arc.travel_time <= 0.0 {
                return Err(Error::InvalidNetwork(format!(
                    "arc ({}, {}) has travel time {}, expected a finite positive value",
                    arc.tail + 1,
                    arc.head + 1,
                    arc.travel_time
                )));
            }
            match seen.get(&(arc.tail, arc.head)) {
                Some(&pos) => {
                    collapsed += 1;
                    if arc.travel_time < kept[pos].travel_time {
                        kept[pos].travel_time = arc.travel_time;
                    }
                }
                None => {
                    seen.insert((arc.tail, arc.head), kept.len());
                    kept.push(arc);
                }
            }
        }
        if collapsed > 0 {
            log::warn!("collapsed {collapsed} parallel arc(s) to their minimum travel time");
        }

        let mut out_arcs = vec![Vec::new(); n_nodes];
        for (id, arc) in kept.iter().enumerate() {
            out_arcs[arc.tail].push(id);
        }
        let net = RoadNetwork {
            n_nodes,
            arcs: kept,
            coords,
            out_arcs,
        };
        net.check_strongly_connected()?;
        Ok(net)
    }

    pub fn node_count(&self) -> usize {
        self.n_nodes
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn out_arcs(&self, node: NodeId) -> &[ArcId] {
        &self.out_arcs[node]
    }

    pub fn coords(&self) -> Option<&[[f64; 2]]> {
        self.coords.as_deref()
    }

    /// Travel time vector `t` in arc order.
    pub fn travel_times(&self) -> Vec<f64> {
        self.arcs.iter().map(|a| a.travel_time).collect()
    }

    /// Copy with every travel time multiplied by `factor`.
    pub fn scaled_times(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "time scale must be positive, got {factor}"
            )));
        }
        let arcs = self
            .arcs
            .iter()
            .map(|a| Arc {
                travel_time: a.travel_time * factor,
                ..*a
            })
            .collect();
        RoadNetwork::new(self.n_nodes, arcs, self.coords.clone())
    }

    /// Dense node-arc incidence matrix: `+1` at the tail, `-1` at the head.
    pub fn incidence_matrix(&self) -> Vec<Vec<i8>> {
        let mut b = vec![vec![0i8; self.arcs.len()]; self.n_nodes];
        for (a, arc) in self.arcs.iter().enumerate() {
            b[arc.tail][a] = 1;
            b[arc.head][a] = -1;
        }
        b
    }

    /// `B x` for an arc vector: outflow minus inflow at every node.
    pub fn divergence(&self, arc_values: &[f64]) -> Vec<f64> {
        let mut div = vec![0.0; self.n_nodes];
        for (arc, &x) in self.arcs.iter().zip(arc_values) {
            div[arc.tail] += x;
            div[arc.head] -= x;
        }
        div
    }

    fn check_strongly_connected(&self) -> Result<()> {
        let mut rev = vec![Vec::new(); self.n_nodes];
        for arc in &self.arcs {
            rev[arc.head].push(arc.tail);
        }
        let fwd: Vec<Vec<NodeId>> = self
            .out_arcs
            .iter()
            .map(|ids| ids.iter().map(|&a| self.arcs[a].head).collect())
            .collect();

        if let Some(v) = first_unreached(&fwd, 0) {
            return Err(Error::Disconnected { from: 1, to: v + 1 });
        }
        if let Some(v) = first_unreached(&rev, 0) {
            return Err(Error::Disconnected { from: v + 1, to: 1 });
        }
        Ok(())
    }
}

fn first_unreached(adj: &[Vec<NodeId>], root: NodeId) -> Option<NodeId> {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([root]);
    seen[root] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().position(|s| !s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arc(tail: usize, head: usize, t: f64) -> Arc {
        Arc {
            tail,
            head,
            travel_time: t,
        }
    }

    #[test]
    fn rejects_self_loops_and_bad_times() {
        let err = RoadNetwork::new(2, vec![arc(0, 0, 1.0)], None).unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(_)));
        let err = RoadNetwork::new(2, vec![arc(0, 1, 0.0), arc(1, 0, 1.0)], None).unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(_)));
        let err =
            RoadNetwork::new(2, vec![arc(0, 1, f64::NAN), arc(1, 0, 1.0)], None).unwrap_err();
        assert!(matches!(err, Error::InvalidNetwork(_)));
    }

    #[test]
    fn reports_unreachable_pair() {
        let err = RoadNetwork::new(2, vec![arc(0, 1, 5.0)], None).unwrap_err();
        match err {
            Error::Disconnected { from, to } => assert_eq!((from, to), (2, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn incidence_has_one_tail_and_one_head_per_column() {
        let net = RoadNetwork::new(
            3,
            vec![arc(0, 1, 1.0), arc(1, 2, 1.0), arc(2, 0, 1.0)],
            None,
        )
        .unwrap();
        let b = net.incidence_matrix();
        for a in 0..net.arc_count() {
            let col: Vec<i8> = b.iter().map(|row| row[a]).collect();
            assert_eq!(col.iter().filter(|&&v| v == 1).count(), 1);
            assert_eq!(col.iter().filter(|&&v| v == -1).count(), 1);
        }
    }

    #[test]
    fn parallel_arcs_keep_minimum() {
        let net = RoadNetwork::new(
            2,
            vec![arc(0, 1, 4.0), arc(1, 0, 1.0), arc(0, 1, 2.5)],
            None,
        )
        .unwrap();
        assert_eq!(net.arc_count(), 2);
        assert_eq!(net.arc(0).travel_time, 2.5);
    }
}
