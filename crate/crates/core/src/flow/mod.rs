//! User commodity routing, rebalancing, flow decomposition and planning
//! metrics.
//!
//! Balance convention: with incidence `+1` at tails and `-1` at heads, the
//! commodity flow `x^j` out of origin `j` satisfies `B x^j = -D[:, j]`, and
//! the rebalancing flow `x_r` satisfies `B x_r = D 1`, so that the total
//! vehicle flow `X 1 + x_r` is a circulation.

mod decompose;
mod metrics;
mod mincost;

pub use decompose::{decompose_arc_flow, decompose_flows, recompose, ItineraryKind, VehicleItinerary};
pub use metrics::{compute_metrics, MetricsReport};
pub use mincost::min_cost_flow;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::DemandMatrix;
use crate::network::{RoadNetwork, ShortestPathTable};
use crate::{Error, NodeId, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommodityFlow {
    pub origin: NodeId,
    /// Flow on every arc, in arc order.
    pub arc_flows: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSolution {
    /// One entry per origin with positive outgoing demand, ascending.
    pub commodities: Vec<CommodityFlow>,
    pub rebalancing: Vec<f64>,
    /// `t^T X 1`.
    pub user_time: f64,
    /// `t^T x_r`.
    pub rebal_time: f64,
    /// Weight the solution was solved for.
    pub rho: f64,
}

impl FlowSolution {
    pub fn objective(&self, rho: f64) -> f64 {
        self.user_time + rho * self.rebal_time
    }

    /// `X 1`, the arc flow of occupied vehicles.
    pub fn active_flow(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.rebalancing.len()];
        for c in &self.commodities {
            for (t, f) in total.iter_mut().zip(&c.arc_flows) {
                *t += f;
            }
        }
        total
    }

    /// `X 1 + x_r`.
    pub fn total_flow(&self) -> Vec<f64> {
        let mut total = self.active_flow();
        for (t, f) in total.iter_mut().zip(&self.rebalancing) {
            *t += f;
        }
        total
    }

    /// Largest violation of per-commodity balance, circulation of the total
    /// flow, or nonnegativity.
    pub fn balance_residual(&self, net: &RoadNetwork, d: &DemandMatrix) -> f64 {
        let n = net.node_count();
        let mut worst = 0.0f64;
        let mut covered = vec![false; n];
        for c in &self.commodities {
            covered[c.origin] = true;
            let div = net.divergence(&c.arc_flows);
            for (i, v) in div.iter().enumerate() {
                worst = worst.max((v + d.get(i, c.origin)).abs());
            }
            worst = worst.max(c.arc_flows.iter().fold(0.0, |m, &f| m.max(-f)));
        }
        for j in (0..n).filter(|&j| !covered[j]) {
            for i in 0..n {
                worst = worst.max(d.get(i, j).abs());
            }
        }
        for v in net.divergence(&self.total_flow()) {
            worst = worst.max(v.abs());
        }
        worst.max(self.rebalancing.iter().fold(0.0, |m, &f| m.max(-f)))
    }

    /// CSV table with columns `arc,tail,head,active_flow,rebalancing_flow`;
    /// node ids are one-based.
    pub fn write_arc_flows_csv<W: Write>(&self, net: &RoadNetwork, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::InvalidParameter(format!("writing arc flows: {e}"));
        w.write_record(["arc", "tail", "head", "active_flow", "rebalancing_flow"])
            .map_err(to_err)?;
        for (a, (arc, (x, r))) in net
            .arcs()
            .iter()
            .zip(self.active_flow().iter().zip(&self.rebalancing))
            .enumerate()
        {
            w.write_record([
                a.to_string(),
                (arc.tail + 1).to_string(),
                (arc.head + 1).to_string(),
                format!("{x:?}"),
                format!("{r:?}"),
            ])
            .map_err(to_err)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("writing arc flows: {e}")))?;
        Ok(())
    }
}

fn dot(t: &[f64], x: &[f64]) -> f64 {
    t.iter().zip(x).map(|(a, b)| a * b).sum()
}

/// Optimal active and rebalancing flows for demand matrix `d`.
///
/// Every commodity has a fixed node balance and arcs are uncapacitated with
/// linear costs, so routing each OD entry on its shortest path is optimal for
/// the user term. The divergence of `X 1` is then `-D 1` whatever the routing,
/// which leaves rebalancing as one min-cost flow. The flows are optimal for
/// every `rho > 0`; `rho` only selects the reported objective.
pub fn solve_network_flow(
    net: &RoadNetwork,
    table: &ShortestPathTable,
    d: &DemandMatrix,
    rho: f64,
) -> Result<FlowSolution> {
    let n = net.node_count();
    if d.node_count() != n {
        return Err(Error::InvalidDemand(format!(
            "demand matrix has {} nodes, network has {n}",
            d.node_count()
        )));
    }
    if !(rho.is_finite() && rho >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rebalancing weight must be non-negative, got {rho}"
        )));
    }
    let scale = d.off_diagonal_mass().max(1.0);
    if d.total().abs() > 1e-9 * scale {
        return Err(Error::Infeasible(format!(
            "demand matrix entries sum to {}, not zero",
            d.total()
        )));
    }
    let m = net.arc_count();
    let origins: Vec<NodeId> = (0..n)
        .filter(|&j| (0..n).any(|i| i != j && d.get(i, j) > 0.0))
        .collect();
    let commodities: Vec<CommodityFlow> = origins
        .par_iter()
        .map(|&j| {
            let mut arc_flows = vec![0.0; m];
            for i in (0..n).filter(|&i| i != j) {
                let v = d.get(i, j);
                if v > 0.0 {
                    for a in table.reconstruct_path(j, i) {
                        arc_flows[a] += v;
                    }
                }
            }
            CommodityFlow { origin: j, arc_flows }
        })
        .collect();

    let supply = d.row_sums();
    let rebalancing = min_cost_flow(net, &supply, 1e-12 * scale)?;
    let times = net.travel_times();
    let user_time = commodities.iter().map(|c| dot(&times, &c.arc_flows)).sum();
    let rebal_time = dot(&times, &rebalancing);
    Ok(FlowSolution {
        commodities,
        rebalancing,
        user_time,
        rebal_time,
        rho,
    })
}
