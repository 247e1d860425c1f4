//! Network coarsening by k-means clustering of node coordinates.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{total_demand, Request};
use crate::network::{Arc, RoadNetwork};
use crate::pipeline::{run_pipeline, PipelineParams};
use crate::{Error, NodeId, Result};

const KMEANS_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PrunedNetwork {
    /// One node per nonempty cluster.
    pub network: RoadNetwork,
    /// Cluster of every original node. Clusters are numbered by their
    /// smallest member node.
    pub node_map: Vec<NodeId>,
    /// Remapped requests, merged per OD pair.
    pub requests: Vec<Request>,
    /// Requests per hour whose origin and destination fell in one cluster.
    pub dropped_demand: f64,
    pub centroids: Vec<[f64; 2]>,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: [f64; 2], centers: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, &center) in centers.iter().enumerate().skip(1) {
        if dist2(p, center) < dist2(p, centers[best]) {
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm from a k-means++ seeding. Returns one label per point;
/// some labels in `0..k` may end up unused.
pub fn kmeans(points: &[[f64; 2]], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, centers[0])).collect();
    while centers.len() < k {
        let Ok(pick) = WeightedIndex::new(&d2) else {
            // Every point coincides with a center.
            break;
        };
        let c = points[pick.sample(&mut rng)];
        centers.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c));
        }
    }

    let mut labels: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = vec![[0.0, 0.0, 0.0]; centers.len()];
        for (&l, p) in labels.iter().zip(points) {
            sums[l][0] += p[0];
            sums[l][1] += p[1];
            sums[l][2] += 1.0;
        }
        for (c, s) in centers.iter_mut().zip(&sums) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
        let next: Vec<usize> = points.iter().map(|&p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

/// Clusters the nodes into at most `k` groups and builds the quotient
/// network: an arc joins two clusters when some original arc does, and its
/// time is the centroid distance at the mean original arc speed.
pub fn prune_network(
    net: &RoadNetwork,
    requests: &[Request],
    k: usize,
    seed: u64,
) -> Result<PrunedNetwork> {
    let coords = net.coords().ok_or_else(|| {
        Error::InvalidParameter("pruning needs node coordinates".into())
    })?;
    let n = net.node_count();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!(
            "cluster count must be in 2..={n}, got {k}"
        )));
    }
    let labels = kmeans(coords, k, seed);

    // Renumber clusters by first appearance, i.e. by smallest member.
    let mut relabel = BTreeMap::new();
    let node_map: Vec<NodeId> = labels
        .iter()
        .map(|l| {
            let next = relabel.len();
            *relabel.entry(*l).or_insert(next)
        })
        .collect();
    let n_clusters = relabel.len();
    let mut sums = vec![[0.0, 0.0, 0.0]; n_clusters];
    for (&c, p) in node_map.iter().zip(coords) {
        sums[c][0] += p[0];
        sums[c][1] += p[1];
        sums[c][2] += 1.0;
    }
    let centroids: Vec<[f64; 2]> = sums.iter().map(|s| [s[0] / s[2], s[1] / s[2]]).collect();

    let speed = net
        .arcs()
        .iter()
        .map(|a| dist2(coords[a.tail], coords[a.head]).sqrt() / a.travel_time)
        .sum::<f64>()
        / net.arc_count() as f64;
    if !(speed > 0.0) {
        return Err(Error::InvalidNetwork(
            "mean arc speed is zero; coordinates carry no distances".into(),
        ));
    }
    let pairs: BTreeSet<(NodeId, NodeId)> = net
        .arcs()
        .iter()
        .map(|a| (node_map[a.tail], node_map[a.head]))
        .filter(|(a, b)| a != b)
        .collect();
    let mut arcs = Vec::with_capacity(pairs.len());
    for (tail, head) in pairs {
        let travel_time = dist2(centroids[tail], centroids[head]).sqrt() / speed;
        if !(travel_time > 0.0) {
            return Err(Error::InvalidNetwork(format!(
                "clusters {} and {} have coinciding centroids",
                tail + 1,
                head + 1
            )));
        }
        arcs.push(Arc { tail, head, travel_time });
    }
    let network = RoadNetwork::new(n_clusters, arcs, Some(centroids.clone())).map_err(|e| {
        Error::InvalidNetwork(format!("pruned network with k = {k} is invalid ({e}); try a larger k"))
    })?;

    let mut merged: BTreeMap<(NodeId, NodeId), f64> = BTreeMap::new();
    let mut dropped = 0.0;
    for r in requests {
        let (o, d) = (node_map[r.origin], node_map[r.destination]);
        if o == d {
            dropped += r.rate;
        } else {
            *merged.entry((o, d)).or_insert(0.0) += r.rate;
        }
    }
    if dropped > 0.0 {
        log::info!("k = {k}: dropped {dropped} requests/hour of intra-cluster demand");
    }
    let requests = merged
        .into_iter()
        .map(|((o, d), rate)| Request::new_unchecked(o, d, rate))
        .collect();
    Ok(PrunedNetwork {
        network,
        node_map,
        requests,
        dropped_demand: dropped,
        centroids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GranularityRow {
    pub k: usize,
    /// Nodes of the network actually solved.
    pub nodes: usize,
    pub objective_improvement: f64,
    pub precompute_seconds: f64,
    pub dropped_demand: f64,
    pub pooled_percentage: f64,
}

/// Runs the pipeline on the network pruned to each `k`. Entries with
/// `k >= |V|` use the original network unchanged.
pub fn granularity_sweep(
    net: &RoadNetwork,
    requests: &[Request],
    k_values: &[usize],
    params: &PipelineParams,
    seed: u64,
) -> Result<Vec<GranularityRow>> {
    let mut rows = Vec::with_capacity(k_values.len());
    for &k in k_values {
        if k < 2 {
            return Err(Error::InvalidParameter(format!(
                "cluster count must be at least 2, got {k}"
            )));
        }
        let (out, nodes, dropped) = if k >= net.node_count() {
            (run_pipeline(net, requests, params)?, net.node_count(), 0.0)
        } else {
            let pruned = prune_network(net, requests, k, seed)?;
            let out = run_pipeline(&pruned.network, &pruned.requests, params)?;
            (out, pruned.network.node_count(), pruned.dropped_demand)
        };
        debug_assert!((total_demand(requests) - dropped - out.metrics.total_demand).abs() < 1e-6);
        rows.push(GranularityRow {
            k,
            nodes,
            objective_improvement: out.metrics.objective_improvement,
            precompute_seconds: out.timings.precompute_seconds,
            dropped_demand: dropped,
            pooled_percentage: out.metrics.pooled_percentage,
        });
    }
    Ok(rows)
}

/// CSV with columns `k,nodes,improvement,precompute_seconds,dropped_demand,pooled_percentage`.
pub fn write_granularity_csv<W: Write>(rows: &[GranularityRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidParameter(format!("writing granularity table: {e}"));
    w.write_record([
        "k",
        "nodes",
        "improvement",
        "precompute_seconds",
        "dropped_demand",
        "pooled_percentage",
    ])
    .map_err(err)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.nodes.to_string(),
            format!("{:?}", r.objective_improvement),
            format!("{:.6}", r.precompute_seconds),
            format!("{:?}", r.dropped_demand),
            format!("{:?}", r.pooled_percentage),
        ])
        .map_err(err)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidParameter(format!("writing granularity table: {e}")))?;
    Ok(())
}
