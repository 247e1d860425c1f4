//! Random instance generators and independent oracles shared by the
//! integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::seq::SliceRandom;
use rand::Rng;

use ridepool::demand::{DemandMatrix, Request};
use ridepool::network::{Arc, RoadNetwork, ShortestPathTable};
use ridepool::spatial::{Bag, PoolOption};
use ridepool::temporal::{pool_probability, TemporalParams};

/// Strongly connected network: a Hamiltonian ring in random order plus up
/// to `2n` random arcs, with integer travel times in `1..=9` so that path
/// sums are exact.
pub fn random_network<R: Rng>(rng: &mut R, n: usize) -> RoadNetwork {
    let extra = rng.random_range(0..2 * n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut pairs = BTreeSet::new();
    for i in 0..n {
        pairs.insert((order[i], order[(i + 1) % n]));
    }
    let mut tries = 0;
    while pairs.len() < n + extra && tries < 100 * (n + extra) {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            pairs.insert((a, b));
        }
    }
    let mut arcs: Vec<Arc> = pairs
        .into_iter()
        .map(|(tail, head)| Arc {
            tail,
            head,
            travel_time: rng.random_range(1..=9) as f64,
        })
        .collect();
    arcs.shuffle(rng);
    let coords = (0..n)
        .map(|_| [rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)])
        .collect();
    RoadNetwork::new(n, arcs, Some(coords)).expect("ring makes it strongly connected")
}

/// `m` requests with distinct OD pairs and rates in `rate_range` per hour.
pub fn random_requests<R: Rng>(
    rng: &mut R,
    n_nodes: usize,
    m: usize,
    rate_range: (f64, f64),
) -> Vec<Request> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < m && tries < 1000 * m.max(1) {
        tries += 1;
        let (o, d) = (rng.random_range(0..n_nodes), rng.random_range(0..n_nodes));
        if o != d && seen.insert((o, d)) {
            let rate = rng.random_range(rate_range.0..=rate_range.1);
            out.push(Request::new(o, d, rate).unwrap());
        }
    }
    out
}

/// Shortest times by enumerating every simple path from each source.
pub fn brute_force_distances(net: &RoadNetwork) -> Vec<Vec<f64>> {
    let n = net.node_count();
    let mut best = vec![vec![f64::INFINITY; n]; n];
    fn dfs(
        net: &RoadNetwork,
        v: usize,
        cost: f64,
        visited: &mut Vec<bool>,
        best: &mut Vec<f64>,
    ) {
        if cost < best[v] {
            best[v] = cost;
        }
        for &a in net.out_arcs(v) {
            let w = net.arc(a).head;
            if !visited[w] {
                visited[w] = true;
                dfs(net, w, cost + net.arc(a).travel_time, visited, best);
                visited[w] = false;
            }
        }
    }
    for s in 0..n {
        let mut visited = vec![false; n];
        visited[s] = true;
        dfs(net, s, 0.0, &mut visited, &mut best[s]);
    }
    best
}

/// One oracle-optimal way to serve a bag: cost and delays per bag element.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOption {
    pub cost: f64,
    pub delays: Vec<f64>,
}

/// Every permutation of the pickup and dropoff stops of every bag element,
/// kept when each pickup precedes its own dropoff and the vehicle is never
/// empty strictly inside the route. Returns all feasible optima (they may
/// differ in delays), or an empty list when nothing is feasible.
pub fn exhaustive_best_option(
    bag: &Bag,
    requests: &[Request],
    table: &ShortestPathTable,
    delta_bar: f64,
) -> Vec<OracleOption> {
    let elems = bag.elements().to_vec();
    let k = elems.len();
    // Stop 2i is the pickup of occurrence i, 2i+1 its dropoff.
    let mut stops: Vec<usize> = (0..2 * k).collect();
    let mut feasible: Vec<OracleOption> = Vec::new();
    permute(&mut stops, 0, &mut |perm| {
        let mut pos = vec![0usize; 2 * k];
        for (p, &s) in perm.iter().enumerate() {
            pos[s] = p;
        }
        if (0..k).any(|i| pos[2 * i] > pos[2 * i + 1]) {
            return;
        }
        let mut occ = 0i32;
        for (p, &s) in perm.iter().enumerate() {
            occ += if s % 2 == 0 { 1 } else { -1 };
            if p + 1 < perm.len() && occ < 1 {
                return;
            }
        }
        let node = |s: usize| {
            let r = &requests[elems[s / 2]];
            if s.is_multiple_of(2) { r.origin } else { r.destination }
        };
        let legs: Vec<f64> = perm.windows(2).map(|w| table.dist(node(w[0]), node(w[1]))).collect();
        let cost: f64 = legs.iter().sum();
        let delays: Vec<f64> = (0..k)
            .map(|i| {
                let r = &requests[elems[i]];
                let ride: f64 = legs[pos[2 * i]..pos[2 * i + 1]].iter().sum();
                ride - table.dist(r.origin, r.destination)
            })
            .collect();
        if delays.iter().all(|&d| d <= delta_bar + 1e-9) {
            feasible.push(OracleOption { cost, delays });
        }
    });
    let Some(min) = feasible.iter().map(|o| o.cost).reduce(f64::min) else {
        return Vec::new();
    };
    feasible.retain(|o| o.cost == min);
    feasible
}

fn permute(v: &mut Vec<usize>, i: usize, f: &mut impl FnMut(&[usize])) {
    if i == v.len() {
        f(v);
        return;
    }
    for j in i..v.len() {
        v.swap(i, j);
        permute(v, i + 1, f);
        v.swap(i, j);
    }
}

/// Whether `opt` agrees with the oracle: same feasibility, same optimal cost,
/// and delays equal to those of some oracle optimum after sorting the delays
/// of each repeated request.
pub fn agrees_with_oracle(opt: &PoolOption, oracle: &[OracleOption]) -> bool {
    if oracle.is_empty() {
        return !opt.feasible;
    }
    if !opt.feasible || opt.pooled_cost != oracle[0].cost {
        return false;
    }
    let canon = |d: &[f64]| -> Vec<u64> {
        // Bag elements are sorted, so equal requests are adjacent.
        let elems = opt.bag.elements();
        let mut out: Vec<(usize, u64)> = elems.iter().zip(d).map(|(&e, &x)| (e, x.to_bits())).collect();
        out.sort();
        out.into_iter().map(|p| p.1).collect()
    };
    let ours = canon(&opt.delays);
    oracle.iter().any(|o| canon(&o.delays) == ours)
}

/// Relaxed objective of applying `order` (indices into `options`) with the
/// effective-flow rule, reimplemented independently of the library's
/// assignment code.
pub fn objective_of_order(
    order: &[usize],
    options: &[&PoolOption],
    requests: &[Request],
    table: &ShortestPathTable,
    t_bar: f64,
) -> f64 {
    let mut residual: Vec<f64> = requests.iter().map(|r| r.rate).collect();
    let mut pooled = 0.0;
    for &i in order {
        let opt = options[i];
        let elems = opt.bag.elements();
        if elems.iter().any(|&r| residual[r] <= 0.0) {
            continue;
        }
        let mut cap = f64::INFINITY;
        for &r in elems {
            let m = elems.iter().filter(|&&e| e == r).count() as f64;
            cap = cap.min(residual[r] / m);
        }
        let rates: Vec<f64> = elems.iter().map(|&r| residual[r] / 60.0).collect();
        let p = pool_probability(&TemporalParams::new(t_bar, rates).unwrap());
        let gamma = cap * p;
        for &r in elems {
            residual[r] = (residual[r] - gamma).max(0.0);
        }
        pooled += gamma * opt.pooled_cost;
    }
    pooled
        + requests
            .iter()
            .zip(&residual)
            .map(|(r, a)| a * table.dist(r.origin, r.destination))
            .sum::<f64>()
}

/// Minimum of [`objective_of_order`] over all orders of `options`.
pub fn exhaustive_order_minimum(
    options: &[&PoolOption],
    requests: &[Request],
    table: &ShortestPathTable,
    t_bar: f64,
) -> f64 {
    let mut idx: Vec<usize> = (0..options.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut idx, 0, &mut |order| {
        best = best.min(objective_of_order(order, options, requests, table, t_bar));
    });
    best
}

/// Multi-commodity flow with rebalancing as a generic LP: one variable per
/// (commodity, arc) and per rebalancing arc, per-commodity balance
/// `B x^j = -D[:, j]`, and a circulating total.
pub fn lp_oracle_objective(net: &RoadNetwork, d: &DemandMatrix, rho: f64) -> f64 {
    let n = net.node_count();
    let arcs = net.arcs();
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let origins: Vec<usize> = (0..n)
        .filter(|&j| (0..n).any(|i| i != j && d.get(i, j) > 0.0))
        .collect();
    let x: Vec<Vec<microlp::Variable>> = origins
        .iter()
        .map(|_| arcs.iter().map(|a| lp.add_var(a.travel_time, (0.0, f64::INFINITY))).collect())
        .collect();
    let xr: Vec<microlp::Variable> = arcs
        .iter()
        .map(|a| lp.add_var(rho * a.travel_time, (0.0, f64::INFINITY)))
        .collect();
    for (c, &j) in origins.iter().enumerate() {
        for v in 0..n {
            let mut row = Vec::new();
            for (a, arc) in arcs.iter().enumerate() {
                if arc.tail == v {
                    row.push((x[c][a], 1.0));
                } else if arc.head == v {
                    row.push((x[c][a], -1.0));
                }
            }
            lp.add_constraint(&row[..], ComparisonOp::Eq, -d.get(v, j));
        }
    }
    for v in 0..n {
        let mut row = Vec::new();
        for (a, arc) in arcs.iter().enumerate() {
            let sign = if arc.tail == v {
                1.0
            } else if arc.head == v {
                -1.0
            } else {
                continue;
            };
            row.push((xr[a], sign));
            for xc in &x {
                row.push((xc[a], sign));
            }
        }
        lp.add_constraint(&row[..], ComparisonOp::Eq, 0.0);
    }
    lp.solve().expect("LP is feasible").into_solution().expect("LP has an optimum").objective()
}
