//! Greedy allocation of request demand to pooling bags and assembly of the
//! ride-pooling demand matrix.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::demand::{build_demand_matrix, DemandMatrix, Request};
use crate::network::ShortestPathTable;
use crate::spatial::{Bag, PoolOption, PoolOptions};
use crate::temporal::{pool_probability, TemporalParams};
use crate::{Error, Result, MINUTES_PER_HOUR};

/// Residuals this far below zero are treated as round-off and clamped.
const NEGATIVE_RESIDUAL_TOLERANCE: f64 = 1e-9;

/// One greedy iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStep {
    pub bag: Bag,
    /// Improvement per user of the bag, minutes.
    pub score: f64,
    /// Vehicle flow assigned, per hour.
    pub gamma: f64,
    /// Relaxed objective after this step.
    pub objective_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentResult {
    /// Bags with strictly positive vehicle flow.
    #[serde(with = "gamma_as_pairs")]
    pub gamma: BTreeMap<Bag, f64>,
    /// Unassigned demand per request, per hour.
    pub residual: Vec<f64>,
    pub iterations: usize,
    pub selection: Vec<SelectionStep>,
}

mod gamma_as_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use crate::spatial::Bag;

    pub fn serialize<S: Serializer>(map: &BTreeMap<Bag, f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<Bag, f64>, D::Error> {
        Ok(Vec::<(Bag, f64)>::deserialize(d)?.into_iter().collect())
    }
}

impl AssignmentResult {
    /// Nothing pooled: every request keeps its full rate.
    pub fn unpooled(requests: &[Request]) -> Self {
        AssignmentResult {
            gamma: BTreeMap::new(),
            residual: requests.iter().map(|r| r.rate).collect(),
            iterations: 0,
            selection: Vec::new(),
        }
    }

    /// `sum_C |C| gamma_C`, users per hour.
    pub fn pooled_user_flow(&self) -> f64 {
        self.gamma.iter().map(|(b, g)| b.size() as f64 * g).sum()
    }

    /// `alpha'_m + sum_C m_C(m) gamma_C - alpha_m`, largest magnitude over
    /// requests.
    pub fn conservation_error(&self, requests: &[Request]) -> f64 {
        let mut assigned = self.residual.clone();
        for (bag, g) in &self.gamma {
            for &r in bag.elements() {
                assigned[r] += g;
            }
        }
        assigned
            .iter()
            .zip(requests)
            .map(|(a, r)| (a - r.rate).abs())
            .fold(0.0, f64::max)
    }
}

/// Vehicle flow a bag can absorb from the current residuals: the tightest
/// `alpha'_i / m_C(i)` times the probability that every bag element shows up
/// within `t_bar` minutes. Residuals are per hour.
pub fn effective_gamma(bag: &Bag, residual: &[f64], t_bar: f64) -> f64 {
    let support = bag.support();
    if support.iter().any(|&(r, _)| !(residual[r] > 0.0)) {
        return 0.0;
    }
    let cap = support
        .iter()
        .map(|&(r, m)| residual[r] / m as f64)
        .fold(f64::INFINITY, f64::min);
    let rates: Vec<f64> = bag
        .elements()
        .iter()
        .map(|&r| residual[r] / MINUTES_PER_HOUR)
        .collect();
    let params = TemporalParams::new(t_bar, rates).expect("positive rates and window");
    cap * pool_probability(&params)
}

/// Greedy order: best improvement per user first, then larger bags, then
/// canonical bag order. Infeasible and non-improving options are left out.
pub fn selection_order<'a>(options: impl IntoIterator<Item = &'a PoolOption>) -> Vec<&'a PoolOption> {
    let mut order: Vec<&PoolOption> = options
        .into_iter()
        .filter(|o| o.feasible && o.improvement > 0.0)
        .collect();
    order.sort_by(|a, b| compare_options(a, b));
    order
}

pub fn compare_options(a: &PoolOption, b: &PoolOption) -> Ordering {
    b.score()
        .total_cmp(&a.score())
        .then_with(|| b.bag.size().cmp(&a.bag.size()))
        .then_with(|| a.bag.cmp(&b.bag))
}

/// Applies bags in the given order, assigning each its effective flow on the
/// residuals left by its predecessors. `t_bar` is in minutes.
pub fn assign_in_order(
    order: &[&PoolOption],
    requests: &[Request],
    table: &ShortestPathTable,
    t_bar: f64,
) -> Result<AssignmentResult> {
    if !(t_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "waiting window must be non-negative, got {t_bar}"
        )));
    }
    let mut result = AssignmentResult::unpooled(requests);
    let mut objective: f64 = requests
        .iter()
        .map(|r| r.rate * table.dist(r.origin, r.destination))
        .sum();
    for opt in order {
        let gamma = effective_gamma(&opt.bag, &result.residual, t_bar);
        if gamma > 0.0 {
            for &(r, m) in &opt.bag.support() {
                result.residual[r] = (result.residual[r] - m as f64 * gamma).max(0.0);
            }
            *result.gamma.entry(opt.bag.clone()).or_insert(0.0) += gamma;
            objective -= gamma * opt.improvement;
        }
        result.iterations += 1;
        result.selection.push(SelectionStep {
            bag: opt.bag.clone(),
            score: opt.score(),
            gamma,
            objective_after: objective,
        });
    }
    Ok(result)
}

/// The greedy pooling assignment over precomputed options.
pub fn greedy_assign(
    options: &PoolOptions,
    requests: &[Request],
    table: &ShortestPathTable,
    t_bar: f64,
) -> Result<AssignmentResult> {
    assign_in_order(&selection_order(options.iter()), requests, table, t_bar)
}

/// `M (M^K - 1) / (M - 1)`, or `K` when `M = 1`.
pub fn iteration_bound(m: usize, k_max: usize) -> u128 {
    match m {
        0 => 0,
        1 => k_max as u128,
        _ => {
            let m = m as u128;
            m * (m.saturating_pow(k_max as u32) - 1) / (m - 1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidePoolingDemand {
    pub d_rp: DemandMatrix,
    /// Users per hour served in pooled rides.
    pub pooled_user_flow: f64,
    /// Users per hour riding alone.
    pub unpooled_user_flow: f64,
}

/// Pooled legs of every assigned bag scaled by its flow, plus the residual
/// requests as direct trips.
pub fn assemble_d_rp(
    result: &AssignmentResult,
    options: &PoolOptions,
    requests: &[Request],
    n_nodes: usize,
) -> Result<RidePoolingDemand> {
    let mut residual_requests = Vec::with_capacity(requests.len());
    for (r, &a) in requests.iter().zip(&result.residual) {
        if a < -NEGATIVE_RESIDUAL_TOLERANCE {
            return Err(Error::InvalidDemand(format!(
                "negative residual demand {a} for request ({}, {})",
                r.origin + 1,
                r.destination + 1
            )));
        }
        if a > 0.0 {
            residual_requests.push(Request { rate: a, ..*r });
        }
    }
    let mut d = build_demand_matrix(&residual_requests, n_nodes)?;
    for (bag, &g) in &result.gamma {
        let opt = options.get(bag).ok_or_else(|| {
            Error::InvalidParameter(format!("assigned bag {bag} has no pool option"))
        })?;
        let seq = opt.best_sequence.as_ref().ok_or_else(|| {
            Error::InvalidParameter(format!("assigned bag {bag} is infeasible"))
        })?;
        for (from, to) in seq.legs() {
            d.add_flow(from, to, g);
        }
    }
    Ok(RidePoolingDemand {
        d_rp: d,
        pooled_user_flow: result.pooled_user_flow(),
        unpooled_user_flow: result.residual.iter().map(|a| a.max(0.0)).sum(),
    })
}

/// `sum_C gamma_C pooled_cost_C + sum_m alpha'_m t0_m`, user-minutes per hour.
pub fn relaxed_objective(
    result: &AssignmentResult,
    options: &PoolOptions,
    requests: &[Request],
    table: &ShortestPathTable,
) -> f64 {
    let pooled: f64 = result
        .gamma
        .iter()
        .map(|(bag, g)| g * options.get(bag).map_or(f64::NAN, |o| o.pooled_cost))
        .sum();
    let solo: f64 = requests
        .iter()
        .zip(&result.residual)
        .map(|(r, a)| a * table.dist(r.origin, r.destination))
        .sum();
    pooled + solo
}
