use serde::{Deserialize, Serialize};

use super::FlowSolution;
use crate::assignment::AssignmentResult;
use crate::demand::{total_demand, Request};
use crate::spatial::PoolOptions;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Users per hour.
    pub total_demand: f64,
    pub pooled_user_flow: f64,
    /// Share of users in pooled rides, percent.
    pub pooled_percentage: f64,
    /// Mean detour delay of pooled users, minutes. Zero when nobody pools.
    pub average_delay: f64,
    /// False when nobody pools and `average_delay` is a placeholder.
    pub delay_defined: bool,
    /// `(k, share)`: fraction of users riding in bags of size `k`; `k = 1`
    /// is riding alone.
    pub composition: Vec<(usize, f64)>,
    /// Vehicle time, `rho = 1`.
    pub base_objective: f64,
    pub pooled_objective: f64,
    /// `(base - pooled) / base`.
    pub objective_improvement: f64,
    pub base_rebalancing_share: f64,
    pub pooled_rebalancing_share: f64,
    pub iterations: usize,
}

fn share(part: f64, whole: f64) -> f64 {
    if whole > 0.0 {
        part / whole
    } else {
        0.0
    }
}

/// Planning metrics comparing the unpooled solution `base` with the pooled one.
/// Both objectives count rebalancing at full weight, whatever `rho` the
/// solutions were reported for.
pub fn compute_metrics(
    base: &FlowSolution,
    pooled: &FlowSolution,
    assignment: &AssignmentResult,
    options: &PoolOptions,
    requests: &[Request],
) -> Result<MetricsReport> {
    if assignment.residual.len() != requests.len() {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} requests, expected {}",
            assignment.residual.len(),
            requests.len()
        )));
    }
    let total = total_demand(requests);
    let pooled_users = assignment.pooled_user_flow();
    let mut delay_mass = 0.0;
    let mut by_size: Vec<f64> = vec![0.0; options.k_max.max(1) + 1];
    for (bag, &g) in &assignment.gamma {
        let opt = options.get(bag).ok_or_else(|| {
            Error::InvalidParameter(format!("assigned bag {bag} has no pool option"))
        })?;
        delay_mass += g * opt.delays.iter().sum::<f64>();
        if by_size.len() <= bag.size() {
            by_size.resize(bag.size() + 1, 0.0);
        }
        by_size[bag.size()] += g * bag.size() as f64;
    }
    by_size[1] = assignment.residual.iter().sum();
    let composition = by_size
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &u)| (k, share(u, total)))
        .collect();

    let base_objective = base.objective(1.0);
    let pooled_objective = pooled.objective(1.0);
    Ok(MetricsReport {
        total_demand: total,
        pooled_user_flow: pooled_users,
        pooled_percentage: 100.0 * share(pooled_users, total),
        average_delay: share(delay_mass, pooled_users),
        delay_defined: pooled_users > 0.0,
        composition,
        base_objective,
        pooled_objective,
        objective_improvement: share(base_objective - pooled_objective, base_objective),
        base_rebalancing_share: share(base.rebal_time, base_objective),
        pooled_rebalancing_share: share(pooled.rebal_time, pooled_objective),
        iterations: assignment.iterations,
    })
}
