//! End-to-end evaluation: pool options, greedy assignment, ride-pooling
//! demand, and the base and pooled flow solves.

use std::path::PathBuf;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assignment::{assemble_d_rp, greedy_assign, AssignmentResult, RidePoolingDemand};
use crate::demand::{build_demand_matrix, Request};
use crate::flow::{compute_metrics, solve_network_flow, FlowSolution, MetricsReport};
use crate::network::{all_pairs_shortest_paths, RoadNetwork, ShortestPathTable};
use crate::spatial::{load_or_compute, PoolOptions, PrecomputeConfig};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub k_max: usize,
    /// Maximum detour delay, minutes.
    pub delta_bar: f64,
    /// Waiting window, minutes.
    pub t_bar: f64,
    pub rho: f64,
    pub workers: Option<usize>,
    pub max_bags: u64,
    pub cache_dir: Option<PathBuf>,
}

impl PipelineParams {
    pub fn new(k_max: usize, delta_bar: f64, t_bar: f64) -> Self {
        PipelineParams {
            k_max,
            delta_bar,
            t_bar,
            rho: 1.0,
            workers: None,
            max_bags: PrecomputeConfig::new(k_max, delta_bar).max_bags,
            cache_dir: None,
        }
    }

    pub fn precompute_config(&self) -> PrecomputeConfig {
        PrecomputeConfig {
            k_max: self.k_max,
            delta_bar: self.delta_bar,
            workers: self.workers,
            max_bags: self.max_bags,
        }
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub shortest_paths_seconds: f64,
    pub precompute_seconds: f64,
    pub assignment_seconds: f64,
    pub flow_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutput {
    pub assignment: AssignmentResult,
    pub demand: RidePoolingDemand,
    pub base: FlowSolution,
    pub pooled: FlowSolution,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub options: PoolOptions,
    pub cache_hit: bool,
    pub point: PointOutput,
    pub metrics: MetricsReport,
    pub timings: Timings,
}

/// Shortest paths plus pool options (possibly from the cache), with their
/// wall times.
pub fn prepare(
    net: &RoadNetwork,
    requests: &[Request],
    params: &PipelineParams,
) -> Result<(ShortestPathTable, PoolOptions, bool, Timings)> {
    let mut timings = Timings::default();
    let start = Instant::now();
    let table = all_pairs_shortest_paths(net);
    timings.shortest_paths_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let (options, hit) = load_or_compute(
        params.cache_dir.as_deref(),
        net,
        &table,
        requests,
        &params.precompute_config(),
    )?;
    timings.precompute_seconds = start.elapsed().as_secs_f64();
    Ok((table, options, hit, timings))
}

/// Assignment and both flow solves for one waiting window. `options` must
/// have been computed for the OD pairs of `requests`; rates may differ.
pub fn evaluate_point(
    net: &RoadNetwork,
    table: &ShortestPathTable,
    requests: &[Request],
    options: &PoolOptions,
    t_bar: f64,
    rho: f64,
    timings: &mut Timings,
) -> Result<PointOutput> {
    let start = Instant::now();
    let assignment = greedy_assign(options, requests, table, t_bar)?;
    let demand = assemble_d_rp(&assignment, options, requests, net.node_count())?;
    timings.assignment_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let d = build_demand_matrix(requests, net.node_count())?;
    let base = solve_network_flow(net, table, &d, rho)?;
    let pooled = solve_network_flow(net, table, &demand.d_rp, rho)?;
    timings.flow_seconds = start.elapsed().as_secs_f64();

    let metrics = compute_metrics(&base, &pooled, &assignment, options, requests)?;
    Ok(PointOutput {
        assignment,
        demand,
        base,
        pooled,
        metrics,
    })
}

pub fn run_pipeline(
    net: &RoadNetwork,
    requests: &[Request],
    params: &PipelineParams,
) -> Result<PipelineOutput> {
    let (table, options, cache_hit, mut timings) = prepare(net, requests, params)?;
    let point = evaluate_point(net, &table, requests, &options, params.t_bar, params.rho, &mut timings)?;
    Ok(PipelineOutput {
        metrics: point.metrics.clone(),
        options,
        cache_hit,
        point,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::parse_edge_list;

    #[test]
    fn empty_demand_reports_nothing_pooled() {
        let net = parse_edge_list("1 2 1\n2 1 1\n").unwrap();
        let out = run_pipeline(&net, &[], &PipelineParams::new(2, 5.0, 5.0)).unwrap();
        assert_eq!(out.metrics.pooled_percentage, 0.0);
        assert_eq!(out.metrics.objective_improvement, 0.0);
        assert!(!out.metrics.delay_defined);
    }

    #[test]
    fn collinear_requests_pool() {
        let net = parse_edge_list("1 2 1\n2 3 1\n3 4 1\n2 1 1\n3 2 1\n4 3 1\n").unwrap();
        let reqs = vec![Request::new(0, 3, 30.0).unwrap(), Request::new(1, 2, 30.0).unwrap()];
        let out = run_pipeline(&net, &reqs, &PipelineParams::new(2, 0.0, 10.0)).unwrap();
        let m = &out.metrics;
        assert!(m.pooled_percentage > 0.0);
        assert_eq!(m.average_delay, 0.0);
        assert!(out.point.pooled.user_time < out.point.base.user_time);
        let shares: f64 = m.composition.iter().map(|c| c.1).sum();
        assert!((shares - 1.0).abs() < 1e-12);
    }
}
