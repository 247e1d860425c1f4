mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ridepool::assignment::{assemble_d_rp, greedy_assign, relaxed_objective};
use ridepool::demand::build_demand_matrix;
use ridepool::flow::{decompose_flows, recompose, solve_network_flow};
use ridepool::network::{all_pairs_shortest_paths, RoadNetwork, ShortestPathTable};
use ridepool::pipeline::{run_pipeline, PipelineParams};
use ridepool::spatial::{precompute_pool_options, PoolOptions, PrecomputeConfig};
use ridepool::Request;

use common::{random_network, random_requests};

struct Instance {
    net: RoadNetwork,
    table: ShortestPathTable,
    reqs: Vec<Request>,
    options: PoolOptions,
}

fn instance(seed: u64, max_m: usize, k: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=9);
    let net = random_network(&mut rng, n);
    let table = all_pairs_shortest_paths(&net);
    let m = rng.random_range(0..=max_m);
    let reqs = random_requests(&mut rng, n, m, (0.5, 400.0));
    let delta = rng.random_range(0.0..=8.0);
    let options = precompute_pool_options(&reqs, &table, &PrecomputeConfig::new(k, delta)).unwrap();
    Instance { net, table, reqs, options }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn rates_are_conserved(seed in any::<u64>(), k in 1usize..=3, t_bar in 0.5f64..15.0) {
        let i = instance(seed, 7, k);
        let res = greedy_assign(&i.options, &i.reqs, &i.table, t_bar).unwrap();
        prop_assert!(res.conservation_error(&i.reqs) <= 1e-9);
        prop_assert!(res.residual.iter().all(|&a| a >= 0.0));
        prop_assert!(res.gamma.values().all(|&g| g > 0.0));
        let pooled = res.pooled_user_flow();
        let total: f64 = i.reqs.iter().map(|r| r.rate).sum();
        prop_assert!(pooled <= total + 1e-9);
    }

    #[test]
    fn ride_pooling_demand_keeps_invariants(seed in any::<u64>(), t_bar in 0.5f64..15.0) {
        let i = instance(seed, 7, 2);
        let res = greedy_assign(&i.options, &i.reqs, &i.table, t_bar).unwrap();
        let rp = assemble_d_rp(&res, &i.options, &i.reqs, i.net.node_count()).unwrap();
        for s in rp.d_rp.column_sums() {
            prop_assert!(s.abs() <= 1e-9);
        }
        prop_assert!(rp.d_rp.invariant_violation() <= 1e-9);
    }

    #[test]
    fn user_time_at_zero_weight_is_the_relaxed_objective(seed in any::<u64>(), t_bar in 0.5f64..15.0) {
        let i = instance(seed, 7, 2);
        let res = greedy_assign(&i.options, &i.reqs, &i.table, t_bar).unwrap();
        let rp = assemble_d_rp(&res, &i.options, &i.reqs, i.net.node_count()).unwrap();
        let pooled = solve_network_flow(&i.net, &i.table, &rp.d_rp, 0.0).unwrap();
        let relaxed = relaxed_objective(&res, &i.options, &i.reqs, &i.table);
        prop_assert!((pooled.objective(0.0) - relaxed).abs() <= 1e-6 * relaxed.abs().max(1.0));

        let base = solve_network_flow(&i.net, &i.table, &build_demand_matrix(&i.reqs, i.net.node_count()).unwrap(), 0.0).unwrap();
        prop_assert!(pooled.user_time <= base.user_time + 1e-9 * base.user_time.max(1.0));
    }

    #[test]
    fn itineraries_recompose_the_flow(seed in any::<u64>()) {
        let i = instance(seed, 12, 2);
        let res = greedy_assign(&i.options, &i.reqs, &i.table, 5.0).unwrap();
        let rp = assemble_d_rp(&res, &i.options, &i.reqs, i.net.node_count()).unwrap();
        let sol = solve_network_flow(&i.net, &i.table, &rp.d_rp, 1.0).unwrap();
        prop_assert!(sol.balance_residual(&i.net, &rp.d_rp) <= 1e-9);
        let its = decompose_flows(&sol, &i.net);
        let back = recompose(&its, i.net.arc_count());
        for (a, b) in back.iter().zip(sol.total_flow()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        for it in &its {
            prop_assert!(it.flow > 0.0);
            prop_assert!(!it.arcs.is_empty());
            for w in it.arcs.windows(2) {
                prop_assert_eq!(i.net.arc(w[0]).head, i.net.arc(w[1]).tail);
            }
            if it.is_cycle {
                prop_assert_eq!(i.net.arc(*it.arcs.last().unwrap()).head, i.net.arc(it.arcs[0]).tail);
            }
        }
        prop_assert!(its.len() <= i.net.arc_count() * 2 + i.net.node_count());
    }

    #[test]
    fn metrics_stay_in_range(seed in any::<u64>(), t_bar in 0.5f64..15.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(2..=8);
        let net = random_network(&mut rng, n);
        let m = rng.random_range(0..=6);
        let reqs = random_requests(&mut rng, n, m, (0.5, 200.0));
        let mut params = PipelineParams::new(2, 5.0, t_bar);
        params.workers = Some(1);
        let out = run_pipeline(&net, &reqs, &params).unwrap();
        let r = &out.metrics;
        prop_assert!((0.0..=100.0 + 1e-9).contains(&r.pooled_percentage));
        prop_assert!(r.average_delay >= 0.0 && r.average_delay <= 5.0 + 1e-9);
        let shares: f64 = r.composition.iter().map(|c| c.1).sum();
        if r.total_demand > 0.0 {
            prop_assert!((shares - 1.0).abs() <= 1e-9);
        }
        prop_assert!((0.0..=1.0).contains(&r.base_rebalancing_share));
        prop_assert!((0.0..=1.0).contains(&r.pooled_rebalancing_share));
    }
}

#[test]
fn longer_windows_pool_more_in_the_first_pick() {
    let mut checked = 0;
    for seed in 0..40 {
        let i = instance(seed, 6, 2);
        let mut last = -1.0;
        for t_bar in [0.5, 1.0, 2.0, 5.0, 10.0, 15.0] {
            let res = greedy_assign(&i.options, &i.reqs, &i.table, t_bar).unwrap();
            let Some(first) = res.selection.first() else { break };
            let users = first.gamma * first.bag.size() as f64;
            assert!(users >= last, "seed {seed}: {users} after {last} at t_bar {t_bar}");
            last = users;
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn pooling_never_costs_users_time_on_a_line() {
    // Bidirectional line where trips 1->4 and 2->3 share the corridor.
    let net = ridepool::network::parse_edge_list("1 2 1\n2 3 1\n3 4 1\n2 1 1\n3 2 1\n4 3 1\n").unwrap();
    let reqs = vec![Request::new(0, 3, 30.0).unwrap(), Request::new(1, 2, 30.0).unwrap()];
    let out = run_pipeline(&net, &reqs, &PipelineParams::new(2, 0.0, 5.0)).unwrap();
    assert!(out.metrics.pooled_user_flow > 0.0);
    assert!(out.point.pooled.user_time < out.point.base.user_time);
    assert!(out.metrics.objective_improvement > 0.0);
}
