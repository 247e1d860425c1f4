//! Spatial analysis of pooling: bags of requests, their serving sequences,
//! per-user detour delays, and the best feasible sequence of each bag.

mod bag;
mod cache;
mod sequence;

pub use bag::{bag_count, enumerate_bags, layer_size, Bag, Layer};
pub use cache::{cache_key, load_or_compute, CACHE_DIR_ENV};
pub use sequence::{
    enumerate_sequences, evaluate_sequence, Sequence, SequenceEvaluation, Stop, StopKind,
};

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{DemandMatrix, Request};
use crate::network::ShortestPathTable;
use crate::{Error, Result};

/// Slack on the delay threshold comparison, in minutes.
pub const DELAY_TOLERANCE: f64 = 1e-9;

/// Best feasible way to serve a bag, compared against serving its elements
/// individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolOption {
    pub bag: Bag,
    pub best_sequence: Option<Sequence>,
    /// Per bag element, in bag order. Empty when infeasible.
    pub delays: Vec<f64>,
    /// Vehicle time of the best sequence.
    pub pooled_cost: f64,
    /// Sum of direct travel times of the bag elements.
    pub solo_cost: f64,
    /// `solo_cost - pooled_cost`.
    pub improvement: f64,
    pub feasible: bool,
}

impl PoolOption {
    /// Improvement per served user.
    pub fn score(&self) -> f64 {
        self.improvement / self.bag.size() as f64
    }
}

fn solo_cost(bag: &Bag, table: &ShortestPathTable, requests: &[Request]) -> f64 {
    bag.elements()
        .iter()
        .map(|&r| table.dist(requests[r].origin, requests[r].destination))
        .sum()
}

/// Evaluates every valid sequence of `bag` and keeps the cheapest one whose
/// delays all stay within `delta_bar`; ties go to the first in enumeration
/// order. Also returns the number of sequences evaluated.
pub fn best_pool_option_counted(
    bag: &Bag,
    table: &ShortestPathTable,
    requests: &[Request],
    delta_bar: f64,
) -> (PoolOption, usize) {
    let sequences = enumerate_sequences(bag, requests);
    let evaluated = sequences.len();
    let mut best: Option<(Sequence, SequenceEvaluation)> = None;
    for seq in sequences {
        let eval = evaluate_sequence(&seq, table, requests);
        if eval.delays.iter().any(|&d| d > delta_bar + DELAY_TOLERANCE) {
            continue;
        }
        if best.as_ref().is_none_or(|(_, b)| eval.cost < b.cost) {
            best = Some((seq, eval));
        }
    }
    let solo = solo_cost(bag, table, requests);
    let option = match best {
        Some((seq, eval)) => {
            let mut improvement = solo - eval.cost;
            // Equal costs reached through different summation orders.
            if bag.size() == 1 || improvement.abs() <= 1e-12 * solo.max(1.0) {
                improvement = 0.0;
            }
            PoolOption {
                bag: bag.clone(),
                best_sequence: Some(seq),
                delays: eval.delays,
                pooled_cost: eval.cost,
                solo_cost: solo,
                improvement,
                feasible: true,
            }
        }
        None => PoolOption {
            bag: bag.clone(),
            best_sequence: None,
            delays: Vec::new(),
            pooled_cost: f64::INFINITY,
            solo_cost: solo,
            improvement: 0.0,
            feasible: false,
        },
    };
    (option, evaluated)
}

pub fn best_pool_option(
    bag: &Bag,
    table: &ShortestPathTable,
    requests: &[Request],
    delta_bar: f64,
) -> PoolOption {
    best_pool_option_counted(bag, table, requests, delta_bar).0
}

/// Unit-rate demand matrix of the vehicle legs of a feasible option's best
/// sequence. Legs between coinciding stops are skipped; repeated legs add up.
pub fn demand_matrix_of_option(opt: &PoolOption, n_nodes: usize) -> Result<DemandMatrix> {
    let seq = opt.best_sequence.as_ref().filter(|_| opt.feasible).ok_or_else(|| {
        Error::InvalidParameter(format!("bag {} has no feasible sequence", opt.bag))
    })?;
    let mut d = DemandMatrix::zeros(n_nodes);
    for (from, to) in seq.legs() {
        d.add_flow(from, to, 1.0);
    }
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeConfig {
    pub k_max: usize,
    /// Minutes.
    pub delta_bar: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    /// Abort if more bags than this would be enumerated.
    pub max_bags: u64,
}

impl PrecomputeConfig {
    pub fn new(k_max: usize, delta_bar: f64) -> Self {
        PrecomputeConfig {
            k_max,
            delta_bar,
            workers: None,
            max_bags: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerStats {
    pub k: usize,
    pub bags: u64,
    pub sequences_evaluated: u64,
    pub feasible: u64,
    pub retained: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrecomputeStats {
    pub layers: Vec<LayerStats>,
    pub seconds: f64,
}

/// Feasible bags with strictly positive improvement, keyed by bag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolOptions {
    pub k_max: usize,
    pub delta_bar: f64,
    #[serde(with = "options_as_list")]
    pub options: BTreeMap<Bag, PoolOption>,
    pub stats: PrecomputeStats,
}

/// JSON object keys must be strings, so the map is stored as a list.
mod options_as_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    use super::{Bag, PoolOption};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<Bag, PoolOption>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.values())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<Bag, PoolOption>, D::Error> {
        let list = Vec::<PoolOption>::deserialize(d)?;
        Ok(list.into_iter().map(|o| (o.bag.clone(), o)).collect())
    }
}

impl PoolOptions {
    pub fn empty(k_max: usize, delta_bar: f64) -> Self {
        PoolOptions {
            k_max,
            delta_bar,
            options: BTreeMap::new(),
            stats: PrecomputeStats::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn get(&self, bag: &Bag) -> Option<&PoolOption> {
        self.options.get(bag)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoolOption> {
        self.options.values()
    }
}

/// Evaluates every bag of 2..=k_max requests. Singletons never improve on
/// themselves and are skipped.
pub fn precompute_pool_options(
    requests: &[Request],
    table: &ShortestPathTable,
    config: &PrecomputeConfig,
) -> Result<PoolOptions> {
    if config.k_max == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if !(config.delta_bar >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "maximum delay must be non-negative, got {}",
            config.delta_bar
        )));
    }
    let m = requests.len();
    let total = bag_count(m, config.k_max);
    if total > config.max_bags as u128 {
        return Err(Error::ResourceLimit(format!(
            "{total} bags for M = {m}, K = {}; cap is {} (raise max_bags or lower K)",
            config.k_max, config.max_bags
        )));
    }

    let run = || -> PoolOptions {
        let start = Instant::now();
        let mut result = PoolOptions::empty(config.k_max, config.delta_bar);
        result.stats.layers.push(LayerStats {
            k: 1,
            bags: m as u64,
            ..Default::default()
        });
        for k in 2..=config.k_max {
            let bags: Vec<Bag> = Layer::new(m, k).collect();
            let evaluated: Vec<(PoolOption, usize)> = bags
                .par_iter()
                .map(|bag| best_pool_option_counted(bag, table, requests, config.delta_bar))
                .collect();
            let mut layer = LayerStats {
                k,
                bags: bags.len() as u64,
                ..Default::default()
            };
            for (opt, n_seq) in evaluated {
                layer.sequences_evaluated += n_seq as u64;
                if opt.feasible {
                    layer.feasible += 1;
                    if opt.improvement > 0.0 {
                        layer.retained += 1;
                        result.options.insert(opt.bag.clone(), opt);
                    }
                }
            }
            result.stats.layers.push(layer);
        }
        result.stats.seconds = start.elapsed().as_secs_f64();
        result
    };

    match config.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
        None => Ok(run()),
    }
}

/// `(2k)! * M^k`, the per-layer bound on evaluated sequences.
pub fn sequence_bound(m: usize, k: usize) -> u128 {
    let fact: u128 = (1..=(2 * k) as u128).product();
    fact.saturating_mul((m as u128).saturating_pow(k as u32))
}
