//! Configuration-driven sweeps over demand level and waiting window.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{scale_requests, total_demand, Request};
use crate::granularity::{granularity_sweep, write_granularity_csv, GranularityRow};
use crate::network::{parse_edge_list, parse_requests, parse_tntp_scaled, RoadNetwork};
use crate::pipeline::{evaluate_point, prepare, PipelineParams, Timings};
use crate::spatial::{Bag, CACHE_DIR_ENV};
use crate::temporal::{pool_probability, pool_probability_mc, random_params};
use crate::flow::MetricsReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkFormat {
    Tntp,
    EdgeList,
}

/// A single value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    pub fn values(&self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![*v],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_scale() -> OneOrMany {
    OneOrMany::One(1.0)
}

fn default_max_bags() -> u64 {
    50_000_000
}

fn default_output() -> PathBuf {
    PathBuf::from("output")
}

/// Flat JSON experiment description. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub network_format: NetworkFormat,
    /// TNTP network file.
    #[serde(default)]
    pub net_path: Option<PathBuf>,
    /// TNTP trips file.
    #[serde(default)]
    pub trips_path: Option<PathBuf>,
    /// TNTP node coordinates.
    #[serde(default)]
    pub node_path: Option<PathBuf>,
    #[serde(default)]
    pub edge_list_path: Option<PathBuf>,
    /// `origin destination rate` lines, for edge-list networks.
    #[serde(default)]
    pub requests_path: Option<PathBuf>,
    /// Multiplier turning file travel times into minutes.
    #[serde(default = "default_one")]
    pub time_scale: f64,
    pub k_max: usize,
    /// Minutes.
    pub delta_bar: f64,
    /// Minutes.
    pub t_bar: OneOrMany,
    #[serde(default = "default_scale")]
    pub demand_scale: OneOrMany,
    #[serde(default = "default_one")]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_max_bags")]
    pub max_bags: u64,
    /// Cluster counts for the granularity study.
    #[serde(default)]
    pub granularity_k: Vec<usize>,
}

impl ExperimentConfig {
    /// Reads a config, resolving relative paths against its directory and
    /// applying the cache directory environment override.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::from(e).context(path.display().to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            cfg.cache_dir = Some(PathBuf::from(dir));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.net_path);
        fix(&mut self.trips_path);
        fix(&mut self.node_path);
        fix(&mut self.edge_list_path);
        fix(&mut self.requests_path);
        fix(&mut self.cache_dir);
        if self.output_dir.is_relative() {
            self.output_dir = base.join(&self.output_dir);
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.k_max < 1 {
            return bad("k_max must be at least 1".into());
        }
        if !(self.delta_bar >= 0.0 && self.delta_bar.is_finite()) {
            return bad(format!("delta_bar must be non-negative, got {}", self.delta_bar));
        }
        let t = self.t_bar.values();
        if t.is_empty() || t.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return bad("t_bar must be a nonempty list of non-negative minutes".into());
        }
        let s = self.demand_scale.values();
        if s.is_empty() || s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return bad("demand_scale must be a nonempty list of positive factors".into());
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be non-negative, got {}", self.rho));
        }
        if self.workers == Some(0) {
            return bad("workers must be at least 1".into());
        }
        if let Some(k) = self.granularity_k.iter().find(|&&k| k < 2) {
            return bad(format!("granularity cluster counts must be at least 2, got {k}"));
        }
        Ok(())
    }

    pub fn pipeline_params(&self, t_bar: f64) -> PipelineParams {
        PipelineParams {
            k_max: self.k_max,
            delta_bar: self.delta_bar,
            t_bar,
            rho: self.rho,
            workers: self.workers,
            max_bags: self.max_bags,
            cache_dir: self.cache_dir.clone(),
        }
    }

    /// Loads the network and the unscaled requests.
    pub fn load_inputs(&self) -> Result<(RoadNetwork, Vec<Request>)> {
        let read = |p: &Option<PathBuf>, what: &str| -> Result<String> {
            let p = p
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("config is missing {what}")))?;
            fs::read_to_string(p).map_err(|e| Error::io(p, e))
        };
        match self.network_format {
            NetworkFormat::Tntp => {
                let net = read(&self.net_path, "net_path")?;
                let trips = read(&self.trips_path, "trips_path")?;
                let nodes = self
                    .node_path
                    .as_ref()
                    .map(|_| read(&self.node_path, "node_path"))
                    .transpose()?;
                parse_tntp_scaled(&net, &trips, nodes.as_deref(), self.time_scale)
            }
            NetworkFormat::EdgeList => {
                let text = read(&self.edge_list_path, "edge_list_path")?;
                let mut net = parse_edge_list(&text)?;
                if self.time_scale != 1.0 {
                    net = net.scaled_times(self.time_scale)?;
                }
                let requests = match &self.requests_path {
                    Some(_) => parse_requests(&read(&self.requests_path, "requests_path")?, net.node_count())?,
                    None => Vec::new(),
                };
                Ok((net, requests))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub demand_scale: f64,
    pub total_demand: f64,
    pub t_bar: f64,
    pub delta_bar: f64,
    pub k_max: usize,
    pub rho: f64,
    pub metrics: MetricsReport,
    /// Bags with positive flow and their vehicle flow per hour.
    pub assigned: Vec<(Bag, f64)>,
    #[serde(skip)]
    pub timings: Timings,
    #[serde(skip)]
    pub cache_hit: bool,
}

/// Runs every (demand scale, waiting window) point. Pool options depend only
/// on the OD pairs, so they are computed once.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let (net, requests) = cfg.load_inputs()?;
    let t_values = cfg.t_bar.values();
    let params = cfg.pipeline_params(t_values[0]);
    let (table, options, cache_hit, prep) = prepare(&net, &requests, &params)?;
    log::info!(
        "{} nodes, {} arcs, {} requests, {} pool options ({})",
        net.node_count(),
        net.arc_count(),
        requests.len(),
        options.len(),
        if cache_hit { "cached" } else { "computed" }
    );
    let mut points = Vec::new();
    for scale in cfg.demand_scale.values() {
        let scaled = scale_requests(&requests, scale)?;
        for &t_bar in &t_values {
            let index = points.len();
            let mut timings = Timings {
                shortest_paths_seconds: if index == 0 { prep.shortest_paths_seconds } else { 0.0 },
                precompute_seconds: if index == 0 { prep.precompute_seconds } else { 0.0 },
                ..Timings::default()
            };
            let out = evaluate_point(&net, &table, &scaled, &options, t_bar, cfg.rho, &mut timings)
                .map_err(|e| e.context(format!("sweep point {index} (demand scale {scale}, t_bar {t_bar})")))?;
            points.push(SweepPoint {
                index,
                demand_scale: scale,
                total_demand: total_demand(&scaled),
                t_bar,
                delta_bar: cfg.delta_bar,
                k_max: cfg.k_max,
                rho: cfg.rho,
                assigned: out.assignment.gamma.iter().map(|(b, g)| (b.clone(), *g)).collect(),
                metrics: out.metrics,
                timings,
                cache_hit: cache_hit && index == 0,
            });
        }
    }
    Ok(points)
}

/// Aggregate CSV without wall times, so identical runs give identical bytes.
pub fn summary_csv(points: &[SweepPoint], k_max: usize) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = [
        "point",
        "demand_scale",
        "total_demand",
        "t_bar",
        "delta_bar",
        "pooled_percentage",
        "average_delay",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend((1..=k_max.max(1)).map(|k| format!("share_k{k}")));
    header.extend(
        [
            "objective_improvement",
            "base_rebalancing_share",
            "pooled_rebalancing_share",
            "iterations",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    w.write_record(&header).map_err(csv_err)?;
    for p in points {
        let m = &p.metrics;
        let mut row = vec![
            p.index.to_string(),
            format!("{:?}", p.demand_scale),
            format!("{:?}", p.total_demand),
            format!("{:?}", p.t_bar),
            format!("{:?}", p.delta_bar),
            format!("{:?}", m.pooled_percentage),
            format!("{:?}", m.average_delay),
        ];
        for k in 1..=k_max.max(1) {
            let share = m.composition.iter().find(|c| c.0 == k).map_or(0.0, |c| c.1);
            row.push(format!("{share:?}"));
        }
        row.push(format!("{:?}", m.objective_improvement));
        row.push(format!("{:?}", m.base_rebalancing_share));
        row.push(format!("{:?}", m.pooled_rebalancing_share));
        row.push(m.iterations.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn timings_csv(points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "point",
        "shortest_paths_seconds",
        "precompute_seconds",
        "assignment_seconds",
        "flow_seconds",
        "cache_hit",
    ])
    .map_err(csv_err)?;
    for p in points {
        let t = &p.timings;
        w.write_record([
            p.index.to_string(),
            format!("{:.6}", t.shortest_paths_seconds),
            format!("{:.6}", t.precompute_seconds),
            format!("{:.6}", t.assignment_seconds),
            format!("{:.6}", t.flow_seconds),
            p.cache_hit.to_string(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn csv_err(e: csv::Error) -> Error {
    Error::InvalidParameter(format!("csv: {e}"))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Runs the sweep and writes `summary.csv`, `timings.csv` and one
/// `points/point_<i>.json` per sweep point into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    let points = run_sweep(cfg)?;
    let dir = &cfg.output_dir;
    let points_dir = dir.join("points");
    fs::create_dir_all(&points_dir).map_err(|e| Error::io(&points_dir, e))?;
    write_file(&dir.join("summary.csv"), &summary_csv(&points, cfg.k_max)?)?;
    write_file(&dir.join("timings.csv"), &timings_csv(&points)?)?;
    for p in &points {
        let path = points_dir.join(format!("point_{}.json", p.index));
        write_file(&path, &serde_json::to_string_pretty(p)?)?;
    }
    Ok(points)
}

/// Granularity study at the first sweep point of the config, written to
/// `granularity.csv`.
pub fn run_granularity(cfg: &ExperimentConfig, k_values: &[usize]) -> Result<Vec<GranularityRow>> {
    if k_values.is_empty() {
        return Err(Error::InvalidParameter("no cluster counts given".into()));
    }
    if let Some(k) = k_values.iter().find(|&&k| k < 2) {
        return Err(Error::InvalidParameter(format!(
            "cluster counts must be at least 2, got {k}"
        )));
    }
    let (net, requests) = cfg.load_inputs()?;
    let scale = cfg.demand_scale.values()[0];
    let requests = scale_requests(&requests, scale)?;
    let params = cfg.pipeline_params(cfg.t_bar.values()[0]);
    let rows = granularity_sweep(&net, &requests, k_values, &params, cfg.seed)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let path = cfg.output_dir.join("granularity.csv");
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    write_granularity_csv(&rows, file)?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub rates: Vec<f64>,
    pub t_bar: f64,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    /// `|closed_form - estimate| / std_error`.
    pub z: f64,
}

/// Closed-form co-occurrence probability against Monte Carlo on random
/// configurations (rates per minute, windows in minutes).
pub fn validate_lemma(
    configs: usize,
    samples: u64,
    max_k: usize,
    rate_range: (f64, f64),
    t_range: (f64, f64),
    seed: u64,
) -> Vec<LemmaCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..configs)
        .map(|i| {
            let params = random_params(&mut rng, max_k, rate_range, t_range);
            let exact = pool_probability(&params);
            let mc = pool_probability_mc(&params, samples, seed.wrapping_add(1 + i as u64));
            LemmaCheck {
                rates: params.rates().to_vec(),
                t_bar: params.t_bar(),
                closed_form: exact,
                estimate: mc.estimate,
                std_error: mc.std_error,
                z: (exact - mc.estimate).abs() / mc.std_error,
            }
        })
        .collect()
}
