use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ridepool::experiment::{run_experiment, run_granularity, validate_lemma, ExperimentConfig, OneOrMany};
use ridepool::network::all_pairs_shortest_paths;
use ridepool::spatial::{load_or_compute, CACHE_DIR_ENV};
use ridepool::{Error, Result};

/// Ride-pooling planning on time-invariant network flows.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the demand / waiting-window sweep of a config.
    Run(ConfigArgs),
    /// Prune the network to each cluster count and tabulate the improvement.
    Granularity {
        #[command(flatten)]
        config: ConfigArgs,
        /// Comma-separated cluster counts; defaults to `granularity_k` in the config.
        #[arg(long, value_delimiter = ',')]
        k: Vec<usize>,
    },
    /// Compute (or load from the cache) the pool options and print counters.
    Precompute {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write the options as JSON.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare the closed-form pooling probability with Monte Carlo.
    ValidateLemma {
        #[arg(long, default_value_t = 50)]
        configs: usize,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 4)]
        max_k: usize,
        /// Rates per minute.
        #[arg(long, default_value_t = 0.1)]
        rate_min: f64,
        #[arg(long, default_value_t = 10.0)]
        rate_max: f64,
        /// Minutes.
        #[arg(long, default_value_t = 0.5)]
        t_min: f64,
        #[arg(long, default_value_t = 15.0)]
        t_max: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest accepted deviation in standard errors.
        #[arg(long, default_value_t = 4.0)]
        threshold: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    k_max: Option<usize>,
    /// Minutes.
    #[arg(long)]
    delta_bar: Option<f64>,
    /// Minutes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    t_bar: Vec<f64>,
    /// Comma-separated factors.
    #[arg(long, value_delimiter = ',')]
    demand_scale: Vec<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, env = CACHE_DIR_ENV)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    max_bags: Option<u64>,
    /// Multiplier turning file travel times into minutes.
    #[arg(long)]
    time_scale: Option<f64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = self.delta_bar {
            cfg.delta_bar = v;
        }
        if !self.t_bar.is_empty() {
            cfg.t_bar = OneOrMany::Many(self.t_bar.clone());
        }
        if !self.demand_scale.is_empty() {
            cfg.demand_scale = OneOrMany::Many(self.demand_scale.clone());
        }
        if let Some(v) = self.rho {
            cfg.rho = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if self.cache_dir.is_some() {
            cfg.cache_dir = self.cache_dir.clone();
        }
        if let Some(v) = self.max_bags {
            cfg.max_bags = v;
        }
        if let Some(v) = self.time_scale {
            cfg.time_scale = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let points = run_experiment(&cfg)?;
            for p in &points {
                println!(
                    "demand {:.1}/h  t_bar {} min: pooled {:.2}%  delay {:.3} min  improvement {:.4}",
                    p.total_demand,
                    p.t_bar,
                    p.metrics.pooled_percentage,
                    p.metrics.average_delay,
                    p.metrics.objective_improvement
                );
            }
            println!("wrote {}", cfg.output_dir.join("summary.csv").display());
        }
        Command::Granularity { config, k } => {
            let cfg = config.load()?;
            let k = if k.is_empty() { cfg.granularity_k.clone() } else { k };
            let rows = run_granularity(&cfg, &k)?;
            for r in &rows {
                println!(
                    "k {:>4} ({} nodes): improvement {:.4}  dropped {:.1}/h  precompute {:.3} s",
                    r.k, r.nodes, r.objective_improvement, r.dropped_demand, r.precompute_seconds
                );
            }
            println!("wrote {}", cfg.output_dir.join("granularity.csv").display());
        }
        Command::Precompute { config, output } => {
            let cfg = config.load()?;
            let (net, requests) = cfg.load_inputs()?;
            let table = all_pairs_shortest_paths(&net);
            let params = cfg.pipeline_params(cfg.t_bar.values()[0]);
            let (options, hit) = load_or_compute(
                cfg.cache_dir.as_deref(),
                &net,
                &table,
                &requests,
                &params.precompute_config(),
            )?;
            println!(
                "{} requests, {} retained options{}",
                requests.len(),
                options.len(),
                if hit { " (from cache)" } else { "" }
            );
            for l in &options.stats.layers {
                println!(
                    "k {}: {} bags, {} sequences, {} feasible, {} retained",
                    l.k, l.bags, l.sequences_evaluated, l.feasible, l.retained
                );
            }
            println!("precompute {:.3} s", options.stats.seconds);
            if let Some(path) = output {
                let text = serde_json::to_string(&options)?;
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            }
        }
        Command::ValidateLemma {
            configs,
            samples,
            max_k,
            rate_min,
            rate_max,
            t_min,
            t_max,
            seed,
            threshold,
        } => {
            if !(0.0 < rate_min && rate_min <= rate_max && 0.0 < t_min && t_min <= t_max) {
                return Err(Error::InvalidParameter("parameter ranges must be positive and ordered".into()));
            }
            let checks = validate_lemma(configs, samples, max_k, (rate_min, rate_max), (t_min, t_max), seed);
            let mut failed = 0;
            println!("k\tt_bar\tclosed_form\tmonte_carlo\tstd_error\tz");
            for c in &checks {
                println!(
                    "{}\t{:.4}\t{:.6}\t{:.6}\t{:.2e}\t{:.2}",
                    c.rates.len(),
                    c.t_bar,
                    c.closed_form,
                    c.estimate,
                    c.std_error,
                    c.z
                );
                if c.z > threshold {
                    failed += 1;
                }
            }
            if failed > 0 {
                return Err(Error::InvalidParameter(format!(
                    "{failed} of {} configurations deviate by more than {threshold} standard errors",
                    checks.len()
                )));
            }
            println!("all {} configurations within {threshold} standard errors", checks.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
