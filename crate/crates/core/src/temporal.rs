//! Probability that independent Poisson request streams all fire within a
//! common waiting window, in closed form and by Monte Carlo.
//!
//! For rates `a_1..a_k` and window `t`, the time to the first event of stream
//! `i` is `E_i ~ Exp(a_i)`, and the co-occurrence probability is
//! `P(max E_i - min E_i <= t) = sum_i a_i / sum_j a_j * prod_{j != i} (1 - exp(-a_j t))`.
//!
//! Rates and the window must use the same time unit; callers working in
//! requests/hour and minutes convert with [`crate::MINUTES_PER_HOUR`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::{Error, Result};

/// Products with any factor argument below this are evaluated in log space.
const LOG_SPACE_THRESHOLD: f64 = 1e-8;
const MC_CHUNK: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TemporalParams {
    t_bar: f64,
    rates: Vec<f64>,
}

impl TemporalParams {
    pub fn new(t_bar: f64, rates: Vec<f64>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidParameter("at least one rate is required".into()));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "arrival rates must be positive, got {r}"
            )));
        }
        if t_bar.is_nan() || t_bar < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "waiting window must be non-negative, got {t_bar}"
            )));
        }
        Ok(TemporalParams { t_bar, rates })
    }

    pub fn t_bar(&self) -> f64 {
        self.t_bar
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }
}

/// Closed-form co-occurrence probability; 1 for a single stream.
pub fn pool_probability(params: &TemporalParams) -> f64 {
    let rates = &params.rates;
    let t = params.t_bar;
    if rates.len() == 1 {
        return 1.0;
    }
    if t == 0.0 {
        return 0.0;
    }
    let args: Vec<f64> = rates.iter().map(|a| a * t).collect();
    let total: f64 = rates.iter().sum();

    let p = if args.iter().any(|&x| x < LOG_SPACE_THRESHOLD) {
        // ln(1 - e^-x), accurate for tiny x.
        let logs: Vec<f64> = args.iter().map(|&x| (-(-x).exp_m1()).ln()).collect();
        let log_all: f64 = logs.iter().sum();
        rates
            .iter()
            .zip(&logs)
            .map(|(a, l)| a / total * (log_all - l).exp())
            .sum()
    } else {
        let factors: Vec<f64> = args.iter().map(|&x| -(-x).exp_m1()).collect();
        (0..rates.len())
            .map(|i| {
                let prod: f64 = factors
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, f)| f)
                    .product();
                rates[i] / total * prod
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// Convenience wrapper validating the inputs.
pub fn pool_probability_of(rates: &[f64], t_bar: f64) -> Result<f64> {
    Ok(pool_probability(&TemporalParams::new(t_bar, rates.to_vec())?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Monte Carlo estimate of the co-occurrence probability.
///
/// Samples are drawn in fixed-size chunks, each with its own ChaCha stream
/// derived from `seed`, so the result does not depend on the thread count.
/// The standard error uses the smoothed proportion `(hits + 1/2) / (n + 1)`,
/// which keeps it positive when every sample hits or misses.
pub fn pool_probability_mc(params: &TemporalParams, samples: u64, seed: u64) -> McEstimate {
    let samples = samples.max(1);
    if params.rates.len() == 1 {
        return McEstimate {
            estimate: 1.0,
            std_error: 0.0,
            samples,
        };
    }
    let dists: Vec<Exp<f64>> = params
        .rates
        .iter()
        .map(|&a| Exp::new(a).expect("rates validated positive"))
        .collect();
    let t_bar = params.t_bar;
    let n_chunks = samples.div_ceil(MC_CHUNK);

    let hits: u64 = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let len = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut hits = 0u64;
            for _ in 0..len {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for d in &dists {
                    let e = d.sample(&mut rng);
                    lo = lo.min(e);
                    hi = hi.max(e);
                }
                if hi - lo <= t_bar {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let n = samples as f64;
    let smoothed = (hits as f64 + 0.5) / (n + 1.0);
    McEstimate {
        estimate: hits as f64 / n,
        std_error: (smoothed * (1.0 - smoothed) / n).sqrt(),
        samples,
    }
}

/// Draws a random configuration for validation sweeps: `k` in `2..=max_k`,
/// rates and window uniform in the given ranges.
pub fn random_params<R: Rng>(
    rng: &mut R,
    max_k: usize,
    rate_range: (f64, f64),
    t_range: (f64, f64),
) -> TemporalParams {
    let k = rng.random_range(2..=max_k.max(2));
    let rates = (0..k)
        .map(|_| rng.random_range(rate_range.0..=rate_range.1))
        .collect();
    let t_bar = rng.random_range(t_range.0..=t_range.1);
    TemporalParams::new(t_bar, rates).expect("ranges are positive")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(rates: &[f64], t: f64) -> f64 {
        pool_probability_of(rates, t).unwrap()
    }

    #[test]
    fn single_stream_is_certain() {
        assert_eq!(p(&[0.3], 0.0), 1.0);
        assert_eq!(p(&[7.0], 12.0), 1.0);
        let mc = pool_probability_mc(&TemporalParams::new(1.0, vec![2.0]).unwrap(), 10, 1);
        assert_eq!((mc.estimate, mc.std_error), (1.0, 0.0));
    }

    #[test]
    fn limits() {
        assert_eq!(p(&[1.0, 1.0], f64::INFINITY), 1.0);
        assert!((p(&[1.0, 1.0], 60.0) - 1.0).abs() < 1e-15);
        assert_eq!(p(&[1.0, 1.0], 0.0), 0.0);
        let mc = pool_probability_mc(&TemporalParams::new(0.0, vec![1.0, 2.0]).unwrap(), 1000, 3);
        assert_eq!(mc.estimate, 0.0);
    }

    #[test]
    fn equal_rates_at_ln2_is_half() {
        // |E1 - E2| ~ Exp(1) for unit rates, so P = 1 - e^{-ln 2}.
        assert!((p(&[1.0, 1.0], std::f64::consts::LN_2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(TemporalParams::new(1.0, vec![1.0, 0.0]).is_err());
        assert!(TemporalParams::new(1.0, vec![-1.0]).is_err());
        assert!(TemporalParams::new(1.0, vec![]).is_err());
        assert!(TemporalParams::new(-1.0, vec![1.0]).is_err());
    }

    #[test]
    fn tiny_rates_do_not_underflow() {
        let v = p(&[1e-12, 2e-12, 3e-12], 1.0);
        assert!(v > 0.0);
        // Leading order: sum_i a_i / sum(a) * prod_{j != i} a_j t.
        let exact = (1.0 * 6e-24 + 2.0 * 3e-24 + 3.0 * 2e-24) / 6.0;
        assert!((v - exact).abs() / exact < 1e-6, "{v} vs {exact}");
    }

    #[test]
    fn three_streams_match_monte_carlo() {
        let params = TemporalParams::new(1.0, vec![0.5, 1.0, 2.0]).unwrap();
        let exact = pool_probability(&params);
        let mc = pool_probability_mc(&params, 400_000, 11);
        assert!((exact - mc.estimate).abs() <= 3.0 * mc.std_error, "{exact} vs {mc:?}");
    }

    #[test]
    fn mc_is_reproducible() {
        let params = TemporalParams::new(0.7, vec![0.5, 1.5]).unwrap();
        assert_eq!(
            pool_probability_mc(&params, 200_000, 5),
            pool_probability_mc(&params, 200_000, 5)
        );
    }

    #[test]
    fn monotone_and_symmetric() {
        let grid = [0.1, 0.5, 1.0, 3.0, 8.0];
        for &a in &grid {
            for &b in &grid {
                let mut last = 0.0;
                for &t in &[0.1, 0.5, 1.0, 2.0, 5.0, 15.0] {
                    let v = p(&[a, b, 1.0], t);
                    assert!(v >= last - 1e-15);
                    assert!(v < 1.0 || t * a.min(b).min(1.0) > 30.0);
                    assert!((v - p(&[1.0, b, a], t)).abs() < 1e-14);
                    last = v;
                }
                // A common rate scale acts like a longer window.
                assert!(p(&[a * 1.5, b * 1.5], 1.0) >= p(&[a, b], 1.0) - 1e-15);
            }
        }
    }

    #[test]
    fn not_monotone_in_a_single_rate() {
        // A much faster stream fires almost at once, leaving the spread to the
        // slow one alone.
        let slow = [1.0, 1.0];
        assert!(p(&[2.0, 1.0], 1.0) > p(&slow, 1.0));
        assert!(p(&[1e6, 1.0], 1.0) < p(&[2.0, 1.0], 1.0));
        assert!((p(&[1e6, 1.0], 1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-5);
    }
}
