use rayon::prelude::*;
use serde::Serialize;

use super::path::{run_path_with, MarketConfig, PathResult, SimParams};
use crate::error::Result;
use crate::model::DriftSpec;
use crate::noise::CounterNoise;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

pub const EVIDENCE_NOTE: &str =
    "finite-horizon Monte Carlo frequency: empirical evidence only, not a proof of diversity or its absence";
pub const DISCRETIZATION_NOTE: &str =
    "hits are detected on the time grid only, which biases the frequency downward by O(sqrt(dt))";

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if k == 0 {
        0.0
    } else {
        (center - half).clamp(0.0, p)
    };
    let hi = if k == n {
        1.0
    } else {
        (center + half).clamp(p, 1.0)
    };
    (lo, hi)
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelEcho {
    pub n: usize,
    pub delta: f64,
    pub drift: DriftSpec,
    pub initial_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub n_paths: usize,
    pub n_hits: usize,
    pub hit_frequency: f64,
    pub wilson_ci_95: (f64, f64),
    pub mean_max_weight: f64,
    pub mean_hit_time: Option<f64>,
    pub per_stock_hit_counts: Vec<usize>,
    pub params: SimParams,
    pub model: ModelEcho,
    pub evidence_note: &'static str,
    pub discretization_note: &'static str,
}

/// All paths, in path order. Runs in parallel on the current rayon pool.
pub fn simulate_paths(
    config: &MarketConfig,
    params: &SimParams,
    record: bool,
) -> Result<Vec<PathResult>> {
    params.validate()?;
    let noise = CounterNoise::new(params.seed);
    Ok((0..params.n_paths as u64)
        .into_par_iter()
        .map(|i| run_path_with(config, params, i, &noise, record))
        .collect())
}

/// Ordered reduction of path results into a report.
pub fn aggregate(
    config: &MarketConfig,
    params: &SimParams,
    paths: &[PathResult],
) -> MonteCarloReport {
    let mut per_stock = vec![0usize; config.n];
    let mut hits = 0usize;
    let mut max_sum = 0.0;
    let mut hit_time_sum = 0.0;
    for p in paths {
        max_sum += p.max_weight_seen;
        if p.hit {
            hits += 1;
            hit_time_sum += p.hit_time.unwrap_or(0.0);
            if let Some(s) = p.hit_stock {
                per_stock[s] += 1;
            }
        }
    }
    let n = paths.len();
    MonteCarloReport {
        n_paths: n,
        n_hits: hits,
        hit_frequency: if n > 0 { hits as f64 / n as f64 } else { 0.0 },
        wilson_ci_95: wilson_interval(hits, n),
        mean_max_weight: if n > 0 { max_sum / n as f64 } else { f64::NAN },
        mean_hit_time: (hits > 0).then(|| hit_time_sum / hits as f64),
        per_stock_hit_counts: per_stock,
        params: *params,
        model: ModelEcho {
            n: config.n,
            delta: config.spec.delta(),
            drift: config.spec.clone(),
            initial_weights: config.initial_weights.clone(),
        },
        evidence_note: EVIDENCE_NOTE,
        discretization_note: DISCRETIZATION_NOTE,
    }
}

/// Hitting frequency of `1 - delta` over `params.n_paths` independent paths.
pub fn monte_carlo_hitting(config: &MarketConfig, params: &SimParams) -> Result<MonteCarloReport> {
    let paths = simulate_paths(config, params, false)?;
    Ok(aggregate(config, params, &paths))
}
