//! Numerical property checks: the weight system against the log-cap system,
//! and pathwise ordering of two diffusions with ordered drifts.

use rayon::prelude::*;
use serde::Serialize;

use super::path::{MarketConfig, SimParams};
use super::state::{step_weights_in_place, MarketState};
use crate::error::{Error, Result};
use crate::noise::{CounterNoise, Increments, NoiseSource};

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyLevel {
    pub dt: f64,
    /// Mean over paths of `sup_t max_i |mu_i^logcap - mu_i^weights|`.
    pub mean_sup_gap: f64,
    /// Largest per-path sup gap.
    pub max_sup_gap: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ItoConsistencyReport {
    pub levels: Vec<ConsistencyLevel>,
    /// Sup gap over all paths at the coarsest step.
    pub max_abs_weight_gap: f64,
    /// Paths on which either scheme reached `1 - delta` before the horizon at
    /// the coarsest step; their gap is taken up to that step.
    pub stopped_paths: usize,
    /// Least-squares slope of `log mean_sup_gap` against `log dt`.
    pub convergence_order_estimate: f64,
    pub n_paths: usize,
}

/// Sup gap on one path with both schemes driven by the same increments, up to
/// the first step on which either scheme reaches `1 - delta`. Returns the gap
/// and whether the path stopped early.
pub fn consistency_gap<N: NoiseSource + ?Sized>(
    config: &MarketConfig,
    steps: u64,
    inc: &Increments<'_, N>,
    path: u64,
) -> (f64, bool) {
    let threshold = config.spec.right_end();
    let n = config.n;
    let spec = &config.spec;
    let mut state = MarketState::from_weights(&config.initial_weights);
    let mut weights = state.weights.clone();
    let mut dw = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);
    let mut drift_buf = Vec::with_capacity(n);
    let mut gap: f64 = 0.0;
    for k in 0..steps {
        inc.fill(path, k, &mut dw, &mut scratch);
        state.step_logcap(spec, inc.dt, &dw, &mut buf);
        step_weights_in_place(&mut weights, spec, inc.dt, &dw, &mut drift_buf);
        for (a, b) in state.weights.iter().zip(&weights) {
            gap = gap.max((a - b).abs());
        }
        if state
            .weights
            .iter()
            .chain(&weights)
            .any(|&w| w >= threshold)
        {
            return (gap, true);
        }
    }
    (gap, false)
}

/// Runs both schemes at `params.dt`, `dt/2` and `dt/4` on the same Brownian
/// paths (coarse increments are sums of fine ones).
pub fn ito_consistency_check(
    config: &MarketConfig,
    params: &SimParams,
) -> Result<ItoConsistencyReport> {
    ito_consistency_check_with(config, params, &CounterNoise::new(params.seed), 2)
}

/// As [`ito_consistency_check`] with an explicit noise source and number of halvings.
pub fn ito_consistency_check_with<N: NoiseSource + ?Sized>(
    config: &MarketConfig,
    params: &SimParams,
    noise: &N,
    halvings: u32,
) -> Result<ItoConsistencyReport> {
    params.validate()?;
    let finest = 1u64 << halvings;
    let mut levels = Vec::new();
    let mut stopped_paths = 0;
    for l in 0..=halvings {
        let refine = finest >> l;
        let dt = params.dt / (1u64 << l) as f64;
        let steps = params.steps() << l;
        let inc = Increments::refined(noise, dt, refine);
        let runs: Vec<(f64, bool)> = (0..params.n_paths as u64)
            .into_par_iter()
            .map(|p| consistency_gap(config, steps, &inc, p))
            .collect();
        if l == 0 {
            stopped_paths = runs.iter().filter(|r| r.1).count();
        }
        let gaps: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let max = gaps.iter().cloned().fold(0.0, f64::max);
        levels.push(ConsistencyLevel {
            dt,
            mean_sup_gap: mean,
            max_sup_gap: max,
        });
    }
    let order = loglog_slope(
        &levels.iter().map(|l| l.dt).collect::<Vec<_>>(),
        &levels.iter().map(|l| l.mean_sup_gap).collect::<Vec<_>>(),
    );
    Ok(ItoConsistencyReport {
        max_abs_weight_gap: levels[0].max_sup_gap,
        stopped_paths,
        convergence_order_estimate: order,
        n_paths: params.n_paths,
        levels,
    })
}

fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub violation_count: usize,
    /// Largest `X - Y` seen, floored at zero.
    pub max_violation: f64,
    pub tolerance: f64,
    pub n_paths: usize,
    pub steps: u64,
}

/// Allowance `10 sqrt(dt) dt` for discretization before `X > Y` counts.
pub fn comparison_tolerance(dt: f64) -> f64 {
    10.0 * dt.sqrt() * dt
}

/// Integrates `dX = b_low(X) dt + sigma(X) dW` and `dY = b_high(Y) dt + sigma(Y) dW`
/// from the same start with shared noise and counts steps with `X > Y + tol`.
pub fn comparison_lemma_check(
    b_low: impl Fn(f64) -> f64 + Sync,
    b_high: impl Fn(f64) -> f64 + Sync,
    sigma: impl Fn(f64) -> f64 + Sync,
    x_init: f64,
    params: &SimParams,
) -> Result<ComparisonReport> {
    params.validate()?;
    let noise = CounterNoise::new(params.seed);
    let inc = Increments::new(&noise, params.dt);
    let tol = comparison_tolerance(params.dt);
    let steps = params.steps();

    let per_path: Vec<Result<(usize, f64)>> = (0..params.n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let mut x = x_init;
            let mut y = x_init;
            let mut dw = [0.0];
            let mut scratch = [0.0];
            let mut count = 0;
            let mut worst: f64 = 0.0;
            for k in 0..steps {
                let (lo, hi) = (b_low(x), b_high(x));
                if lo > hi {
                    return Err(Error::Precondition(format!(
                        "b_low({x}) = {lo} exceeds b_high({x}) = {hi}"
                    )));
                }
                inc.fill(path, k, &mut dw, &mut scratch);
                let nx = x + lo * params.dt + sigma(x) * dw[0];
                let ny = y + b_high(y) * params.dt + sigma(y) * dw[0];
                x = nx;
                y = ny;
                worst = worst.max(x - y);
                if x > y + tol {
                    count += 1;
                }
            }
            Ok((count, worst))
        })
        .collect();

    let mut violation_count = 0;
    let mut max_violation: f64 = 0.0;
    for r in per_path {
        let (c, w) = r?;
        violation_count += c;
        max_violation = max_violation.max(w);
    }
    Ok(ComparisonReport {
        violation_count,
        max_violation,
        tolerance: tol,
        n_paths: params.n_paths,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DriftSpec;
    use crate::noise::ZeroNoise;

    #[test]
    fn quiet_symmetric_start_has_no_gap() {
        let spec = DriftSpec::patched_power_law(0.2, 0.3, 1.0, 0.5, 0.1).unwrap();
        let cfg = MarketConfig::new(3, spec, None).unwrap();
        let params = SimParams {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 2,
            ..Default::default()
        };
        let r = ito_consistency_check_with(&cfg, &params, &ZeroNoise, 2).unwrap();
        assert!(r.max_abs_weight_gap <= 1e-12, "{r:?}");
    }

    #[test]
    fn identical_drifts_never_separate() {
        let params = SimParams {
            dt: 1e-3,
            horizon: 1.0,
            n_paths: 8,
            seed: 5,
            ..Default::default()
        };
        let r = comparison_lemma_check(|x| -x, |x| -x, |x| 0.5 * x, 1.0, &params).unwrap();
        assert_eq!(r.violation_count, 0);
        assert!(r.max_violation <= 1e-14);
    }

    #[test]
    fn reversed_drifts_are_rejected() {
        let params = SimParams {
            dt: 1e-3,
            horizon: 0.1,
            n_paths: 2,
            ..Default::default()
        };
        let r = comparison_lemma_check(|_| 1.0, |_| 0.0, |_| 1.0, 0.0, &params);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }
}
