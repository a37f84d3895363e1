use serde::{Deserialize, Serialize};

use super::state::{argmax, step_weights_in_place, MarketState};
use crate::error::{Error, Result};
use crate::model::DriftSpec;
use crate::noise::{CounterNoise, Increments, NoiseSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Euler in log-capitalization space; weights are derived.
    #[default]
    LogCapEuler,
    /// Euler on the weight system directly.
    WeightEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub horizon: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub record_stride: usize,
    pub scheme: Scheme,
    /// Keep integrating past the first hit with clamped `g` (diagnostics only).
    pub continue_after_hit: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            horizon: 50.0,
            n_paths: 500,
            seed: 0,
            record_stride: 100,
            scheme: Scheme::LogCapEuler,
            continue_after_hit: false,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!(
                "dt must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        if self.dt > self.horizon {
            return Err(Error::Parameter(format!(
                "dt = {} exceeds the horizon {}",
                self.dt, self.horizon
            )));
        }
        if self.n_paths == 0 {
            return Err(Error::Parameter("n_paths must be at least 1".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::Parameter("record_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        ((self.horizon / self.dt).round() as u64).max(1)
    }
}

/// Number of stocks, drift and starting weights.
#[derive(Debug, Clone, Serialize)]
pub struct MarketConfig {
    pub n: usize,
    pub spec: DriftSpec,
    pub initial_weights: Vec<f64>,
}

impl MarketConfig {
    /// Equal starting weights unless given.
    pub fn new(n: usize, spec: DriftSpec, initial_weights: Option<Vec<f64>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::Parameter(format!(
                "need at least two stocks, got {n}"
            )));
        }
        let w = initial_weights.unwrap_or_else(|| vec![1.0 / n as f64; n]);
        if w.len() != n {
            return Err(Error::Parameter(format!(
                "expected {n} initial weights, got {}",
                w.len()
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!(
                "initial weights sum to {sum}, not 1"
            )));
        }
        let right = spec.right_end();
        if let Some(bad) = w.iter().find(|&&x| !(x > 0.0 && x < right)) {
            return Err(Error::Parameter(format!(
                "initial weight {bad} is outside (0, {right})"
            )));
        }
        Ok(Self {
            n,
            spec,
            initial_weights: w,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub step: u64,
    pub time: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub path: u64,
    /// Some weight reached `1 - delta` on the time grid.
    pub hit: bool,
    pub hit_time: Option<f64>,
    pub hit_stock: Option<usize>,
    pub max_weight_seen: f64,
    pub min_weight_seen: f64,
    pub steps_taken: u64,
    /// A step evaluated `g` outside its domain (continuation past a hit).
    pub post_hit_diagnostics: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// One path with counter-based noise keyed by `(params.seed, path_index)`.
pub fn run_path(config: &MarketConfig, params: &SimParams, path_index: u64) -> Result<PathResult> {
    params.validate()?;
    Ok(run_path_with(
        config,
        params,
        path_index,
        &CounterNoise::new(params.seed),
        false,
    ))
}

/// One path with an explicit noise source. Parameters must already be valid.
pub fn run_path_with<N: NoiseSource + ?Sized>(
    config: &MarketConfig,
    params: &SimParams,
    path_index: u64,
    noise: &N,
    record: bool,
) -> PathResult {
    let n = config.n;
    let spec = &config.spec;
    let threshold = spec.right_end();
    let steps = params.steps();
    let inc = Increments::new(noise, params.dt);
    let mut dw = vec![0.0; n];
    let mut scratch = vec![0.0; n];
    let mut buf = Vec::with_capacity(n);

    let mut state = MarketState::from_weights(&config.initial_weights);
    let mut weights = state.weights.clone();

    let mut max_seen = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut min_seen = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut hit = None;
    let mut post_hit = false;
    let mut trajectory = record.then(|| {
        vec![TrajectoryPoint {
            step: 0,
            time: 0.0,
            weights: weights.clone(),
        }]
    });

    let mut taken = 0;
    for k in 0..steps {
        inc.fill(path_index, k, &mut dw, &mut scratch);
        let clamped = match params.scheme {
            Scheme::LogCapEuler => {
                let c = state.step_logcap(spec, params.dt, &dw, &mut buf);
                weights.copy_from_slice(&state.weights);
                c
            }
            Scheme::WeightEuler => {
                step_weights_in_place(&mut weights, spec, params.dt, &dw, &mut buf)
            }
        };
        post_hit |= clamped;
        taken = k + 1;

        let (top_i, top) = argmax(&weights);
        max_seen = max_seen.max(top);
        min_seen = weights.iter().cloned().fold(min_seen, f64::min);
        let first_hit = hit.is_none() && top >= threshold;
        if first_hit {
            hit = Some((taken as f64 * params.dt, top_i));
        }
        if let Some(t) = trajectory.as_mut() {
            if taken % params.record_stride as u64 == 0 || first_hit || taken == steps {
                t.push(TrajectoryPoint {
                    step: taken,
                    time: taken as f64 * params.dt,
                    weights: weights.clone(),
                });
            }
        }
        if first_hit && !params.continue_after_hit {
            break;
        }
    }

    PathResult {
        path: path_index,
        hit: hit.is_some(),
        hit_time: hit.map(|h| h.0),
        hit_stock: hit.map(|h| h.1),
        max_weight_seen: max_seen,
        min_weight_seen: min_seen,
        steps_taken: taken,
        post_hit_diagnostics: post_hit,
        trajectory,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::ZeroNoise;

    fn config(p: f64) -> MarketConfig {
        MarketConfig::new(
            2,
            DriftSpec::power_law(0.2, p, 1.0).unwrap(),
            Some(vec![0.6, 0.4]),
        )
        .unwrap()
    }

    #[test]
    fn single_quiet_step_cannot_hit() {
        let params = SimParams {
            dt: 1e-3,
            horizon: 1e-3,
            n_paths: 1,
            ..Default::default()
        };
        let r = run_path_with(&config(1e-6), &params, 0, &ZeroNoise, false);
        assert!(!r.hit);
        assert_eq!(r.steps_taken, 1);
    }

    #[test]
    fn deterministic_per_path() {
        let params = SimParams {
            horizon: 1.0,
            seed: 11,
            ..Default::default()
        };
        let a = run_path(&config(0.05), &params, 3).unwrap();
        let b = run_path(&config(0.05), &params, 3).unwrap();
        assert_eq!(a, b);
        let c = run_path(&config(0.05), &params, 4).unwrap();
        assert_ne!(a.max_weight_seen, c.max_weight_seen);
    }

    #[test]
    fn invalid_params() {
        let bad = [
            SimParams {
                dt: 0.0,
                ..Default::default()
            },
            SimParams {
                dt: 2.0,
                horizon: 1.0,
                ..Default::default()
            },
            SimParams {
                n_paths: 0,
                ..Default::default()
            },
            SimParams {
                record_stride: 0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn invalid_config() {
        let spec = DriftSpec::power_law(0.2, 0.1, 1.0).unwrap();
        assert!(MarketConfig::new(1, spec.clone(), None).is_err());
        assert!(MarketConfig::new(2, spec.clone(), Some(vec![0.5])).is_err());
        assert!(MarketConfig::new(2, spec.clone(), Some(vec![0.85, 0.15])).is_err());
        assert!(MarketConfig::new(2, spec.clone(), Some(vec![0.5, 0.6])).is_err());
        assert_eq!(
            MarketConfig::new(4, spec, None).unwrap().initial_weights,
            vec![0.25; 4]
        );
    }

    #[test]
    fn trajectory_recording() {
        let params = SimParams {
            dt: 0.01,
            horizon: 1.0,
            record_stride: 10,
            seed: 2,
            ..Default::default()
        };
        let r = run_path_with(&config(0.5), &params, 0, &CounterNoise::new(2), true);
        let t = r.trajectory.unwrap();
        assert_eq!(t[0].step, 0);
        assert_eq!(t.len(), 11);
        assert_eq!(t.last().unwrap().step, 100);
    }
}
