//! Fixtures shared by the benchmarks in `benches/`.

use diversity_core::model::DriftSpec;
use diversity_core::simulate::{MarketConfig, SimParams};

/// `(n, delta, p, q)` grid used by the classification benchmark.
pub fn classification_grid() -> Vec<(usize, f64, f64, f64)> {
    let mut v = Vec::new();
    for n in [2, 3, 5, 10] {
        for delta in [0.1, 0.2, 0.3, 0.4] {
            for k in 1..=100 {
                for q in [0.5, 1.0, 1.5, 2.0] {
                    v.push((n, delta, k as f64 / 100.0, q));
                }
            }
        }
    }
    v
}

/// Power law for two stocks, patched near zero otherwise.
pub fn family(n: usize, delta: f64, p: f64, q: f64) -> DriftSpec {
    if n == 2 {
        DriftSpec::power_law(delta, p, q).expect("valid grid point")
    } else {
        DriftSpec::patched_power_law(delta, p, q, 0.5, 0.1).expect("valid grid point")
    }
}

pub fn market(n: usize) -> MarketConfig {
    MarketConfig::new(n, family(n, 0.2, 0.3, 1.0), None).expect("valid market")
}

pub fn short_run(n_paths: usize) -> SimParams {
    SimParams {
        horizon: 1.0,
        n_paths,
        seed: 1,
        ..Default::default()
    }
}
