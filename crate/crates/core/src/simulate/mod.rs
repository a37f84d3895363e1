//! Monte Carlo simulation of the market model.
//!
//! The primary scheme integrates log-capitalizations and derives weights; the
//! weight scheme integrates the weight system directly and exists to check the
//! two against each other on shared noise.

mod checks;
mod montecarlo;
mod path;
mod state;

pub use checks::{
    comparison_lemma_check, comparison_tolerance, consistency_gap, ito_consistency_check,
    ito_consistency_check_with, ComparisonReport, ConsistencyLevel, ItoConsistencyReport,
};
pub use montecarlo::{
    aggregate, monte_carlo_hitting, simulate_paths, wilson_interval, ModelEcho, MonteCarloReport,
    DISCRETIZATION_NOTE, EVIDENCE_NOTE,
};
pub use path::{
    run_path, run_path_with, MarketConfig, PathResult, Scheme, SimParams, TrajectoryPoint,
};
pub use state::{
    diffusion_column_sums, step_logcap, step_weights, step_weights_in_place, weight_drift,
    MarketState, WEIGHT_FLOOR,
};
