//! Diverse market models: drift families, analytic diversity criteria,
//! Feller boundary classification and Monte Carlo validation.

pub mod classify;
pub mod criteria;
pub mod divergence;
pub mod error;
pub mod export;
pub mod feller;
pub mod model;
pub mod noise;
pub mod quadrature;
pub mod simulate;

pub use classify::{
    classify_diversity, golden_decision_table, DiversityStatus, DiversityVerdict, Rule,
};
pub use criteria::{criterion_integral, integral_of_g, Route};
pub use divergence::{DivergenceStatus, DivergenceVerdict};
pub use error::{Error, Result};
pub use feller::{
    classify_endpoint, scale_function, speed_density, EndpointVerdict, FellerProblem, FellerReport,
    Side,
};
pub use model::{
    check_admissible, Coefficient, CriterionConstants, CustomDrift, DriftFamily, DriftSpec,
};
pub use simulate::{
    monte_carlo_hitting, run_path, MarketConfig, MonteCarloReport, PathResult, Scheme, SimParams,
};
