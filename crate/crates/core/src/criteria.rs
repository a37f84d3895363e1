//! The integral tests that decide diversity:
//!
//! ```text
//! int_{x0}^{1-delta} exp( int_{x0}^y A(z) g(z) dz ) dy      (criterion integral)
//! int_{x0}^{1-delta} exp( alpha int_{x0}^y g(z) dz ) dy     (constant weight)
//! int_{x0}^{1-delta} g(z) dz
//! ```
//!
//! Built-in power families have closed forms; everything else goes through
//! the ladder quadrature and tail fit in [`crate::divergence`].

use serde::Serialize;

use crate::divergence::{classify_tail, distance_ladder, DivergenceVerdict, EndpointKind};
use crate::error::{Error, Result};
use crate::model::{Coefficient, CriterionConstants, DriftSpec};
use crate::quadrature::{cumulative, QuadratureConfig};

/// Relative slack when comparing a tail strength against its critical value,
/// so that thresholds computed along different float paths still compare equal.
pub const THRESHOLD_RTOL: f64 = 1e-12;

/// `value >= threshold`, counting values within rounding of the threshold as equal.
pub fn at_least(value: f64, threshold: f64) -> bool {
    value >= threshold * (1.0 - THRESHOLD_RTOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum Route {
    /// Closed form when available, tail fit otherwise.
    #[default]
    Auto,
    TailFit,
}

fn check_x0(spec: &DriftSpec, x0: f64) -> Result<()> {
    if x0 > 0.0 && x0 < spec.right_end() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "x0",
            value: x0,
            lo: 0.0,
            hi: spec.right_end(),
        })
    }
}

/// Ladder nodes `x0, 1-delta-eps_0, ..., 1-delta-eps_K` with `eps_0 = (1-delta-x0)/4`.
pub fn ladder_nodes(spec: &DriftSpec, x0: f64) -> (Vec<f64>, Vec<f64>) {
    let right = spec.right_end();
    let eps = distance_ladder((right - x0) / 4.0, EndpointKind::Finite);
    let mut nodes = Vec::with_capacity(eps.len() + 1);
    nodes.push(x0);
    nodes.extend(eps.iter().map(|e| right - e));
    (nodes, eps)
}

/// `int_{nodes[0]}^{nodes[i]} weight(z) g(z) dz` for every node.
pub fn inner_integral(
    spec: &DriftSpec,
    weight: impl Fn(f64) -> f64,
    nodes: &[f64],
) -> Result<Vec<f64>> {
    let cfg = QuadratureConfig::default();
    cumulative(|z| weight(z) * spec.g(z).unwrap_or(f64::NAN), nodes, &cfg)
}

/// Tail fit of `exp(int weight * g)` at `1 - delta`.
fn exp_inner_tail(spec: &DriftSpec, weight: impl Fn(f64) -> f64, x0: f64) -> DivergenceVerdict {
    let (nodes, eps) = ladder_nodes(spec, x0);
    match inner_integral(spec, weight, &nodes) {
        Ok(f) => classify_tail(&eps, &f[1..], EndpointKind::Finite),
        Err(e) => DivergenceVerdict::abstain(format!("inner quadrature failed: {e}")),
    }
}

/// Closed-form divergence of `int exp(alpha int g)` for a power tail with strength `alpha`.
/// `critical` is `1/alpha` evaluated without division when the caller has it.
fn power_exp_closed_form(p: f64, q: f64, alpha: f64, critical: f64) -> DivergenceVerdict {
    if q > 1.0 {
        DivergenceVerdict::closed_form(true, None)
    } else if q < 1.0 {
        // int g converges, so the outer integrand is bounded.
        DivergenceVerdict::closed_form(false, Some(0.0))
    } else {
        DivergenceVerdict::closed_form(at_least(p, critical), Some(alpha * p))
    }
}

/// Divergence of `int_{x0}^{1-delta} exp(int_{x0}^y A(z) g(z) dz) dy`.
pub fn criterion_integral(
    spec: &DriftSpec,
    which: Coefficient,
    n: usize,
    x0: f64,
    route: Route,
) -> Result<DivergenceVerdict> {
    let constants = CriterionConstants::new(n, spec.delta())?;
    check_x0(spec, x0)?;
    match (route, spec.power_tail()) {
        (Route::Auto, Some((p, q))) => Ok(power_exp_closed_form(
            p,
            q,
            constants.at_endpoint(which),
            constants.critical_p(which),
        )),
        _ => Ok(exp_inner_tail(spec, |z| which.eval(n, z), x0)),
    }
}

/// Divergence of `int_{x0}^{1-delta} exp(alpha int_{x0}^y g(z) dz) dy` for a constant `alpha > 0`.
pub fn constant_weight_integral(
    spec: &DriftSpec,
    alpha: f64,
    x0: f64,
    route: Route,
) -> Result<DivergenceVerdict> {
    check_x0(spec, x0)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Parameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    match (route, spec.power_tail()) {
        (Route::Auto, Some((p, q))) => Ok(power_exp_closed_form(p, q, alpha, 1.0 / alpha)),
        _ => Ok(exp_inner_tail(spec, |_| alpha, x0)),
    }
}

/// Divergence of `int_{x0}^{1-delta} g(z) dz`.
pub fn integral_of_g(spec: &DriftSpec, x0: f64, route: Route) -> Result<DivergenceVerdict> {
    check_x0(spec, x0)?;
    match (route, spec.power_tail()) {
        (Route::Auto, Some((_, q))) => {
            Ok(DivergenceVerdict::closed_form(at_least(q, 1.0), Some(q)))
        }
        _ => {
            let (nodes, eps) = ladder_nodes(spec, x0);
            let logs: Vec<f64> = nodes[1..]
                .iter()
                .map(|&y| match spec.g(y) {
                    Ok(v) if v > 0.0 => v.ln(),
                    Ok(_) => f64::NEG_INFINITY,
                    Err(_) => f64::NAN,
                })
                .collect();
            Ok(classify_tail(&eps, &logs, EndpointKind::Finite))
        }
    }
}
