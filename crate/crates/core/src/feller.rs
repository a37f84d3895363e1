//! Feller's boundary test for one-dimensional diffusions
//!
//! ```text
//! dX = b(X) dt + sigma(X) dB   on (alpha, beta),  X(0) = x0
//! ```
//!
//! with natural scale `phi(x) = int_{x0}^x exp(-int_{x0}^y 2b/sigma^2) dy`,
//! speed density `m = 1 / (phi' sigma^2)` and
//! `I_beta = int_{x0}^beta (phi(beta) - phi(x)) m(x) dx` (mirrored at `alpha`).
//! The process a.s. avoids `beta` iff `phi(beta) = inf`, or `phi(beta) < inf`
//! and `I_beta = inf`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::divergence::{
    classify_tail, distance_ladder, DivergenceStatus, DivergenceVerdict, EndpointKind,
};
use crate::error::{Error, Result};
use crate::model::DriftSpec;
use crate::quadrature::{cumulative, integrate, QuadratureConfig};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct FellerProblem {
    alpha: f64,
    beta: f64,
    x0: f64,
    drift: ScalarFn,
    diffusion_sq: ScalarFn,
    label: String,
}

impl fmt::Debug for FellerProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FellerProblem")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("x0", &self.x0)
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

impl FellerProblem {
    /// Validates `alpha < x0 < beta` and `sigma^2 > 0` on a sample of interior points.
    pub fn new(
        label: impl Into<String>,
        alpha: f64,
        beta: f64,
        x0: f64,
        drift: impl Fn(f64) -> f64 + Send + Sync + 'static,
        diffusion_sq: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if alpha.is_nan() || beta.is_nan() || !x0.is_finite() || !(alpha < x0 && x0 < beta) {
            return Err(Error::Parameter(format!(
                "need alpha < x0 < beta, got ({alpha}, {x0}, {beta})"
            )));
        }
        let prob = Self {
            alpha,
            beta,
            x0,
            drift: Arc::new(drift),
            diffusion_sq: Arc::new(diffusion_sq),
            label: label.into(),
        };
        for side in [Side::Left, Side::Right] {
            let (kind, d0) = prob.ladder_start(side);
            for d in distance_ladder(d0, kind) {
                let x = prob.point_at(side, d);
                for y in [x, 0.5 * (x + x0)] {
                    let s2 = (prob.diffusion_sq)(y);
                    if !(s2 > 0.0 && s2.is_finite()) {
                        return Err(Error::Precondition(format!(
                            "diffusion coefficient sigma^2({y}) = {s2} is not positive"
                        )));
                    }
                }
            }
        }
        Ok(prob)
    }

    /// Standard Brownian motion on `(alpha, beta)`.
    pub fn brownian(alpha: f64, beta: f64, x0: f64) -> Result<Self> {
        Self::new("brownian", alpha, beta, x0, |_| 0.0, |_| 1.0)
    }

    /// The first weight of a two-stock market on `(delta, 1 - delta)` from `x0 = 1/2`:
    /// `b0(x) = (1-x) psi(x) - x psi(1-x)`, `sigma(x) = sqrt(2) x (1-x)`.
    pub fn two_stock_weight(spec: &DriftSpec) -> Result<Self> {
        let delta = spec.delta();
        let s = spec.clone();
        let drift = move |x: f64| match (s.psi(x), s.psi(1.0 - x)) {
            (Ok(a), Ok(b)) => (1.0 - x) * a - x * b,
            _ => f64::NAN,
        };
        let diffusion_sq = |x: f64| 2.0 * (x * (1.0 - x)).powi(2);
        Self::new(
            format!("two_stock_weight[{}, delta={delta}]", spec.label()),
            delta,
            1.0 - delta,
            0.5,
            drift,
            diffusion_sq,
        )
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn label(&self) -> &str {
        &self.label
    }

    fn endpoint(&self, side: Side) -> f64 {
        match side {
            Side::Left => self.alpha,
            Side::Right => self.beta,
        }
    }

    fn ladder_start(&self, side: Side) -> (EndpointKind, f64) {
        let e = self.endpoint(side);
        if e.is_finite() {
            (EndpointKind::Finite, (e - self.x0).abs() / 4.0)
        } else {
            (EndpointKind::Infinite, 1.0 + self.x0.abs())
        }
    }

    /// Point at distance `d` from the endpoint (finite) or from `x0` (infinite).
    fn point_at(&self, side: Side, d: f64) -> f64 {
        let e = self.endpoint(side);
        match (side, e.is_finite()) {
            (Side::Right, true) => e - d,
            (Side::Left, true) => e + d,
            (Side::Right, false) => self.x0 + d,
            (Side::Left, false) => self.x0 - d,
        }
    }

    fn in_domain(&self, x: f64) -> Result<()> {
        if x > self.alpha && x < self.beta {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "x",
                value: x,
                lo: self.alpha,
                hi: self.beta,
            })
        }
    }

    /// `-2 b(z) / sigma^2(z)`.
    fn log_scale_rate(&self, z: f64) -> f64 {
        -2.0 * (self.drift)(z) / (self.diffusion_sq)(z)
    }

    /// `log phi'(x) = -int_{x0}^x 2b/sigma^2`.
    pub fn log_scale_derivative(&self, x: f64) -> Result<f64> {
        self.in_domain(x)?;
        Ok(integrate(
            |z| self.log_scale_rate(z),
            self.x0,
            x,
            &QuadratureConfig::default(),
        )?
        .value)
    }
}

/// Natural scale `phi(x)` by nested adaptive quadrature; `phi(x0) = 0`.
pub fn scale_function(prob: &FellerProblem, x: f64) -> Result<f64> {
    prob.in_domain(x)?;
    let cfg = QuadratureConfig::default();
    let inner_err = RefCell::new(None);
    let outer = integrate(
        |y| match integrate(|z| prob.log_scale_rate(z), prob.x0, y, &cfg) {
            Ok(e) => e.value.exp(),
            Err(err) => {
                inner_err.borrow_mut().get_or_insert(err);
                f64::NAN
            }
        },
        prob.x0,
        x,
        &cfg,
    );
    if let Some(err) = inner_err.into_inner() {
        return Err(err);
    }
    Ok(outer?.value)
}

/// Speed density `m(x) = 1 / (phi'(x) sigma^2(x))`, with `phi'` taken directly.
pub fn speed_density(prob: &FellerProblem, x: f64) -> Result<f64> {
    let log_dphi = prob.log_scale_derivative(x)?;
    Ok((-log_dphi).exp() / (prob.diffusion_sq)(x))
}

/// Finite, infinite or undecided value of an improper integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    PosInfinity,
    NegInfinity,
    Unknown,
}

impl ExtendedReal {
    pub fn is_infinite(self) -> bool {
        matches!(self, ExtendedReal::PosInfinity | ExtendedReal::NegInfinity)
    }
}

impl Serialize for ExtendedReal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtendedReal::Finite(v) => s.serialize_f64(*v),
            ExtendedReal::PosInfinity => s.serialize_str("+inf"),
            ExtendedReal::NegInfinity => s.serialize_str("-inf"),
            ExtendedReal::Unknown => s.serialize_none(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Finiteness {
    Finite,
    Infinite,
    Unknown,
}

impl From<DivergenceStatus> for Finiteness {
    fn from(s: DivergenceStatus) -> Self {
        match s {
            DivergenceStatus::Divergent => Finiteness::Infinite,
            DivergenceStatus::Convergent => Finiteness::Finite,
            DivergenceStatus::Inconclusive => Finiteness::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointVerdict {
    NoHitAS,
    HitsWithPositiveProb,
    Inconclusive,
}

/// The two clauses of Feller's test. `integral` is only consulted when the
/// scale is finite at the endpoint.
pub fn endpoint_verdict(phi: Finiteness, integral: Finiteness) -> EndpointVerdict {
    match (phi, integral) {
        (Finiteness::Infinite, _) => EndpointVerdict::NoHitAS,
        (Finiteness::Finite, Finiteness::Infinite) => EndpointVerdict::NoHitAS,
        (Finiteness::Finite, Finiteness::Finite) => EndpointVerdict::HitsWithPositiveProb,
        _ => EndpointVerdict::Inconclusive,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointReport {
    pub side: Side,
    pub endpoint: f64,
    /// `phi` at the endpoint.
    pub phi: ExtendedReal,
    /// `I_alpha` or `I_beta`; approximate when finite.
    pub integral: ExtendedReal,
    pub verdict: EndpointVerdict,
    pub phi_divergence: DivergenceVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integral_divergence: Option<DivergenceVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FellerReport {
    pub problem: String,
    pub x0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<EndpointReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<EndpointReport>,
}

fn inconclusive(side: Side, endpoint: f64, why: String) -> EndpointReport {
    EndpointReport {
        side,
        endpoint,
        phi: ExtendedReal::Unknown,
        integral: ExtendedReal::Unknown,
        verdict: EndpointVerdict::Inconclusive,
        phi_divergence: DivergenceVerdict::abstain(why.clone()),
        integral_divergence: None,
        diagnostic: Some(why),
    }
}

/// Integral of a fitted power tail beyond the last ladder point.
fn tail_beyond(h_last: f64, d_last: f64, r: f64, kind: EndpointKind) -> f64 {
    match kind {
        EndpointKind::Finite => h_last * d_last / (1.0 - r),
        EndpointKind::Infinite => h_last * d_last / (r - 1.0),
    }
}

/// Classifies one endpoint. Quadrature trouble becomes an inconclusive
/// verdict with a diagnostic; only a degenerate diffusion coefficient is an error.
pub fn classify_endpoint(prob: &FellerProblem, side: Side) -> Result<EndpointReport> {
    let endpoint = prob.endpoint(side);
    let (kind, d0) = prob.ladder_start(side);
    let dists = distance_ladder(d0, kind);
    let mut nodes = Vec::with_capacity(dists.len() + 1);
    nodes.push(prob.x0);
    nodes.extend(dists.iter().map(|&d| prob.point_at(side, d)));

    let mut sigma_sq = Vec::with_capacity(nodes.len());
    for &x in &nodes {
        let s2 = (prob.diffusion_sq)(x);
        if s2.is_nan() || s2 <= 0.0 {
            return Err(Error::Precondition(format!(
                "diffusion coefficient sigma^2({x}) = {s2} is not positive"
            )));
        }
        sigma_sq.push(s2);
    }

    let cfg = QuadratureConfig::default();
    let log_dphi = match cumulative(|z| prob.log_scale_rate(z), &nodes, &cfg) {
        Ok(v) => v,
        Err(e) => {
            return Ok(inconclusive(
                side,
                endpoint,
                format!("scale quadrature: {e}"),
            ))
        }
    };

    let phi_div = classify_tail(&dists, &log_dphi[1..], kind);
    let sign = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let infinite_phi = match side {
        Side::Right => ExtendedReal::PosInfinity,
        Side::Left => ExtendedReal::NegInfinity,
    };

    match phi_div.status {
        DivergenceStatus::Divergent => {
            return Ok(EndpointReport {
                side,
                endpoint,
                phi: infinite_phi,
                integral: ExtendedReal::Unknown,
                verdict: endpoint_verdict(Finiteness::Infinite, Finiteness::Unknown),
                phi_divergence: phi_div,
                integral_divergence: None,
                diagnostic: None,
            })
        }
        DivergenceStatus::Inconclusive => {
            return Ok(EndpointReport {
                side,
                endpoint,
                phi: ExtendedReal::Unknown,
                integral: ExtendedReal::Unknown,
                verdict: EndpointVerdict::Inconclusive,
                diagnostic: phi_div.note.clone(),
                phi_divergence: phi_div,
                integral_divergence: None,
            })
        }
        DivergenceStatus::Convergent => {}
    }

    // |phi| increments between consecutive nodes, each with the inner
    // integral restarted at the left node of its segment.
    let mut pieces = Vec::with_capacity(nodes.len() - 1);
    for (j, w) in nodes.windows(2).enumerate() {
        let base = log_dphi[j];
        let start = w[0];
        let inner_err = RefCell::new(None);
        let seg = integrate(
            |y| match integrate(|z| prob.log_scale_rate(z), start, y, &cfg) {
                Ok(e) => (base + e.value).exp(),
                Err(err) => {
                    inner_err.borrow_mut().get_or_insert(err);
                    f64::NAN
                }
            },
            w[0],
            w[1],
            &cfg,
        );
        let err = inner_err.into_inner();
        match (seg, err) {
            (Ok(e), None) => pieces.push(e.value.abs()),
            (Err(e), _) | (_, Some(e)) => {
                return Ok(inconclusive(
                    side,
                    endpoint,
                    format!("scale quadrature: {e}"),
                ))
            }
        }
    }

    let r_phi = phi_div.exponent.unwrap_or(0.0);
    let last = nodes.len() - 1;
    let tail = tail_beyond(log_dphi[last].exp(), dists[dists.len() - 1], r_phi, kind);

    // remaining[j] = |phi(endpoint) - phi(nodes[j])|
    let mut remaining = vec![0.0; nodes.len()];
    remaining[last] = tail;
    for j in (0..last).rev() {
        remaining[j] = remaining[j + 1] + pieces[j];
    }
    let phi_end = sign * remaining[0];

    let log_h: Vec<f64> = (0..nodes.len())
        .map(|j| remaining[j].ln() - log_dphi[j] - sigma_sq[j].ln())
        .collect();
    let int_div = classify_tail(&dists, &log_h[1..], kind);

    let integral = match int_div.status {
        DivergenceStatus::Divergent => ExtendedReal::PosInfinity,
        DivergenceStatus::Inconclusive => ExtendedReal::Unknown,
        DivergenceStatus::Convergent => ExtendedReal::Finite(approx_integral(
            &nodes, &dists, &log_h, &int_div, prob.x0, kind,
        )),
    };

    Ok(EndpointReport {
        side,
        endpoint,
        phi: ExtendedReal::Finite(phi_end),
        integral,
        verdict: endpoint_verdict(Finiteness::Finite, int_div.status.into()),
        phi_divergence: phi_div,
        integral_divergence: Some(int_div),
        diagnostic: None,
    })
}

/// Trapezoid estimate of `int h` over the ladder in the log-distance variable,
/// plus the first segment from `x0` and the fitted tail.
fn approx_integral(
    nodes: &[f64],
    dists: &[f64],
    log_h: &[f64],
    fit: &DivergenceVerdict,
    x0: f64,
    kind: EndpointKind,
) -> f64 {
    let h: Vec<f64> = log_h.iter().map(|v| v.exp()).collect();
    let mut total = 0.5 * (h[0] + h[1]) * (nodes[1] - x0).abs();
    for k in 1..dists.len() {
        let (d1, d2) = (dists[k - 1], dists[k]);
        let du = (d2.ln() - d1.ln()).abs();
        total += 0.5 * (h[k] * d1 + h[k + 1] * d2) * du;
    }
    let r = fit.exponent.unwrap_or(0.0);
    total + tail_beyond(h[h.len() - 1], dists[dists.len() - 1], r, kind)
}

/// Both endpoints, classified in parallel.
pub fn classify(prob: &FellerProblem) -> Result<FellerReport> {
    let (left, right) = rayon::join(
        || classify_endpoint(prob, Side::Left),
        || classify_endpoint(prob, Side::Right),
    );
    Ok(FellerReport {
        problem: prob.label.clone(),
        x0: prob.x0,
        alpha: Some(left?),
        beta: Some(right?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn driftless_scale_is_identity() {
        let p = FellerProblem::brownian(-1.0, 1.0, 0.0).unwrap();
        for x in [-0.5, 0.3, 0.9] {
            assert_abs_diff_eq!(scale_function(&p, x).unwrap(), x, epsilon = 1e-10);
        }
        assert_eq!(scale_function(&p, 0.0).unwrap(), 0.0);
        assert!(matches!(scale_function(&p, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(
            scale_function(&p, -1.5),
            Err(Error::Domain { .. })
        ));
    }

    #[test]
    fn unit_drift_scale_and_speed() {
        let p = FellerProblem::new("unit", -1.0, 1.0, 0.0, |_| 1.0, |_| 1.0).unwrap();
        // Frozen from the antiderivative of exp(-2y): (1 - e^-1)/2.
        assert_abs_diff_eq!(
            scale_function(&p, 0.5).unwrap(),
            0.316_060_279_414_278_8,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(speed_density(&p, 0.0).unwrap(), 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(
            speed_density(&p, 0.5).unwrap(),
            std::f64::consts::E,
            epsilon = 1e-9
        );
        let bm = FellerProblem::brownian(0.0, 1.0, 0.5).unwrap();
        assert_abs_diff_eq!(speed_density(&bm, 0.2).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scale_is_strictly_increasing() {
        let spec = DriftSpec::power_law(0.2, 0.25, 1.0).unwrap();
        let p = FellerProblem::two_stock_weight(&spec).unwrap();
        let xs: Vec<f64> = (1..30).map(|k| 0.2 + 0.6 * k as f64 / 30.0).collect();
        let phis: Vec<f64> = xs.iter().map(|&x| scale_function(&p, x).unwrap()).collect();
        assert!(phis.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(scale_function(&p, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn truth_table() {
        use EndpointVerdict::*;
        use Finiteness::*;
        for i in [Finite, Infinite, Unknown] {
            assert_eq!(endpoint_verdict(Infinite, i), NoHitAS);
            assert_eq!(endpoint_verdict(Unknown, i), Inconclusive);
        }
        assert_eq!(endpoint_verdict(Finite, Infinite), NoHitAS);
        assert_eq!(endpoint_verdict(Finite, Finite), HitsWithPositiveProb);
        assert_eq!(endpoint_verdict(Finite, Unknown), Inconclusive);
    }

    #[test]
    fn brownian_hits_both_ends() {
        let p = FellerProblem::brownian(0.0, 1.0, 0.5).unwrap();
        let r = classify(&p).unwrap();
        let (a, b) = (r.alpha.unwrap(), r.beta.unwrap());
        assert_eq!(a.verdict, EndpointVerdict::HitsWithPositiveProb);
        assert_eq!(b.verdict, EndpointVerdict::HitsWithPositiveProb);
        match (a.phi, b.phi) {
            (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => {
                assert_abs_diff_eq!(l, -0.5, epsilon = 1e-9);
                assert_abs_diff_eq!(r, 0.5, epsilon = 1e-9);
            }
            other => panic!("{other:?}"),
        }
        // I_beta = int_{1/2}^1 (1 - x) dx = 1/8
        match b.integral {
            ExtendedReal::Finite(v) => assert!((v - 0.125).abs() < 5e-3, "{v}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bessel_like_drift_avoids_zero() {
        let p =
            FellerProblem::new("bessel3", 0.0, f64::INFINITY, 1.0, |x| 1.0 / x, |_| 1.0).unwrap();
        let left = classify_endpoint(&p, Side::Left).unwrap();
        assert_eq!(left.verdict, EndpointVerdict::NoHitAS);
        assert_eq!(left.phi, ExtendedReal::NegInfinity);
        let right = classify_endpoint(&p, Side::Right).unwrap();
        assert_eq!(right.verdict, EndpointVerdict::NoHitAS);
    }

    #[test]
    fn degenerate_diffusion_rejected() {
        let r = FellerProblem::new("flat", 0.0, 1.0, 0.5, |_| 0.0, |x| x - 0.3);
        assert!(matches!(r, Err(Error::Precondition(_))));
        let r = FellerProblem::new("bad", 0.0, 1.0, 1.5, |_| 0.0, |_| 1.0);
        assert!(matches!(r, Err(Error::Parameter(_))));
    }

    #[test]
    fn two_stock_weight_verdicts() {
        let diverse = DriftSpec::power_law(0.2, 0.25, 1.0).unwrap();
        let r = classify(&FellerProblem::two_stock_weight(&diverse).unwrap()).unwrap();
        assert_eq!(r.beta.as_ref().unwrap().verdict, EndpointVerdict::NoHitAS);
        assert_eq!(r.alpha.as_ref().unwrap().verdict, EndpointVerdict::NoHitAS);
        let fit = r.beta.unwrap().phi_divergence.exponent.unwrap();
        assert!((fit - 1.5625).abs() < 0.02, "{fit}");

        let not_diverse = DriftSpec::power_law(0.2, 0.1, 1.0).unwrap();
        let r = classify_endpoint(
            &FellerProblem::two_stock_weight(&not_diverse).unwrap(),
            Side::Right,
        )
        .unwrap();
        assert_eq!(r.verdict, EndpointVerdict::HitsWithPositiveProb);
    }
}
