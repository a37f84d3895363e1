//! Drift families and the scalar functions of the diverse market model.
//!
//! The log-capitalization of stock `i` follows
//!
//! ```text
//! d log X_i = -g(mu_i) dt + dW_i
//! ```
//!
//! where `mu_i = X_i / S` is the market weight and `g` is an admissible
//! function on `(0, 1 - delta)` that blows up at the right endpoint.

use std::fmt;
use std::sync::Arc;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Inputs are clamped this far inside `(0, 1 - delta)` before evaluation.
pub const EDGE_GUARD: f64 = 1e-12;

/// Minimum width of the linear bridge in the patched power law.
const BRIDGE_MIN_WIDTH: f64 = 0.05;

/// Which coefficient function weighs `g` in the criterion integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coefficient {
    A1,
    A2,
}

impl Coefficient {
    /// `A2(x) = 1/(x(1-x))`, `A1(x) = 2/(1 + 1/(n-1)) * A2(x)`.
    pub fn eval(self, n: usize, x: f64) -> f64 {
        let a2 = 1.0 / (x * (1.0 - x));
        match self {
            Coefficient::A2 => a2,
            Coefficient::A1 => stock_factor(n) * a2,
        }
    }
}

/// `2 / (1 + (n-1)^-1)`; equals 1 at `n = 2` and tends to 2.
fn stock_factor(n: usize) -> f64 {
    2.0 / (1.0 + 1.0 / (n as f64 - 1.0))
}

/// Caller-declared asymptotics for a custom drift. Reported back, never trusted
/// in place of sampling.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DeclaredLimits {
    pub blows_up_at_right: Option<bool>,
    /// Declared value of `lim x g(x)` as `x -> 0`.
    pub x_g_at_zero: Option<f64>,
}

/// A user supplied drift `g` on `(0, 1 - delta)`.
#[derive(Clone)]
pub struct CustomDrift {
    name: String,
    func: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    declared: Option<DeclaredLimits>,
}

impl CustomDrift {
    pub fn new(name: impl Into<String>, func: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            func: Arc::new(func),
            declared: None,
        }
    }

    pub fn with_declared_limits(mut self, limits: DeclaredLimits) -> Self {
        self.declared = Some(limits);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn declared_limits(&self) -> Option<&DeclaredLimits> {
        self.declared.as_ref()
    }
}

impl fmt::Debug for CustomDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomDrift")
            .field("name", &self.name)
            .field("declared", &self.declared)
            .finish_non_exhaustive()
    }
}

impl Serialize for CustomDrift {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("CustomDrift", 2)?;
        s.serialize_field("name", &self.name)?;
        s.serialize_field("declared_limits", &self.declared)?;
        s.end()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftFamily {
    /// `g(z) = p / (1 - delta - z)^q` on the whole interval.
    PowerLaw {
        p: f64,
        q: f64,
    },
    /// `-c/z` up to `x_switch`, the power law from `bridge_end` on, and a
    /// linear join in between.
    PatchedPowerLaw {
        p: f64,
        q: f64,
        c: f64,
        x_switch: f64,
        bridge_end: f64,
    },
    Custom(CustomDrift),
}

/// An admissible drift function together with its diversity threshold.
#[derive(Debug, Clone, Serialize)]
pub struct DriftSpec {
    delta: f64,
    family: DriftFamily,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 0.5 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "delta must lie in (0, 1/2), got {delta}"
        )))
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

impl DriftSpec {
    pub fn power_law(delta: f64, p: f64, q: f64) -> Result<Self> {
        check_delta(delta)?;
        check_positive("p", p)?;
        check_positive("q", q)?;
        Ok(Self {
            delta,
            family: DriftFamily::PowerLaw { p, q },
        })
    }

    pub fn patched_power_law(delta: f64, p: f64, q: f64, c: f64, x_switch: f64) -> Result<Self> {
        check_delta(delta)?;
        check_positive("p", p)?;
        check_positive("q", q)?;
        check_positive("c", c)?;
        let right = 1.0 - delta;
        if !(x_switch > 0.0 && x_switch < right) {
            return Err(Error::param(format!(
                "x_switch must lie in (0, {right}), got {x_switch}"
            )));
        }
        let mut bridge_end = (x_switch + BRIDGE_MIN_WIDTH).max(0.5);
        if bridge_end >= right {
            bridge_end = x_switch + 0.5 * (right - x_switch);
        }
        Ok(Self {
            delta,
            family: DriftFamily::PatchedPowerLaw {
                p,
                q,
                c,
                x_switch,
                bridge_end,
            },
        })
    }

    pub fn custom(delta: f64, drift: CustomDrift) -> Result<Self> {
        check_delta(delta)?;
        Ok(Self {
            delta,
            family: DriftFamily::Custom(drift),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn family(&self) -> &DriftFamily {
        &self.family
    }

    /// Right endpoint `1 - delta` of the domain of `g`.
    pub fn right_end(&self) -> f64 {
        1.0 - self.delta
    }

    /// Tail parameters `(p, q)` of the built-in power families.
    pub fn power_tail(&self) -> Option<(f64, f64)> {
        match self.family {
            DriftFamily::PowerLaw { p, q } | DriftFamily::PatchedPowerLaw { p, q, .. } => {
                Some((p, q))
            }
            DriftFamily::Custom(_) => None,
        }
    }

    /// Short identifier used in reports.
    pub fn label(&self) -> String {
        match &self.family {
            DriftFamily::PowerLaw { p, q } => format!("power_law(p={p}, q={q})"),
            DriftFamily::PatchedPowerLaw {
                p, q, c, x_switch, ..
            } => {
                format!("patched_power_law(p={p}, q={q}, c={c}, x_switch={x_switch})")
            }
            DriftFamily::Custom(c) => format!("custom({})", c.name),
        }
    }

    fn in_domain(&self, what: &'static str, x: f64) -> Result<()> {
        if x > 0.0 && x < self.right_end() {
            Ok(())
        } else {
            Err(Error::Domain {
                what,
                value: x,
                lo: 0.0,
                hi: self.right_end(),
            })
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        x.clamp(EDGE_GUARD, self.right_end() - EDGE_GUARD)
    }

    fn raw(&self, x: f64) -> f64 {
        let right = self.right_end();
        match &self.family {
            DriftFamily::PowerLaw { p, q } => p / (right - x).powf(*q),
            DriftFamily::PatchedPowerLaw {
                p,
                q,
                c,
                x_switch,
                bridge_end,
            } => {
                if x <= *x_switch {
                    -c / x
                } else if x >= *bridge_end {
                    p / (right - x).powf(*q)
                } else {
                    let lo = -c / x_switch;
                    let hi = p / (right - bridge_end).powf(*q);
                    let t = (x - x_switch) / (bridge_end - x_switch);
                    lo + t * (hi - lo)
                }
            }
            DriftFamily::Custom(c) => (c.func)(x),
        }
    }

    /// `g(x)` for `x` strictly inside `(0, 1 - delta)`.
    pub fn g(&self, x: f64) -> Result<f64> {
        self.in_domain("x", x)?;
        let v = self.raw(self.clamp(x));
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation(format!("g({x}) = {v}")))
        }
    }

    /// `g` with the input clamped into the guarded interval, whatever it is.
    /// Used by the simulator once a weight has crossed `1 - delta`.
    pub fn g_clamped(&self, x: f64) -> f64 {
        let x = if x.is_nan() { 0.5 } else { x };
        self.raw(self.clamp(x))
    }

    /// `psi(s) = s(-g(s) + 1/2) - s^2`.
    pub fn psi(&self, s: f64) -> Result<f64> {
        self.in_domain("s", s)?;
        Ok(psi_from_g(s, self.g(s)?))
    }

    pub fn psi_clamped(&self, s: f64) -> f64 {
        psi_from_g(s, self.g_clamped(s))
    }
}

#[inline]
pub(crate) fn psi_from_g(s: f64, g: f64) -> f64 {
    s * (-g + 0.5) - s * s
}

/// Endpoint values of `A1` and `A2` for `n` stocks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionConstants {
    pub n: usize,
    pub delta: f64,
    pub a1: f64,
    pub a2: f64,
    /// Lower limit of every criterion integral.
    pub x0: f64,
}

impl CriterionConstants {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param(format!(
                "need at least two stocks, got n = {n}"
            )));
        }
        check_delta(delta)?;
        let a2 = 1.0 / ((1.0 - delta) * delta);
        Ok(Self {
            n,
            delta,
            a1: stock_factor(n) * a2,
            a2,
            x0: 0.5,
        })
    }

    pub fn at_endpoint(&self, which: Coefficient) -> f64 {
        match which {
            Coefficient::A1 => self.a1,
            Coefficient::A2 => self.a2,
        }
    }

    /// Critical tail strength `1/A(1-delta)`, computed without dividing by `a`.
    pub fn critical_p(&self, which: Coefficient) -> f64 {
        let base = self.delta * (1.0 - self.delta);
        match which {
            Coefficient::A2 => base,
            Coefficient::A1 => base / stock_factor(self.n),
        }
    }
}

/// Outcome of an admissibility check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub continuous: bool,
    pub blows_up_at_right_endpoint: bool,
    /// `-inf < liminf x g(x) <= limsup x g(x) < 0` as `x -> 0`.
    pub boundedness_at_zero: bool,
    /// Estimated or exact `lim x g(x)` at zero when it exists.
    pub x_g_at_zero: Option<f64>,
    /// Set for custom drifts: the flags come from sampling, not proof.
    pub sampled: bool,
    pub notes: Vec<String>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.continuous && self.blows_up_at_right_endpoint
    }
}

pub fn check_admissible(spec: &DriftSpec) -> AdmissibilityReport {
    match spec.family() {
        DriftFamily::PowerLaw { .. } => AdmissibilityReport {
            continuous: true,
            blows_up_at_right_endpoint: true,
            boundedness_at_zero: false,
            x_g_at_zero: Some(0.0),
            sampled: false,
            notes: vec!["x g(x) -> 0 at zero".into()],
        },
        DriftFamily::PatchedPowerLaw { c, .. } => AdmissibilityReport {
            continuous: true,
            blows_up_at_right_endpoint: true,
            boundedness_at_zero: true,
            x_g_at_zero: Some(-c),
            sampled: false,
            notes: Vec::new(),
        },
        DriftFamily::Custom(_) => sample_admissibility(spec),
    }
}

fn sample_admissibility(spec: &DriftSpec) -> AdmissibilityReport {
    let right = spec.right_end();
    let mut notes = vec!["sampled, not proven".to_string()];

    // Right tail: x = 1 - delta - 2^-k.
    let tail: Vec<f64> = (4..=40).map(|k| spec.raw(right - 2f64.powi(-k))).collect();
    let finite = tail.iter().all(|v| v.is_finite());
    let window = &tail[20..];
    let increasing = window.windows(2).all(|w| w[1] > w[0]);
    let first_step = window[1] - window[0];
    let last_step = window[window.len() - 1] - window[window.len() - 2];
    let blows_up = finite && increasing && last_step >= 0.5 * first_step;
    if !blows_up {
        notes.push("g does not appear to grow without bound at 1 - delta".into());
    }

    // x g(x) at x = 2^-k.
    let near_zero: Vec<f64> = (20..=40)
        .map(|k| {
            let x = 2f64.powi(-k);
            x * spec.raw(x)
        })
        .collect();
    let hi = near_zero.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = near_zero.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = near_zero[near_zero.len() - 1];
    let bounded =
        lo.is_finite() && hi < 0.0 && lo > -1e12 && last.abs() >= 0.5 * near_zero[0].abs();
    let continuous = !has_jump(spec);
    if !continuous {
        notes.push("a jump was detected on the interior sampling grid".into());
    }

    AdmissibilityReport {
        continuous,
        blows_up_at_right_endpoint: blows_up,
        boundedness_at_zero: bounded,
        x_g_at_zero: bounded.then_some(last),
        sampled: true,
        notes,
    }
}

/// Looks for a jump of `g` by zooming in on the largest grid increment.
/// A continuous function's increment shrinks under bisection; a jump's does not.
pub fn has_jump(spec: &DriftSpec) -> bool {
    let right = spec.right_end();
    let (lo, hi) = (0.02 * right, 0.98 * right);
    let m = 2000;
    let h = (hi - lo) / m as f64;
    let mut best = (lo, lo + h);
    let mut best_diff = 0.0;
    for i in 0..m {
        let a = lo + i as f64 * h;
        let b = a + h;
        let d = (spec.g_clamped(b) - spec.g_clamped(a)).abs();
        if !d.is_finite() {
            return true;
        }
        if d > best_diff {
            best_diff = d;
            best = (a, b);
        }
    }
    let (mut a, mut b) = best;
    for _ in 0..40 {
        let mid = 0.5 * (a + b);
        let left = (spec.g_clamped(mid) - spec.g_clamped(a)).abs();
        let rightd = (spec.g_clamped(b) - spec.g_clamped(mid)).abs();
        if left >= rightd {
            b = mid;
        } else {
            a = mid;
        }
    }
    let ga = spec.g_clamped(a);
    let gb = spec.g_clamped(b);
    (gb - ga).abs() > 1e-6 * ga.abs().max(gb.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn power_law_values() {
        let s = DriftSpec::power_law(0.2, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.g(0.3).unwrap(), 2.0, epsilon = 1e-14);
        let s = DriftSpec::power_law(0.2, 2.0, 2.0).unwrap();
        assert_relative_eq!(s.g(0.6).unwrap(), 50.0, epsilon = 1e-10);
    }

    #[test]
    fn patched_branch_near_zero() {
        let s = DriftSpec::patched_power_law(0.2, 1.0, 1.0, 0.5, 0.1).unwrap();
        assert_relative_eq!(s.g(0.05).unwrap(), -10.0, epsilon = 1e-14);
    }

    #[test]
    fn domain_errors() {
        let s = DriftSpec::power_law(0.2, 1.0, 1.0).unwrap();
        assert!(matches!(s.g(0.0), Err(Error::Domain { .. })));
        assert!(matches!(s.g(0.8), Err(Error::Domain { .. })));
        assert!(matches!(s.g(-0.1), Err(Error::Domain { .. })));
        assert!(matches!(s.psi(0.85), Err(Error::Domain { .. })));
        assert!(s.g(f64::NAN).is_err());
    }

    #[test]
    fn custom_non_finite_is_evaluation_error() {
        let s = DriftSpec::custom(0.2, CustomDrift::new("nan", |_| f64::NAN)).unwrap();
        assert!(matches!(s.g(0.3), Err(Error::Evaluation(_))));
    }

    #[test]
    fn psi_examples() {
        let zero = DriftSpec::custom(0.2, CustomDrift::new("zero", |_| 0.0)).unwrap();
        assert_eq!(zero.psi(0.5).unwrap(), 0.0);
        let s = DriftSpec::power_law(0.2, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.psi(0.3).unwrap(), -0.54, epsilon = 1e-14);
    }

    #[test]
    fn psi_diverges_at_right_end() {
        for spec in [
            DriftSpec::power_law(0.2, 0.1, 0.5).unwrap(),
            DriftSpec::power_law(0.3, 1.0, 1.0).unwrap(),
            DriftSpec::patched_power_law(0.2, 0.3, 2.0, 0.5, 0.1).unwrap(),
        ] {
            let right = spec.right_end();
            let vals: Vec<f64> = (2..40)
                .map(|k| spec.psi(right - 2f64.powi(-k)).unwrap())
                .collect();
            assert!(vals.windows(2).all(|w| w[1] < w[0]));
            assert!(*vals.last().unwrap() < -1e4);
        }
    }

    #[test]
    fn constants() {
        let c = CriterionConstants::new(2, 0.2).unwrap();
        assert_relative_eq!(c.a2, 6.25, epsilon = 1e-12);
        assert_relative_eq!(c.a1, 6.25, epsilon = 1e-12);
        assert_eq!(c.x0, 0.5);
        let c = CriterionConstants::new(5, 0.2).unwrap();
        assert_relative_eq!(c.a2, 6.25, epsilon = 1e-12);
        assert_relative_eq!(c.a1, 10.0, epsilon = 1e-12);
        assert!(CriterionConstants::new(2, 0.6).is_err());
        assert!(CriterionConstants::new(1, 0.2).is_err());
        assert!(CriterionConstants::new(3, 0.0).is_err());
    }

    #[test]
    fn bad_parameters_rejected() {
        assert!(DriftSpec::power_law(0.5, 1.0, 1.0).is_err());
        assert!(DriftSpec::power_law(0.2, 0.0, 1.0).is_err());
        assert!(DriftSpec::power_law(0.2, 1.0, -1.0).is_err());
        assert!(DriftSpec::patched_power_law(0.2, 1.0, 1.0, 0.5, 0.8).is_err());
        assert!(DriftSpec::patched_power_law(0.2, 1.0, 1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn admissibility_of_builtins() {
        let r = check_admissible(&DriftSpec::power_law(0.2, 1.0, 1.0).unwrap());
        assert!(r.admissible());
        assert!(!r.boundedness_at_zero);
        assert!(!r.sampled);
        let r = check_admissible(&DriftSpec::patched_power_law(0.2, 1.0, 1.0, 0.5, 0.1).unwrap());
        assert!(r.admissible());
        assert!(r.boundedness_at_zero);
        assert_eq!(r.x_g_at_zero, Some(-0.5));
    }

    #[test]
    fn admissibility_of_custom() {
        let zero = DriftSpec::custom(0.2, CustomDrift::new("zero", |_| 0.0)).unwrap();
        let r = check_admissible(&zero);
        assert!(!r.blows_up_at_right_endpoint);
        assert!(!r.admissible());
        assert!(r.sampled);

        let like_patched = DriftSpec::custom(
            0.2,
            CustomDrift::new("log", |x: f64| -0.3 / x + (1.0 / (0.8 - x)).ln()),
        )
        .unwrap();
        let r = check_admissible(&like_patched);
        assert!(r.admissible(), "{r:?}");
        assert!(r.boundedness_at_zero);
        assert!((r.x_g_at_zero.unwrap() + 0.3).abs() < 1e-3);

        let bounded_above = DriftSpec::custom(
            0.2,
            CustomDrift::new("saturating", |x: f64| 1.0 - (0.8 - x)),
        )
        .unwrap();
        assert!(!check_admissible(&bounded_above).blows_up_at_right_endpoint);

        let jumpy = DriftSpec::custom(
            0.2,
            CustomDrift::new("step", |x: f64| if x < 0.4 { 0.0 } else { 1.0 / (0.8 - x) }),
        )
        .unwrap();
        assert!(!check_admissible(&jumpy).continuous);
    }

    #[test]
    fn builtins_have_no_detected_jump() {
        assert!(!has_jump(&DriftSpec::power_law(0.2, 1.0, 1.0).unwrap()));
        assert!(!has_jump(
            &DriftSpec::patched_power_law(0.2, 0.3, 1.5, 0.5, 0.1).unwrap()
        ));
    }

    #[test]
    fn narrow_bridge_stays_inside() {
        let s = DriftSpec::patched_power_law(0.4, 1.0, 1.0, 0.5, 0.58).unwrap();
        match s.family() {
            DriftFamily::PatchedPowerLaw { bridge_end, .. } => {
                assert!(*bridge_end > 0.58 && *bridge_end < 0.6)
            }
            _ => unreachable!(),
        }
    }
}
