//! Deciding whether an improper integral diverges at a singular endpoint.
//!
//! Finite sampling cannot decide divergence, so the numeric route fits the
//! local power law `h(y) ~ C * d(y)^(-r)` of the integrand against the
//! distance `d` to the endpoint on a geometric ladder, and abstains when `r`
//! is too close to the critical exponent 1.

use serde::Serialize;

/// Half-width of the abstention band around the critical exponent.
pub const EXPONENT_BAND: f64 = 0.05;
/// Number of halvings in the distance ladder.
pub const LADDER_STEPS: usize = 24;
/// Log-integrand values at or above this count as overflow.
pub const LOG_SATURATION: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DivergenceStatus {
    Divergent,
    Convergent,
    Inconclusive,
}

impl DivergenceStatus {
    pub fn is_divergent(self) -> bool {
        self == DivergenceStatus::Divergent
    }

    pub fn is_convergent(self) -> bool {
        self == DivergenceStatus::Convergent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    ClosedForm,
    TailFit,
}

/// Whether the singular endpoint is a finite point or infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EndpointKind {
    Finite,
    Infinite,
}

/// Diagnostics of a tail fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    /// Fitted `r` in `h ~ d^(-r)`.
    pub exponent: f64,
    /// Two standard errors of the fitted exponent.
    pub band: f64,
    pub distances: Vec<f64>,
    pub log_values: Vec<f64>,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceVerdict {
    pub status: DivergenceStatus,
    pub method: Method,
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<TailFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl DivergenceVerdict {
    pub fn closed_form(divergent: bool, exponent: Option<f64>) -> Self {
        Self {
            status: if divergent {
                DivergenceStatus::Divergent
            } else {
                DivergenceStatus::Convergent
            },
            method: Method::ClosedForm,
            exponent,
            fit: None,
            note: None,
        }
    }

    pub fn abstain(note: impl Into<String>) -> Self {
        Self {
            status: DivergenceStatus::Inconclusive,
            method: Method::TailFit,
            exponent: None,
            fit: None,
            note: Some(note.into()),
        }
    }
}

/// Distances `d_k = d0 * 2^-k` (finite endpoint) or `d0 * 2^k` (infinity),
/// `k = 0..=LADDER_STEPS`.
pub fn distance_ladder(d0: f64, kind: EndpointKind) -> Vec<f64> {
    (0..=LADDER_STEPS as i32)
        .map(|k| match kind {
            EndpointKind::Finite => d0 * 2f64.powi(-k),
            EndpointKind::Infinite => d0 * 2f64.powi(k),
        })
        .collect()
}

/// Least-squares slope of `ys` against `xs` with its standard error.
fn slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum();
    let se = if xs.len() > 2 {
        (sse / (m - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (b, se)
}

/// Classifies `int h` near an endpoint from `log h` sampled on a distance
/// ladder ordered towards the endpoint. The fit uses the closer half.
pub fn classify_tail(
    distances: &[f64],
    log_values: &[f64],
    kind: EndpointKind,
) -> DivergenceVerdict {
    assert_eq!(distances.len(), log_values.len());
    if log_values.iter().any(|v| v.is_nan()) {
        return DivergenceVerdict::abstain("integrand evaluation produced NaN");
    }
    let saturated = log_values.iter().any(|&v| v >= LOG_SATURATION);
    let start = distances.len() / 2;
    let tail_d = &distances[start..];
    let tail_v = &log_values[start..];

    let mut fit = TailFit {
        exponent: f64::NAN,
        band: f64::NAN,
        distances: distances.to_vec(),
        log_values: log_values.to_vec(),
        saturated,
    };

    if saturated {
        // exp(700) over any nonzero width dwarfs every representable total.
        return DivergenceVerdict {
            status: DivergenceStatus::Divergent,
            method: Method::TailFit,
            exponent: None,
            fit: Some(fit),
            note: Some("log-integrand saturated".into()),
        };
    }
    if tail_v.iter().all(|v| *v == f64::NEG_INFINITY) {
        return DivergenceVerdict {
            status: DivergenceStatus::Convergent,
            method: Method::TailFit,
            exponent: None,
            fit: Some(fit),
            note: Some("integrand vanishes near the endpoint".into()),
        };
    }
    if tail_v.iter().any(|v| !v.is_finite()) {
        return DivergenceVerdict::abstain("integrand vanishes on part of the tail");
    }

    let xs: Vec<f64> = tail_d.iter().map(|d| d.ln()).collect();
    let (s, se) = slope(&xs, tail_v);
    let r = -s;
    fit.exponent = r;
    fit.band = 2.0 * se;

    let status = if (r - 1.0).abs() < EXPONENT_BAND {
        DivergenceStatus::Inconclusive
    } else {
        let beyond = r > 1.0;
        match (kind, beyond) {
            (EndpointKind::Finite, true) | (EndpointKind::Infinite, false) => {
                DivergenceStatus::Divergent
            }
            _ => DivergenceStatus::Convergent,
        }
    };
    DivergenceVerdict {
        status,
        method: Method::TailFit,
        exponent: Some(r),
        note: (status == DivergenceStatus::Inconclusive)
            .then(|| format!("fitted exponent {r:.4} is within {EXPONENT_BAND} of 1")),
        fit: Some(fit),
    }
}

/// Tail of `int_0^{d_min} C d^(-r) dd` for a fitted power law with `r < 1`,
/// given the integrand value `h_min` at `d_min`.
pub fn power_tail_mass(h_min: f64, d_min: f64, r: f64) -> f64 {
    h_min * d_min / (1.0 - r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(r: f64) -> DivergenceVerdict {
        let d = distance_ladder(0.075, EndpointKind::Finite);
        let v: Vec<f64> = d.iter().map(|x| -r * x.ln() + 0.3).collect();
        classify_tail(&d, &v, EndpointKind::Finite)
    }

    #[test]
    fn synthetic_power_laws() {
        for (r, want) in [
            (0.5, DivergenceStatus::Convergent),
            (0.9, DivergenceStatus::Convergent),
            (0.96, DivergenceStatus::Inconclusive),
            (1.0, DivergenceStatus::Inconclusive),
            (1.04, DivergenceStatus::Inconclusive),
            (1.1, DivergenceStatus::Divergent),
            (2.0, DivergenceStatus::Divergent),
            (-1.0, DivergenceStatus::Convergent),
        ] {
            let v = synthetic(r);
            assert_eq!(v.status, want, "r = {r}");
            assert!((v.exponent.unwrap() - r).abs() < 1e-9);
        }
    }

    #[test]
    fn infinite_endpoint_flips_criterion() {
        let d = distance_ladder(1.0, EndpointKind::Infinite);
        let decaying: Vec<f64> = d.iter().map(|x| -2.0 * x.ln()).collect();
        assert_eq!(
            classify_tail(&d, &decaying, EndpointKind::Infinite).status,
            DivergenceStatus::Convergent
        );
        let growing: Vec<f64> = d.iter().map(|x| x.ln()).collect();
        assert_eq!(
            classify_tail(&d, &growing, EndpointKind::Infinite).status,
            DivergenceStatus::Divergent
        );
    }

    #[test]
    fn saturation_is_divergence() {
        let d = distance_ladder(0.1, EndpointKind::Finite);
        let v: Vec<f64> = d.iter().map(|x| 1.0 / x).collect();
        let verdict = classify_tail(&d, &v, EndpointKind::Finite);
        assert_eq!(verdict.status, DivergenceStatus::Divergent);
        assert!(verdict.fit.unwrap().saturated);
    }

    #[test]
    fn vanishing_and_nan() {
        let d = distance_ladder(0.1, EndpointKind::Finite);
        let v = vec![f64::NEG_INFINITY; d.len()];
        assert_eq!(
            classify_tail(&d, &v, EndpointKind::Finite).status,
            DivergenceStatus::Convergent
        );
        let mut v: Vec<f64> = d.iter().map(|x| x.ln()).collect();
        v[3] = f64::NAN;
        assert_eq!(
            classify_tail(&d, &v, EndpointKind::Finite).status,
            DivergenceStatus::Inconclusive
        );
    }

    #[test]
    fn tail_mass_of_power_law() {
        // int_0^0.01 d^-0.5 = 2 * 0.1
        let h = 0.01f64.powf(-0.5);
        assert!((power_tail_mass(h, 0.01, 0.5) - 0.2).abs() < 1e-14);
    }
}
