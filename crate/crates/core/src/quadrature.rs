//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Intervals are bisected in order of largest error estimate until the total
//! estimated error drops below `max(abs_tol, rel_tol * |I|)`. Singular
//! endpoints are not handled here; callers keep the integrand smooth on each
//! interval they pass in.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Gauss weights for the nodes `XGK[1], XGK[3], XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_intervals: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// One 15-point Kronrod panel: `(integral, error estimate)`.
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv = [0.0f64; 14];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    if !res_k.is_finite() {
        return Err(Error::Quadrature {
            a,
            b,
            reason: "integrand is not finite".into(),
        });
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let res_asc = res_asc * half.abs();
    let res_abs = res_abs * half.abs();
    let value = res_k * half;
    let mut err = ((res_k - res_g) * half).abs();
    // QUADPACK error rescaling.
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok((value, err))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]`. Reversed limits flip the sign.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature {
            a,
            b,
            reason: "limits must be finite".into(),
        });
    }
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    if b < a {
        let e = integrate(f, b, a, cfg)?;
        return Ok(Estimate {
            value: -e.value,
            ..e
        });
    }

    let (v, e) = kronrod(&mut f, a, b)?;
    let mut total = v;
    let mut total_err = e;
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });

    while total_err > cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature {
                a,
                b,
                reason: format!(
                    "no convergence after {} subintervals (error estimate {total_err:e})",
                    heap.len()
                ),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(Error::Quadrature {
                a,
                b,
                reason: format!(
                    "interval [{}, {}] exhausted machine precision",
                    worst.a, worst.b
                ),
            });
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid)?;
        let (v2, e2) = kronrod(&mut f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed accumulated update rounding.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(Estimate {
        value,
        error,
        intervals: heap.len(),
    })
}

/// Integrates `f` over consecutive nodes, returning the running integral
/// from `nodes[0]` at every node (first entry zero).
pub fn cumulative<F: FnMut(f64) -> f64>(
    mut f: F,
    nodes: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in nodes.windows(2) {
        acc += integrate(&mut f, w[0], w[1], cfg)?.value;
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn polynomials_are_exact() {
        let cfg = QuadratureConfig::default();
        let e = integrate(|x| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, &cfg).unwrap();
        // [x^6/6 - x^3 + x] from -1 to 2
        let exact = (64.0 / 6.0 - 8.0 + 2.0) - (1.0 / 6.0 + 1.0 - 1.0);
        assert_abs_diff_eq!(e.value, exact, epsilon = 1e-13);
    }

    #[test]
    fn smooth_transcendental() {
        let cfg = QuadratureConfig::default();
        let e = integrate(|x| (-2.0 * x).exp(), 0.0, 0.5, &cfg).unwrap();
        assert_abs_diff_eq!(e.value, (1.0 - (-1.0f64).exp()) / 2.0, epsilon = 1e-13);
        let e = integrate(|x| (50.0 * x).sin() / (1.0 + x * x), 0.0, 3.0, &cfg).unwrap();
        assert!(e.intervals > 1);
        let reference = integrate(
            |x| (50.0 * x).sin() / (1.0 + x * x),
            0.0,
            3.0,
            &QuadratureConfig {
                abs_tol: 1e-14,
                rel_tol: 1e-14,
                max_intervals: 10_000,
            },
        )
        .unwrap();
        assert_abs_diff_eq!(e.value, reference.value, epsilon = 1e-9);
    }

    #[test]
    fn reversed_limits() {
        let cfg = QuadratureConfig::default();
        let fwd = integrate(|x| x.cos(), 0.0, 1.0, &cfg).unwrap().value;
        let back = integrate(|x| x.cos(), 1.0, 0.0, &cfg).unwrap().value;
        assert_eq!(fwd, -back);
    }

    #[test]
    fn non_finite_integrand_fails() {
        let cfg = QuadratureConfig::default();
        assert!(matches!(
            integrate(|_| f64::NAN, 0.0, 1.0, &cfg),
            Err(Error::Quadrature { .. })
        ));
    }

    #[test]
    fn subinterval_budget_is_enforced() {
        let cfg = QuadratureConfig {
            max_intervals: 4,
            ..Default::default()
        };
        // 1/sqrt(x) has an endpoint singularity the rule cannot resolve quickly.
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn cumulative_matches_pieces() {
        let cfg = QuadratureConfig::default();
        let nodes = [0.0, 0.25, 0.5, 1.0];
        let c = cumulative(|x| 3.0 * x * x, &nodes, &cfg).unwrap();
        for (v, x) in c.iter().zip(nodes) {
            assert_abs_diff_eq!(*v, x * x * x, epsilon = 1e-14);
        }
    }
}
