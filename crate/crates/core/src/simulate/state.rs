//! Market state and the two Euler schemes.

use serde::Serialize;

use crate::model::DriftSpec;

/// Lower clamp applied to weights after a weight-scheme step.
pub const WEIGHT_FLOOR: f64 = 1e-14;

/// Log-capitalizations and the market weights derived from them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarketState {
    pub log_caps: Vec<f64>,
    pub weights: Vec<f64>,
    /// `log S = log sum_i X_i`.
    pub total_cap_log: f64,
}

/// Order-independent sum: small vectors are summed after sorting so that
/// permuting the inputs cannot change the result.
fn sorted_sum(values: &[f64], buf: &mut Vec<f64>) -> f64 {
    buf.clear();
    buf.extend_from_slice(values);
    buf.sort_by(|a, b| a.total_cmp(b));
    buf.iter().sum()
}

impl MarketState {
    /// State with `S = 1`, so `log X_i = log mu_i`.
    pub fn from_weights(weights: &[f64]) -> Self {
        let mut s = Self {
            log_caps: weights.iter().map(|w| w.ln()).collect(),
            weights: vec![0.0; weights.len()],
            total_cap_log: 0.0,
        };
        s.renormalize(&mut Vec::new());
        s
    }

    pub fn from_log_caps(log_caps: Vec<f64>) -> Self {
        let n = log_caps.len();
        let mut s = Self {
            log_caps,
            weights: vec![0.0; n],
            total_cap_log: 0.0,
        };
        s.renormalize(&mut Vec::new());
        s
    }

    pub fn n(&self) -> usize {
        self.log_caps.len()
    }

    /// Recomputes weights as `exp(l_i - max) / sum_j exp(l_j - max)`.
    fn renormalize(&mut self, buf: &mut Vec<f64>) {
        let top = self
            .log_caps
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        for (w, l) in self.weights.iter_mut().zip(&self.log_caps) {
            *w = (l - top).exp();
        }
        let sum = sorted_sum(&self.weights, buf);
        for w in &mut self.weights {
            *w /= sum;
        }
        self.total_cap_log = top + sum.ln();
    }

    /// One Euler step of `d log X_i = -g(mu_i) dt + dW_i` in place.
    /// Returns true if any weight was outside the domain of `g` and the
    /// clamped evaluation had to be used.
    pub fn step_logcap(
        &mut self,
        spec: &DriftSpec,
        dt: f64,
        noise: &[f64],
        buf: &mut Vec<f64>,
    ) -> bool {
        let right = spec.right_end();
        let mut clamped = false;
        for ((l, &mu), &z) in self.log_caps.iter_mut().zip(&self.weights).zip(noise) {
            if !(mu > 0.0 && mu < right) {
                clamped = true;
            }
            *l += -spec.g_clamped(mu) * dt + z;
        }
        self.renormalize(buf);
        clamped
    }

    pub fn max_weight(&self) -> (usize, f64) {
        argmax(&self.weights)
    }
}

pub(crate) fn argmax(v: &[f64]) -> (usize, f64) {
    v.iter().cloned().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |acc, (i, x)| if x > acc.1 { (i, x) } else { acc },
    )
}

/// Functional form of [`MarketState::step_logcap`].
pub fn step_logcap(
    state: &MarketState,
    spec: &DriftSpec,
    dt: f64,
    noise: &[f64],
) -> (MarketState, bool) {
    let mut next = state.clone();
    let clamped = next.step_logcap(spec, dt, noise, &mut Vec::new());
    (next, clamped)
}

/// Drift of the weight equation: `psi(mu_i) - mu_i sum_j psi(mu_j)`.
pub fn weight_drift(spec: &DriftSpec, weights: &[f64]) -> Vec<f64> {
    let psi: Vec<f64> = weights.iter().map(|&m| spec.psi_clamped(m)).collect();
    let total: f64 = psi.iter().sum();
    psi.iter()
        .zip(weights)
        .map(|(p, m)| p - m * total)
        .collect()
}

/// One Euler step of the weight system
///
/// ```text
/// d mu_i = (psi(mu_i) - mu_i sum_j psi(mu_j)) dt + sum_j (delta_ij mu_i - mu_i mu_j) dW_j
/// ```
///
/// in place, followed by clamping to `[WEIGHT_FLOOR, 1]` and renormalizing.
pub fn step_weights_in_place(
    weights: &mut [f64],
    spec: &DriftSpec,
    dt: f64,
    noise: &[f64],
    drift_buf: &mut Vec<f64>,
) -> bool {
    let right = spec.right_end();
    let clamped = weights.iter().any(|&m| !(m > 0.0 && m < right));
    drift_buf.clear();
    drift_buf.extend(weights.iter().map(|&m| spec.psi_clamped(m)));
    let psi_total: f64 = drift_buf.iter().sum();
    let weighted_noise: f64 = weights.iter().zip(noise).map(|(m, w)| m * w).sum();
    for i in 0..weights.len() {
        let m = weights[i];
        let drift = drift_buf[i] - m * psi_total;
        let diffusion = m * noise[i] - m * weighted_noise;
        weights[i] = m + drift * dt + diffusion;
    }
    for w in weights.iter_mut() {
        *w = w.clamp(WEIGHT_FLOOR, 1.0);
    }
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
    clamped
}

pub fn step_weights(weights: &[f64], spec: &DriftSpec, dt: f64, noise: &[f64]) -> (Vec<f64>, bool) {
    let mut next = weights.to_vec();
    let clamped = step_weights_in_place(&mut next, spec, dt, noise, &mut Vec::new());
    (next, clamped)
}

/// `sum_i (delta_ij mu_i - mu_i mu_j)` for each column `j`.
pub fn diffusion_column_sums(weights: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    (0..weights.len())
        .map(|j| weights[j] - weights[j] * total)
        .collect()
}
