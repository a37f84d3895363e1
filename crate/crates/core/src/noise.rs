//! Counter-based Gaussian noise.
//!
//! Every draw is a pure function of `(seed, path, step, coordinate)`, so two
//! schemes or two processes asked for the same key see the same increment, and
//! results do not depend on how paths are spread over threads.

use statrs::function::erf::erfc_inv;

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const PATH_KEY: u64 = 0xd1b5_4a32_d192_ed03;
const STEP_KEY: u64 = 0xabc9_8388_fb8a_c6b1;
const COORD_KEY: u64 = 0x8cb9_2ba7_2f3d_8dd7;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn hash_key(seed: u64, path: u64, step: u64, coord: u64) -> u64 {
    let mut h = mix(seed);
    h = mix(h ^ path.wrapping_mul(PATH_KEY));
    h = mix(h ^ step.wrapping_mul(STEP_KEY));
    mix(h ^ coord.wrapping_mul(COORD_KEY))
}

/// Uniform on the open interval (0, 1) from the top 52 bits.
#[inline]
pub fn open_unit(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Standard normal quantile.
#[inline]
pub fn normal_quantile(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

pub trait NoiseSource: Sync {
    /// Standard normal draws for one `(path, step)`, one per coordinate.
    fn standard_normals(&self, path: u64, step: u64, out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterNoise {
    pub seed: u64,
}

impl CounterNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl NoiseSource for CounterNoise {
    fn standard_normals(&self, path: u64, step: u64, out: &mut [f64]) {
        for (j, z) in out.iter_mut().enumerate() {
            *z = normal_quantile(open_unit(hash_key(self.seed, path, step, j as u64)));
        }
    }
}

/// Deterministic override: every increment is zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn standard_normals(&self, _path: u64, _step: u64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Brownian increments over steps of length `dt`, built from `refine`
/// fine draws per step so that coarser grids reuse the same path.
#[derive(Debug, Clone, Copy)]
pub struct Increments<'a, N: NoiseSource + ?Sized> {
    pub source: &'a N,
    pub dt: f64,
    pub refine: u64,
}

impl<'a, N: NoiseSource + ?Sized> Increments<'a, N> {
    pub fn new(source: &'a N, dt: f64) -> Self {
        Self {
            source,
            dt,
            refine: 1,
        }
    }

    pub fn refined(source: &'a N, dt: f64, refine: u64) -> Self {
        assert!(refine >= 1);
        Self { source, dt, refine }
    }

    /// Writes the increment of step `step` into `out`; `scratch` has the same length.
    pub fn fill(&self, path: u64, step: u64, out: &mut [f64], scratch: &mut [f64]) {
        let scale = (self.dt / self.refine as f64).sqrt();
        if self.refine == 1 {
            self.source.standard_normals(path, step, out);
            out.iter_mut().for_each(|v| *v *= scale);
            return;
        }
        out.fill(0.0);
        for j in 0..self.refine {
            self.source
                .standard_normals(path, step * self.refine + j, scratch);
            for (o, z) in out.iter_mut().zip(scratch.iter()) {
                *o += z;
            }
        }
        out.iter_mut().for_each(|v| *v *= scale);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_are_keyed() {
        let n = CounterNoise::new(7);
        let mut a = [0.0; 3];
        let mut b = [0.0; 3];
        n.standard_normals(4, 10, &mut a);
        n.standard_normals(4, 10, &mut b);
        assert_eq!(a, b);
        n.standard_normals(4, 11, &mut b);
        assert_ne!(a, b);
        CounterNoise::new(8).standard_normals(4, 10, &mut b);
        assert_ne!(a, b);
    }

    #[test]
    fn moments_are_standard_normal() {
        let n = CounterNoise::new(1);
        let mut z = [0.0; 4];
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        let m = 100_000;
        for step in 0..m {
            n.standard_normals(0, step, &mut z);
            for v in z {
                s1 += v;
                s2 += v * v;
                s4 += v.powi(4);
            }
        }
        let cnt = (4 * m) as f64;
        assert!((s1 / cnt).abs() < 0.01);
        assert!((s2 / cnt - 1.0).abs() < 0.01);
        assert!((s4 / cnt - 3.0).abs() < 0.06);
    }

    #[test]
    fn quantile_symmetry_and_tails() {
        assert_eq!(normal_quantile(0.5), 0.0);
        assert!((normal_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.025) + normal_quantile(0.975)).abs() < 1e-12);
        assert!(normal_quantile(open_unit(0)).is_finite());
        assert!(normal_quantile(open_unit(u64::MAX)).is_finite());
    }

    #[test]
    fn refined_increments_sum_fine_draws() {
        let src = CounterNoise::new(3);
        let fine = Increments::new(&src, 0.25);
        let coarse = Increments::refined(&src, 1.0, 4);
        let mut out = [0.0; 2];
        let mut scratch = [0.0; 2];
        coarse.fill(0, 1, &mut out, &mut scratch);
        let mut sum = [0.0; 2];
        for s in 4..8 {
            let mut inc = [0.0; 2];
            fine.fill(0, s, &mut inc, &mut scratch);
            sum[0] += inc[0];
            sum[1] += inc[1];
        }
        assert!((out[0] - sum[0]).abs() < 1e-12);
        assert!((out[1] - sum[1]).abs() < 1e-12);
    }
}
