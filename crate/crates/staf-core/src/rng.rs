//! Seedable random sampling with a bit-exact stream.
//!
//! The generator is splitmix64 (Steele, Lea & Flood 2014): a 64-bit counter
//! advanced by the golden-ratio increment and mixed by two xor-shift-multiply
//! rounds. It is implemented directly so the stream is a pure function of the
//! seed on every platform.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RngError {
    #[error("invalid range: lo={lo} must be < hi={hi}")]
    BadRange { lo: f64, hi: f64 },
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("mean must be non-negative and finite, got {0}")]
    BadMean(f64),
}

/// Deterministic 64-bit generator; identical seed ⇒ identical sample stream.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    seed: u64,
    cached_gaussian: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self { state: seed, seed, cached_gaussian: None }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent generator for a named sub-stream.
    pub fn substream(&self, label: u64) -> Rng {
        Rng::new(splitmix(self.seed.wrapping_add(label.wrapping_mul(0x9E37_79B9_7F4A_7C15))))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        splitmix(self.state)
    }

    /// Uniform sample in `[0, 1)` with 53 bits of mantissa.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, RngError> {
        if !(lo < hi) {
            return Err(RngError::BadRange { lo, hi });
        }
        Ok(lo + self.next_f64() * (hi - lo))
    }

    /// Centered Laplace sample with scale `b`, as the difference of two
    /// unit exponentials scaled by `b`; `E[|X|] = b`, `Var[X] = 2b²`.
    pub fn laplace(&mut self, scale: f64) -> Result<f64, RngError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(RngError::BadScale(scale));
        }
        let e1 = -(1.0 - self.next_f64()).ln();
        let e2 = -(1.0 - self.next_f64()).ln();
        Ok(scale * (e1 - e2))
    }

    /// Standard normal sample via Box-Muller; pairs are generated together
    /// and the second value is cached.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        let (s, c) = theta.sin_cos();
        self.cached_gaussian = Some(r * s);
        r * c
    }

    /// Poisson sample by Knuth's product method; intended for small means
    /// (photon-noise simulation uses means around 10).
    pub fn poisson(&mut self, mean: f64) -> Result<u64, RngError> {
        if !(mean >= 0.0) || !mean.is_finite() {
            return Err(RngError::BadMean(mean));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        let limit = (-mean).exp();
        let mut k = 0u64;
        let mut p = 1.0;
        loop {
            p *= self.next_f64();
            if p <= limit {
                return Ok(k);
            }
            k += 1;
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn identical_seed_identical_stream() {
        let mut a = Rng::new(42);
        let mut b = Rng::new(42);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let xs: Vec<f64> = (0..100).map(|_| a.uniform(-1.0, 1.0).unwrap()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.uniform(-1.0, 1.0).unwrap()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn uniform_range_containment() {
        let mut rng = Rng::new(1);
        for _ in 0..10_000 {
            let v = rng.uniform(0.0, 1.0).unwrap();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn uniform_rejects_bad_range() {
        let mut rng = Rng::new(1);
        assert!(matches!(rng.uniform(1.0, 1.0), Err(RngError::BadRange { .. })));
        assert!(matches!(rng.uniform(2.0, -1.0), Err(RngError::BadRange { .. })));
    }

    // CLT bound: the mean of n uniforms on [-π, π] has standard error
    // 2π/√(12n); four standard errors gives a <0.01% false-failure rate.
    #[test]
    fn uniform_mean_clt_bound() {
        let n = 1_000_000u32;
        let mut rng = Rng::new(2024);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += rng.uniform(-PI, PI).unwrap();
        }
        let mean = sum / n as f64;
        let bound = 4.0 * (2.0 * PI) / (12.0 * n as f64).sqrt();
        assert!(mean.abs() < bound, "mean {mean} exceeds CLT bound {bound}");
    }

    #[test]
    fn laplace_moments() {
        let n = 1_000_000u32;
        let mut rng = Rng::new(7);
        let mut abs_sum = 0.0;
        let mut sq_sum = 0.0;
        let mut negatives = 0u32;
        for _ in 0..n {
            let x = rng.laplace(1.0).unwrap();
            abs_sum += x.abs();
            sq_sum += x * x;
            if x < 0.0 {
                negatives += 1;
            }
        }
        let e_abs = abs_sum / n as f64;
        let e_sq = sq_sum / n as f64;
        assert!((e_abs - 1.0).abs() < 0.01, "E|X| = {e_abs}");
        assert!((e_sq - 2.0).abs() < 0.04, "E[X²] = {e_sq}");
        let frac_neg = negatives as f64 / n as f64;
        assert!((0.495..=0.505).contains(&frac_neg), "sign fraction {frac_neg}");
    }

    #[test]
    fn laplace_rejects_bad_scale() {
        let mut rng = Rng::new(1);
        assert_eq!(rng.laplace(0.0), Err(RngError::BadScale(0.0)));
        assert_eq!(rng.laplace(-1.0), Err(RngError::BadScale(-1.0)));
    }

    #[test]
    fn gaussian_moments() {
        let n = 1_000_000u32;
        let mut rng = Rng::new(9);
        let (mut s1, mut s2, mut s4) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let z = rng.gaussian();
            s1 += z;
            s2 += z * z;
            s4 += z * z * z * z;
        }
        let nf = n as f64;
        assert!((s1 / nf).abs() < 4.0 / nf.sqrt());
        assert!((s2 / nf - 1.0).abs() < 4.0 * (2.0f64 / nf).sqrt());
        assert!((s4 / nf - 3.0).abs() < 4.0 * (96.0f64 / nf).sqrt());
    }

    #[test]
    fn poisson_mean_matches() {
        let mut rng = Rng::new(5);
        let n = 200_000;
        let mean = 10.0;
        let total: u64 = (0..n).map(|_| rng.poisson(mean).unwrap()).sum();
        let empirical = total as f64 / n as f64;
        let se = (mean / n as f64).sqrt();
        assert!((empirical - mean).abs() < 4.0 * se, "poisson mean {empirical}");
    }

    #[test]
    fn substream_is_decoupled() {
        let base = Rng::new(1234);
        let mut a = base.substream(1);
        let mut b = base.substream(2);
        assert_ne!(a.next_u64(), b.next_u64());
        let mut a2 = base.substream(1);
        a2.next_u64();
        assert_eq!(a.next_u64(), a2.next_u64());
    }
}
