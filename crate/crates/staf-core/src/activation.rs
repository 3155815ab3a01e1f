//! Trainable sinusoidal activation: evaluation, parameter gradients,
//! initialization sampling, and the exact moment oracles behind the
//! standard-normal post-activation property.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{Rng, RngError};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum ActivationError {
    #[error("parameter vectors must share one length: C={c}, Omega={omega}, Phi={phi}")]
    LengthMismatch { c: usize, omega: usize, phi: usize },
    #[error("term count tau must be >= 1")]
    EmptyParams,
    #[error("non-finite activation parameter at index {0}")]
    NonFinite(usize),
    #[error("moment order {q} exceeds the exact-arithmetic cap {cap}")]
    MomentOrderTooLarge { q: usize, cap: usize },
    #[error(transparent)]
    Rng(#[from] RngError),
}

/// Where a network's trainable activations are shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum SharingMode {
    /// One parameter triple per neuron.
    PerNeuron,
    /// One triple per layer; the default for all training tasks.
    #[default]
    PerLayer,
    /// A single triple for the whole network.
    PerNetwork,
}

/// Amplitude-sampling scheme for initialization.
///
/// The two schemes disagree on the Laplace scale: the derivation requires
/// `b = 2/τ` for unit post-activation variance, while the released reference
/// code uses `b = 1/(2τ)`. Both are kept selectable; `TheoremPdf` is the
/// default because it is the one that actually yields N(0,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InitScheme {
    #[default]
    TheoremPdf,
    ListingCode,
}

/// Initialization configuration: first-layer frequency scale and scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitConfig {
    pub omega0: f64,
    pub scheme: InitScheme,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { omega0: 30.0, scheme: InitScheme::TheoremPdf }
    }
}

impl InitConfig {
    pub fn new(omega0: f64, scheme: InitScheme) -> Self {
        assert!(omega0 > 0.0, "omega0 must be positive");
        Self { omega0, scheme }
    }

    /// Laplace scale used for amplitude sampling at the given term count.
    pub fn amplitude_scale(&self, tau: usize) -> f64 {
        assert!(tau >= 1);
        match self.scheme {
            InitScheme::TheoremPdf => 2.0 / tau as f64,
            InitScheme::ListingCode => 1.0 / (2.0 * tau as f64),
        }
    }
}

/// Per-term amplitudes, frequencies, and phases of one activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationParams<S> {
    pub amplitudes: Vec<S>,
    pub frequencies: Vec<S>,
    pub phases: Vec<S>,
}

impl<S: Scalar> ActivationParams<S> {
    pub fn new(amplitudes: Vec<S>, frequencies: Vec<S>, phases: Vec<S>) -> Result<Self, ActivationError> {
        let p = Self { amplitudes, frequencies, phases };
        p.validate()?;
        Ok(p)
    }

    pub fn tau(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn validate(&self) -> Result<(), ActivationError> {
        let (c, omega, phi) = (self.amplitudes.len(), self.frequencies.len(), self.phases.len());
        if c != omega || c != phi {
            return Err(ActivationError::LengthMismatch { c, omega, phi });
        }
        if c == 0 {
            return Err(ActivationError::EmptyParams);
        }
        for i in 0..c {
            if !self.amplitudes[i].is_finite()
                || !self.frequencies[i].is_finite()
                || !self.phases[i].is_finite()
            {
                return Err(ActivationError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Largest |Ω_i|.
    pub fn max_abs_frequency(&self) -> S {
        self.frequencies.iter().fold(S::zero(), |acc, &w| acc.max(w.abs()))
    }

    /// Mean |Ω_i|; the effective frequency used to scale hidden-weight
    /// initialization (the draws are one-sided, so the mean sits near half
    /// the sampling range).
    pub fn mean_abs_frequency(&self) -> S {
        let sum = self.frequencies.iter().fold(S::zero(), |acc, &w| acc + w.abs());
        sum / S::of(self.tau() as f64)
    }
}

/// `ρ*(x) = Σ_i C_i sin(Ω_i x + Φ_i)`, the literal sum in index order.
pub fn staf_eval<S: Scalar>(p: &ActivationParams<S>, x: S) -> S {
    let mut acc = S::zero();
    for i in 0..p.tau() {
        acc += p.amplitudes[i] * (p.frequencies[i] * x + p.phases[i]).sin();
    }
    acc
}

/// `dρ*/dx = Σ_i C_i Ω_i cos(Ω_i x + Φ_i)`.
pub fn staf_dx<S: Scalar>(p: &ActivationParams<S>, x: S) -> S {
    let mut acc = S::zero();
    for i in 0..p.tau() {
        acc += p.amplitudes[i] * p.frequencies[i] * (p.frequencies[i] * x + p.phases[i]).cos();
    }
    acc
}

/// Gradients of `upstream · ρ*(x)` with respect to `(C, Ω, Φ)`.
pub fn staf_param_grads<S: Scalar>(
    p: &ActivationParams<S>,
    x: S,
    upstream: S,
) -> (Vec<S>, Vec<S>, Vec<S>) {
    let tau = p.tau();
    let mut dc = vec![S::zero(); tau];
    let mut domega = vec![S::zero(); tau];
    let mut dphi = vec![S::zero(); tau];
    for i in 0..tau {
        let angle = p.frequencies[i] * x + p.phases[i];
        let (s, c) = (angle.sin(), angle.cos());
        dc[i] = upstream * s;
        domega[i] = upstream * p.amplitudes[i] * x * c;
        dphi[i] = upstream * p.amplitudes[i] * c;
    }
    (dc, domega, dphi)
}

/// Draws `tau` i.i.d. amplitudes `C = sign(X)·√|X|` with `X ~ Laplace(0, b)`.
///
/// Under `TheoremPdf` the density is `f(c) = (τ|c|/2)·exp(−τc²/2)` and the
/// even moments are `E[C^{2j}] = (2/τ)^j j!`.
pub fn sample_amplitudes(rng: &mut Rng, tau: usize, cfg: &InitConfig) -> Vec<f64> {
    assert!(tau >= 1);
    let b = cfg.amplitude_scale(tau);
    (0..tau)
        .map(|_| {
            let x = rng.laplace(b).expect("positive scale");
            x.signum() * x.abs().sqrt()
        })
        .collect()
}

/// Draws one activation triple: `Ω_i = ω₀·U[0,1)`, `Φ_i ~ U(−π, π)`, and
/// amplitudes from [`sample_amplitudes`].
pub fn init_layer_params(rng: &mut Rng, tau: usize, cfg: &InitConfig) -> ActivationParams<f64> {
    assert!(tau >= 1);
    let frequencies = (0..tau).map(|_| cfg.omega0 * rng.next_f64()).collect();
    let phases = (0..tau)
        .map(|_| rng.uniform(-std::f64::consts::PI, std::f64::consts::PI).expect("valid range"))
        .collect();
    let amplitudes = sample_amplitudes(rng, tau, cfg);
    ActivationParams { amplitudes, frequencies, phases }
}

/// Even amplitude moment `E[C^{2j}] = (2/τ)^j · j!` under `TheoremPdf`.
pub fn amplitude_moment_oracle(j: usize, tau: usize) -> f64 {
    assert!(tau >= 1);
    amplitude_moment_exact(j, tau).to_f64().expect("moment fits f64")
}

fn amplitude_moment_exact(j: usize, tau: usize) -> BigRational {
    let base = BigRational::new(BigInt::from(2), BigInt::from(tau as u64));
    let mut out = BigRational::one();
    for _ in 0..j {
        out *= base.clone();
    }
    out * BigRational::from_integer(factorial(j))
}

const Z_MOMENT_CAP: usize = 12;

/// Exact moment `E[Z^q]` of the post-activation under `TheoremPdf`
/// amplitudes: zero for odd `q`; for even `q` the composition sum
///
/// `2^{-q} Σ_{j₁+…+j_τ = q/2} multinomial(q; j₁,j₁,…,j_τ,j_τ) Π (2/τ)^{j_u} j_u!`
///
/// evaluated in exact rational arithmetic (`q ≤ 12`).
pub fn z_moment_oracle(q: usize, tau: usize) -> Result<f64, ActivationError> {
    Ok(z_moment_oracle_exact(q, tau)?.to_f64().expect("moment fits f64"))
}

/// Exact-rational version of [`z_moment_oracle`].
pub fn z_moment_oracle_exact(q: usize, tau: usize) -> Result<BigRational, ActivationError> {
    assert!(tau >= 1);
    if q > Z_MOMENT_CAP {
        return Err(ActivationError::MomentOrderTooLarge { q, cap: Z_MOMENT_CAP });
    }
    if q % 2 == 1 {
        return Ok(BigRational::zero());
    }
    let half = q / 2;
    let q_factorial = factorial(q);
    let mut total = BigRational::zero();
    for composition in compositions(half, tau) {
        // multinomial(q; j1,j1,...,jτ,jτ) = q! / Π (j_u!)²
        let mut denom = BigInt::one();
        for &j in &composition {
            let f = factorial(j);
            denom *= &f * &f;
        }
        let multinomial = BigRational::new(q_factorial.clone(), denom);
        let mut moment_product = BigRational::one();
        for &j in &composition {
            moment_product *= amplitude_moment_exact(j, tau);
        }
        total += multinomial * moment_product;
    }
    let two_pow_q = BigRational::from_integer(BigInt::from(2).pow(q as u32));
    Ok(total / two_pow_q)
}

/// Exact standard-normal moment `E[X^q] = q! / ((q/2)!·2^{q/2})` for even q.
pub fn gaussian_moment_exact(q: usize) -> BigRational {
    if q % 2 == 1 {
        return BigRational::zero();
    }
    let num = factorial(q);
    let denom = factorial(q / 2) * BigInt::from(2).pow((q / 2) as u32);
    BigRational::new(num, denom)
}

fn factorial(n: usize) -> BigInt {
    let mut out = BigInt::one();
    for i in 2..=n {
        out *= BigInt::from(i as u64);
    }
    out
}

/// All orderings of non-negative integers of length `parts` summing to `total`.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; parts];
    fn recurse(total: usize, idx: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if idx + 1 == current.len() {
            current[idx] = total;
            out.push(current.clone());
            return;
        }
        for v in 0..=total {
            current[idx] = v;
            recurse(total - v, idx + 1, current, out);
        }
    }
    recurse(total, 0, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn params(c: &[f64], w: &[f64], phi: &[f64]) -> ActivationParams<f64> {
        ActivationParams::new(c.to_vec(), w.to_vec(), phi.to_vec()).unwrap()
    }

    #[test]
    fn eval_trivials() {
        assert_eq!(staf_eval(&params(&[1.0], &[1.0], &[0.0]), 0.0), 0.0);
        let y = staf_eval(&params(&[1.0], &[FRAC_PI_2], &[0.0]), 1.0);
        assert!((y - 1.0).abs() < 1e-15);
        let y = staf_eval(&params(&[1.0, 2.0], &[1.0, 2.0], &[0.0, FRAC_PI_2]), 0.0);
        assert!((y - 2.0).abs() < 1e-15);
    }

    #[test]
    fn tau_one_reproduces_plain_sine() {
        let p = params(&[1.0], &[2.5], &[0.0]);
        for i in 0..100 {
            let x = -3.0 + 0.06 * i as f64;
            assert_eq!(staf_eval(&p, x), (2.5 * x).sin());
        }
    }

    #[test]
    fn dx_trivials() {
        assert_eq!(staf_dx(&params(&[1.0], &[1.0], &[0.0]), 0.0), 1.0);
        let zero_amp = params(&[0.0, 0.0], &[1.0, 3.0], &[0.3, 0.7]);
        for i in 0..10 {
            assert_eq!(staf_dx(&zero_amp, i as f64 * 0.5), 0.0);
        }
    }

    #[test]
    fn dx_matches_finite_difference() {
        let mut rng = Rng::new(17);
        let cfg = InitConfig::new(3.0, InitScheme::TheoremPdf);
        let h = 1e-6;
        for _ in 0..1000 {
            let tau = 1 + (rng.next_u64() % 4) as usize;
            let p = init_layer_params(&mut rng, tau, &cfg);
            let x = rng.uniform(-2.0, 2.0).unwrap();
            let analytic = staf_dx(&p, x);
            let numeric = (staf_eval(&p, x + h) - staf_eval(&p, x - h)) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-3);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-6,
                "analytic {analytic} vs numeric {numeric}"
            );
        }
    }

    #[test]
    fn param_grads_at_zero_input() {
        let p = params(&[2.0], &[3.0], &[0.0]);
        let upstream = 1.5;
        let (dc, domega, dphi) = staf_param_grads(&p, 0.0, upstream);
        assert_eq!(dc, vec![0.0]);
        assert_eq!(domega, vec![0.0]);
        assert_eq!(dphi, vec![upstream * 2.0]);
    }

    #[test]
    fn param_grads_zero_upstream() {
        let p = params(&[1.0, -0.5], &[2.0, 0.3], &[0.1, -0.4]);
        let (dc, domega, dphi) = staf_param_grads(&p, 0.7, 0.0);
        assert!(dc.iter().chain(&domega).chain(&dphi).all(|&g| g == 0.0));
    }

    #[test]
    fn param_grads_match_finite_difference() {
        let mut rng = Rng::new(23);
        let cfg = InitConfig::new(2.0, InitScheme::TheoremPdf);
        let h = 1e-6;
        for _ in 0..200 {
            let tau = 1 + (rng.next_u64() % 3) as usize;
            let p = init_layer_params(&mut rng, tau, &cfg);
            let x = rng.uniform(-1.5, 1.5).unwrap();
            let upstream = rng.uniform(-2.0, 2.0).unwrap();
            let (dc, domega, dphi) = staf_param_grads(&p, x, upstream);
            for i in 0..tau {
                let check = |vec_sel: fn(&mut ActivationParams<f64>) -> &mut Vec<f64>,
                             analytic: f64| {
                    let mut plus = p.clone();
                    vec_sel(&mut plus)[i] += h;
                    let mut minus = p.clone();
                    vec_sel(&mut minus)[i] -= h;
                    let numeric =
                        upstream * (staf_eval(&plus, x) - staf_eval(&minus, x)) / (2.0 * h);
                    let denom = analytic.abs().max(numeric.abs()).max(1e-3);
                    assert!(
                        ((analytic - numeric) / denom).abs() < 1e-6,
                        "param grad mismatch: {analytic} vs {numeric}"
                    );
                };
                check(|p| &mut p.amplitudes, dc[i]);
                check(|p| &mut p.frequencies, domega[i]);
                check(|p| &mut p.phases, dphi[i]);
            }
        }
    }

    #[test]
    fn amplitude_moment_oracle_values() {
        assert_eq!(amplitude_moment_oracle(0, 3), 1.0);
        assert_eq!(amplitude_moment_oracle(1, 2), 1.0);
        assert_eq!(amplitude_moment_oracle(3, 2), 6.0);
    }

    #[test]
    fn sampled_amplitude_moments_match_oracle() {
        let n = 1_000_000;
        let tau = 2;
        let cfg = InitConfig::new(30.0, InitScheme::TheoremPdf);
        let mut rng = Rng::new(2718);
        let mut sums = [0.0f64; 7]; // E[C^1..C^7] accumulators by power-1
        for _ in 0..(n / tau) {
            for &c in &sample_amplitudes(&mut rng, tau, &cfg) {
                let mut p = c;
                for s in sums.iter_mut() {
                    *s += p;
                    p *= c;
                }
            }
        }
        let count = (n / tau * tau) as f64;
        let moment = |k: usize| sums[k - 1] / count;
        // Standard error of the k-th sample moment is √(Var[C^k]/n).
        let se = |k: usize| {
            let second = amplitude_moment_oracle(k, tau);
            let first = if k % 2 == 0 { amplitude_moment_oracle(k / 2, tau) } else { 0.0 };
            ((second - first * first) / count).sqrt()
        };
        assert!((moment(2) - 1.0).abs() < 3.0 * se(2), "E[C²] = {}", moment(2));
        assert!((moment(4) - 2.0).abs() < 3.0 * se(4), "E[C⁴] = {}", moment(4));
        assert!(
            (moment(6) - amplitude_moment_oracle(3, tau)).abs() < 4.0 * se(6),
            "E[C⁶] = {}",
            moment(6)
        );
        assert!(moment(1).abs() < 4.0 * se(1), "E[C] = {}", moment(1));
        assert!(moment(3).abs() < 4.0 * se(3), "E[C³] = {}", moment(3));
    }

    #[test]
    fn init_layer_params_ranges_and_determinism() {
        let cfg = InitConfig::new(30.0, InitScheme::TheoremPdf);
        let mut rng = Rng::new(5);
        for _ in 0..100 {
            let p = init_layer_params(&mut rng, 8, &cfg);
            assert!(p.frequencies.iter().all(|&w| (0.0..30.0).contains(&w)));
            assert!(p.phases.iter().all(|&phi| (-PI..PI).contains(&phi)));
        }
        let a = init_layer_params(&mut Rng::new(7), 5, &cfg);
        let b = init_layer_params(&mut Rng::new(7), 5, &cfg);
        assert_eq!(a, b);
    }

    #[test]
    fn listing_scheme_uses_smaller_scale() {
        let theorem = InitConfig::new(30.0, InitScheme::TheoremPdf);
        let listing = InitConfig::new(30.0, InitScheme::ListingCode);
        assert_eq!(theorem.amplitude_scale(4), 0.5);
        assert_eq!(listing.amplitude_scale(4), 0.125);
    }

    #[test]
    fn z_moment_small_cases() {
        assert_eq!(z_moment_oracle(1, 3).unwrap(), 0.0);
        for tau in 1..=6 {
            assert_eq!(z_moment_oracle(2, tau).unwrap(), 1.0);
            assert_eq!(z_moment_oracle(4, tau).unwrap(), 3.0);
        }
    }

    #[test]
    fn z_moments_equal_gaussian_moments_exactly() {
        for tau in 1..=6 {
            for q in (0..=12).step_by(2) {
                assert_eq!(
                    z_moment_oracle_exact(q, tau).unwrap(),
                    gaussian_moment_exact(q),
                    "q={q} tau={tau}"
                );
            }
        }
    }

    #[test]
    fn z_moment_cap() {
        assert!(matches!(
            z_moment_oracle(14, 2),
            Err(ActivationError::MomentOrderTooLarge { q: 14, cap: 12 })
        ));
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(matches!(
            ActivationParams::new(vec![1.0], vec![1.0, 2.0], vec![0.0]),
            Err(ActivationError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ActivationParams::<f64>::new(vec![], vec![], vec![]),
            Err(ActivationError::EmptyParams)
        ));
        assert!(matches!(
            ActivationParams::new(vec![f64::NAN], vec![1.0], vec![0.0]),
            Err(ActivationError::NonFinite(0))
        ));
    }
}
