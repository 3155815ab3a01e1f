//! Statistical verification of the standard-normal post-activation claim.
//!
//! Every sample uses freshly drawn activation parameters, so the recorded
//! post-activation values are independent draws from the distribution the
//! moment analysis describes; the weight matrices stay fixed, which the
//! claim permits (it holds for any weight and input distribution).

use serde::{Deserialize, Serialize};

use crate::activation::{InitConfig, SharingMode};
use crate::mlp::{ActivationKind, MlpError, Network, NetworkConfig};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InputDist {
    /// Coordinates uniform in [−1, 1].
    #[default]
    Uniform,
    /// Standard normal coordinates.
    Gaussian,
}

/// Empirical moments of one hidden layer's post-activation values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerStats {
    pub layer: usize,
    pub n: u64,
    pub mean: f64,
    pub var: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub se_mean: f64,
    pub se_var: f64,
    /// Null (normal-theory) standard error √(6/n).
    pub se_skew: f64,
    /// Null (normal-theory) standard error √(24/n).
    pub se_kurtosis: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatReport {
    pub tau: usize,
    pub scheme: crate::activation::InitScheme,
    pub input_dist: InputDist,
    pub n_samples: u64,
    pub layers: Vec<LayerStats>,
}

impl StatReport {
    /// All layers within `k` standard errors of N(0,1) moments.
    pub fn within(&self, k: f64) -> bool {
        self.layers.iter().all(|l| {
            l.mean.abs() < k * l.se_mean
                && (l.var - 1.0).abs() < k * l.se_var
                && l.skew.abs() < k * l.se_skew
                && (l.kurtosis - 3.0).abs() < k * l.se_kurtosis
        })
    }
}

/// Samples post-activation values at every hidden layer over random inputs
/// and freshly drawn activation parameters; reports empirical moments with
/// standard errors.
pub fn verify_init_statistics(
    cfg: &NetworkConfig,
    rng: &mut Rng,
    n_samples: u64,
    input_dist: InputDist,
) -> Result<StatReport, MlpError> {
    if cfg.activation != ActivationKind::Staf {
        return Err(MlpError::BadConfig("initialization statistics need trainable activations".into()));
    }
    if cfg.sharing == SharingMode::PerNeuron {
        return Err(MlpError::BadConfig("per-neuron sharing not supported here".into()));
    }
    let net = Network::init(cfg.clone())?;
    let n_hidden = cfg.hidden_widths.len();
    let init = InitConfig::new(cfg.omega0, cfg.init_scheme);
    let tau = cfg.tau;
    let b = init.amplitude_scale(tau);

    // Power sums per hidden layer.
    let mut sums = vec![[0.0f64; 4]; n_hidden];
    let mut input = vec![0.0f64; cfg.input_dim];
    let mut pre = Vec::with_capacity(n_hidden + 1);
    let mut post = Vec::with_capacity(n_hidden);
    for (i, &w) in cfg.widths().iter().enumerate() {
        if i > 0 {
            pre.push(vec![0.0f64; w]);
        }
        if i > 0 && i <= n_hidden {
            post.push(vec![0.0f64; w]);
        }
    }
    let groups = match cfg.sharing {
        SharingMode::PerNetwork => 1,
        _ => n_hidden,
    };
    let mut amp = vec![vec![0.0f64; tau]; groups];
    let mut freq = vec![vec![0.0f64; tau]; groups];
    let mut phase = vec![vec![0.0f64; tau]; groups];

    for sample in 0..n_samples {
        for g in 0..groups {
            for t in 0..tau {
                freq[g][t] = init.omega0 * rng.next_f64();
                phase[g][t] = rng.uniform(-std::f64::consts::PI, std::f64::consts::PI).unwrap();
                let x = rng.laplace(b).unwrap();
                amp[g][t] = x.signum() * x.abs().sqrt();
            }
        }
        for v in input.iter_mut() {
            *v = match input_dist {
                InputDist::Uniform => rng.uniform(-1.0, 1.0).unwrap(),
                InputDist::Gaussian => rng.gaussian(),
            };
        }
        let mut z_prev: &[f64] = &input;
        for l in 0..n_hidden {
            let layer = &net.layers[l];
            let width = layer.weight.rows();
            for j in 0..width {
                let row = layer.weight.row(j);
                let mut a = layer.bias[j];
                for (wj, zj) in row.iter().zip(z_prev) {
                    a += wj * zj;
                }
                pre[l][j] = a;
            }
            let g = if groups == 1 { 0 } else { l };
            for j in 0..width {
                let a = pre[l][j];
                let mut z = 0.0;
                for t in 0..tau {
                    z += amp[g][t] * (freq[g][t] * a + phase[g][t]).sin();
                }
                post[l][j] = z;
            }
            // One neuron per draw keeps samples independent; cycle so every
            // neuron contributes.
            let pick = (sample as usize) % width;
            let z = post[l][pick];
            let z2 = z * z;
            sums[l][0] += z;
            sums[l][1] += z2;
            sums[l][2] += z2 * z;
            sums[l][3] += z2 * z2;
            z_prev = &post[l];
        }
    }

    let n = n_samples as f64;
    let layers = sums
        .iter()
        .enumerate()
        .map(|(l, s)| {
            let mean = s[0] / n;
            let m2 = s[1] / n - mean * mean;
            let m3 = s[2] / n - 3.0 * mean * s[1] / n + 2.0 * mean.powi(3);
            let m4 = s[3] / n - 4.0 * mean * s[2] / n + 6.0 * mean * mean * s[1] / n
                - 3.0 * mean.powi(4);
            LayerStats {
                layer: l + 1,
                n: n_samples,
                mean,
                var: m2,
                skew: m3 / m2.powf(1.5),
                kurtosis: m4 / (m2 * m2),
                se_mean: (m2 / n).sqrt(),
                se_var: ((m4 - m2 * m2) / n).sqrt(),
                se_skew: (6.0 / n).sqrt(),
                se_kurtosis: (24.0 / n).sqrt(),
            }
        })
        .collect();
    Ok(StatReport {
        tau,
        scheme: cfg.init_scheme,
        input_dist,
        n_samples,
        layers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::InitScheme;

    fn base_config(tau: usize) -> NetworkConfig {
        let mut cfg = NetworkConfig::new(2, vec![16, 16, 16], 1);
        cfg.tau = tau;
        cfg.seed = 1;
        cfg
    }

    #[test]
    fn post_activations_are_standard_normal_tau5() {
        let cfg = base_config(5);
        let mut rng = Rng::new(42);
        let report = verify_init_statistics(&cfg, &mut rng, 1_000_000, InputDist::Uniform).unwrap();
        for l in &report.layers {
            assert!(l.mean.abs() < 4.0 * l.se_mean, "layer {} mean {}", l.layer, l.mean);
            assert!((l.var - 1.0).abs() < 4.0 * l.se_var, "layer {} var {}", l.layer, l.var);
            assert!(
                (l.kurtosis - 3.0).abs() < 4.0 * l.se_kurtosis,
                "layer {} kurtosis {}",
                l.layer,
                l.kurtosis
            );
        }
    }

    #[test]
    fn degenerate_single_term_still_unit_variance() {
        let cfg = base_config(1);
        let mut rng = Rng::new(7);
        let report = verify_init_statistics(&cfg, &mut rng, 400_000, InputDist::Uniform).unwrap();
        for l in &report.layers {
            assert!((l.var - 1.0).abs() < 4.0 * l.se_var, "layer {} var {}", l.layer, l.var);
        }
    }

    #[test]
    fn invariant_to_input_distribution() {
        let cfg = base_config(3);
        let uni =
            verify_init_statistics(&cfg, &mut Rng::new(11), 400_000, InputDist::Uniform).unwrap();
        let gau =
            verify_init_statistics(&cfg, &mut Rng::new(12), 400_000, InputDist::Gaussian).unwrap();
        for (a, b) in uni.layers.iter().zip(&gau.layers) {
            let se = (a.se_mean.powi(2) + b.se_mean.powi(2)).sqrt();
            assert!((a.mean - b.mean).abs() < 4.0 * se);
            let se = (a.se_var.powi(2) + b.se_var.powi(2)).sqrt();
            assert!((a.var - b.var).abs() < 4.0 * se);
        }
    }

    #[test]
    fn listing_scheme_misses_unit_variance() {
        // The reference-code scale b = 1/(2τ) gives E[Z²] = τ·b/... ≠ 1; the
        // report should show variance far from 1, documenting the mismatch.
        let mut cfg = base_config(4);
        cfg.init_scheme = InitScheme::ListingCode;
        let mut rng = Rng::new(3);
        let report = verify_init_statistics(&cfg, &mut rng, 200_000, InputDist::Uniform).unwrap();
        let first = &report.layers[0];
        assert!((first.var - 1.0).abs() > 10.0 * first.se_var, "var {}", first.var);
    }

    #[test]
    fn report_serializes_to_json() {
        let cfg = base_config(2);
        let mut rng = Rng::new(5);
        let report = verify_init_statistics(&cfg, &mut rng, 10_000, InputDist::Uniform).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"kurtosis\""));
        assert!(json.contains("\"se_mean\""));
        let back: StatReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.layers.len(), report.layers.len());
    }

    #[test]
    fn rejects_non_staf_networks() {
        let mut cfg = base_config(2);
        cfg.activation = ActivationKind::Relu;
        let mut rng = Rng::new(5);
        assert!(verify_init_statistics(&cfg, &mut rng, 100, InputDist::Uniform).is_err());
    }
}
