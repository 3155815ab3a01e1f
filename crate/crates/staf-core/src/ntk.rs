//! Analytic and empirical neural tangent kernels.
//!
//! The dual activation of the trainable sinusoid sum has a closed form in
//! which the sign of the `cos(Φ_i+Φ_j)` cross-term matters: the
//! product-to-sum identity `sin A sin B = ½[cos(A−B) − cos(A+B)]` forces a
//! minus sign. The plus-signed variant is kept behind
//! [`CrossTermSign::PrintedPlus`] purely so the Monte-Carlo oracle can
//! demonstrate it wrong (constant activations expose it: `Ω = 0` gives
//! `sin²Φ` under the minus sign and `cos²Φ` under the plus sign).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{staf_eval, ActivationParams};
use crate::eig::{sym_eig, EigError, EigenDecomposition};
use crate::matrix::{DenseMatrix, MatrixError};
use crate::mlp::{backward, forward, MlpError, Network};
use crate::rng::Rng;
use crate::threads;

type Matrix = DenseMatrix<f64>;

/// Jacobian entries allowed in memory at once (~1 GB of f64).
const JACOBIAN_ELEMENT_CAP: usize = 130_000_000;

#[derive(Debug, Error)]
pub enum NtkError {
    #[error("correlation {0} lies outside [-1, 1] beyond slack")]
    Domain(f64),
    #[error("empirical kernel needs a scalar-output network, got output width {0}")]
    MultiOutput(usize),
    #[error("Jacobian of {rows} x {params} entries exceeds the memory cap")]
    Capacity { rows: usize, params: usize },
    #[error("dual activation norm is not positive; cannot normalize")]
    DegenerateNormalization,
    #[error(transparent)]
    Eig(#[from] EigError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// Which sign the `cos(Φ_i+Φ_j)` cross-term carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CrossTermSign {
    /// Oracle-validated minus sign (the default).
    #[default]
    OracleMinus,
    /// The plus-signed variant; fails the Monte-Carlo gate.
    PrintedPlus,
}

/// Closed-form dual activation `ρ̌(ξ) = E[ρ*(u)ρ*(v)]` for correlated
/// standard normals, sign chosen by `sign`.
pub fn dual_activation_with_sign(p: &ActivationParams<f64>, xi: f64, sign: CrossTermSign) -> f64 {
    let tau = p.tau();
    let mut acc = 0.0;
    for i in 0..tau {
        let (ci, wi, phi_i) = (p.amplitudes[i], p.frequencies[i], p.phases[i]);
        for j in 0..tau {
            let (cj, wj, phi_j) = (p.amplitudes[j], p.frequencies[j], p.phases[j]);
            let shared = -0.5 * (wi * wi + wj * wj);
            // Single exponent per term keeps e^{±ΩΩξ} from overflowing
            // before the Gaussian damping is applied.
            let plus = (shared + wi * wj * xi).exp() * (phi_i - phi_j).cos();
            let minus = (shared - wi * wj * xi).exp() * (phi_i + phi_j).cos();
            let cross = match sign {
                CrossTermSign::OracleMinus => plus - minus,
                CrossTermSign::PrintedPlus => plus + minus,
            };
            acc += ci * cj * cross;
        }
    }
    0.5 * acc
}

/// Sign-corrected dual activation.
pub fn dual_activation(p: &ActivationParams<f64>, xi: f64) -> f64 {
    dual_activation_with_sign(p, xi, CrossTermSign::OracleMinus)
}

/// Exact ξ-derivative of the sign-corrected dual activation.
pub fn dual_activation_derivative(p: &ActivationParams<f64>, xi: f64) -> f64 {
    let tau = p.tau();
    let mut acc = 0.0;
    for i in 0..tau {
        let (ci, wi, phi_i) = (p.amplitudes[i], p.frequencies[i], p.phases[i]);
        for j in 0..tau {
            let (cj, wj, phi_j) = (p.amplitudes[j], p.frequencies[j], p.phases[j]);
            let shared = -0.5 * (wi * wi + wj * wj);
            let plus = (shared + wi * wj * xi).exp() * (phi_i - phi_j).cos();
            let minus = (shared - wi * wj * xi).exp() * (phi_i + phi_j).cos();
            acc += ci * cj * wi * wj * (plus + minus);
        }
    }
    0.5 * acc
}

/// Monte-Carlo estimate of the dual activation with its standard error.
///
/// Samples `u = z₁`, `v = ξz₁ + √(1−ξ²)z₂` and averages `ρ*(u)ρ*(v)`; the
/// evaluation path is the plain scalar sum, independent of the closed form.
pub fn mc_dual_oracle(
    p: &ActivationParams<f64>,
    xi: f64,
    n: usize,
    rng: &mut Rng,
) -> Result<(f64, f64), NtkError> {
    if xi.abs() > 1.0 + 1e-12 {
        return Err(NtkError::Domain(xi));
    }
    let xi = xi.clamp(-1.0, 1.0);
    let ortho = (1.0 - xi * xi).max(0.0).sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n {
        let z1 = rng.gaussian();
        let z2 = rng.gaussian();
        let u = z1;
        let v = xi * z1 + ortho * z2;
        let val = staf_eval(p, u) * staf_eval(p, v);
        sum += val;
        sum_sq += val * val;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    Ok((mean, (var / n as f64).sqrt()))
}

/// One NNGP/NTK pair after `depth` recursion steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NtkValue {
    pub nngp: f64,
    pub ntk: f64,
}

/// Analytic NTK recursion for inputs with correlation `xi = xᵀx̃`:
/// `Σ⁽ˡ⁾ = ρ̌(Σ⁽ˡ⁻¹⁾)`, `K⁽ˡ⁾ = Σ⁽ˡ⁾ + K⁽ˡ⁻¹⁾ ρ̌'(Σ⁽ˡ⁻¹⁾)` from the base
/// `Σ⁽⁰⁾ = K⁽⁰⁾ = xᵀx̃`. With `normalized` the activation is rescaled by
/// `1/√ρ̌(1)` so that `ρ̌(1) = 1`.
pub fn analytic_ntk(
    p: &ActivationParams<f64>,
    depth: usize,
    x: &[f64],
    x_tilde: &[f64],
    normalized: bool,
) -> Result<NtkValue, NtkError> {
    assert_eq!(x.len(), x_tilde.len(), "inputs must share a dimension");
    let xi: f64 = x.iter().zip(x_tilde).map(|(a, b)| a * b).sum();
    analytic_ntk_from_correlation(p, depth, xi, normalized)
}

pub fn analytic_ntk_from_correlation(
    p: &ActivationParams<f64>,
    depth: usize,
    xi: f64,
    normalized: bool,
) -> Result<NtkValue, NtkError> {
    if xi.abs() > 1.0 + 1e-12 {
        return Err(NtkError::Domain(xi));
    }
    let xi = xi.clamp(-1.0, 1.0);
    let norm = if normalized {
        let d1 = dual_activation(p, 1.0);
        if !(d1 > 0.0) {
            return Err(NtkError::DegenerateNormalization);
        }
        d1
    } else {
        1.0
    };
    let mut sigma = xi;
    let mut kernel = xi;
    for _ in 0..depth {
        let sigma_next = dual_activation(p, sigma) / norm;
        let deriv = dual_activation_derivative(p, sigma) / norm;
        kernel = sigma_next + kernel * deriv;
        sigma = sigma_next;
    }
    Ok(NtkValue { nngp: sigma, ntk: kernel })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelProvenance {
    Analytic,
    Empirical,
}

/// Symmetric kernel over a list of inputs.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: Matrix,
    pub provenance: KernelProvenance,
}

impl KernelMatrix {
    /// Symmetry within 1e-10 relative to the largest entry.
    pub fn is_symmetric(&self) -> bool {
        let n = self.matrix.rows();
        let tol = 1e-10 * self.matrix.max_abs().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in (i + 1)..n {
                if (self.matrix.get(i, j) - self.matrix.get(j, i)).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// Empirical NTK `K(x, x̃) = ⟨∇_θ f(x), ∇_θ f(x̃)⟩` of a scalar-output
/// network.
///
/// Under the two-phase view the activation parameters are treated as fixed,
/// so only weight and bias gradients enter by default;
/// `include_activation_params` widens the parameter vector. Jacobian rows
/// are built independently and the Gram matrix is mirrored from its upper
/// triangle, so the result is exactly symmetric.
pub fn empirical_ntk(
    net: &Network,
    inputs: &Matrix,
    include_activation_params: bool,
) -> Result<KernelMatrix, NtkError> {
    if net.config.output_dim != 1 {
        return Err(NtkError::MultiOutput(net.config.output_dim));
    }
    let n = inputs.rows();
    let n_params: usize = net
        .layers
        .iter()
        .map(|l| l.weight.data().len() + l.bias.len())
        .sum::<usize>()
        + if include_activation_params {
            net.activations.iter().map(|p| 3 * p.tau()).sum::<usize>()
        } else {
            0
        };
    if n.checked_mul(n_params).map_or(true, |total| total > JACOBIAN_ELEMENT_CAP) {
        return Err(NtkError::Capacity { rows: n, params: n_params });
    }

    let mut jacobian = Matrix::zeros(n, n_params);
    let row_results = threads::map_chunks(n, 8, |start, end| -> Result<Vec<Vec<f64>>, NtkError> {
        let mut rows = Vec::with_capacity(end - start);
        for r in start..end {
            let x = Matrix::from_vec(1, inputs.cols(), inputs.row(r).to_vec())
                .expect("row extraction");
            let trace = forward(net, &x)?;
            let unit = Matrix::from_vec(1, 1, vec![1.0]).expect("unit gradient");
            let bundle = backward(net, &trace, &unit)?;
            let mut flat = Vec::with_capacity(n_params);
            for l in 0..net.layers.len() {
                flat.extend_from_slice(bundle.d_weights[l].data());
                flat.extend_from_slice(&bundle.d_biases[l]);
            }
            if include_activation_params {
                for g in &bundle.d_activations {
                    flat.extend_from_slice(&g.d_amplitudes);
                    flat.extend_from_slice(&g.d_frequencies);
                    flat.extend_from_slice(&g.d_phases);
                }
            }
            rows.push(flat);
        }
        Ok(rows)
    });
    let mut r = 0usize;
    for chunk in row_results {
        for row in chunk? {
            jacobian.row_mut(r).copy_from_slice(&row);
            r += 1;
        }
    }

    let mut gram = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let dot: f64 =
                jacobian.row(i).iter().zip(jacobian.row(j)).map(|(a, b)| a * b).sum();
            gram.set(i, j, dot);
            gram.set(j, i, dot);
        }
    }
    Ok(KernelMatrix { matrix: gram, provenance: KernelProvenance::Empirical })
}

/// Eigendecomposition of a kernel (descending eigenvalues; eigenvector
/// columns are the discrete eigenfunctions over the input list).
pub fn ntk_spectrum(kernel: &KernelMatrix) -> Result<EigenDecomposition<f64>, NtkError> {
    Ok(sym_eig(&kernel.matrix)?)
}

/// Eigenvalues above `threshold_factor · λ_max`.
pub fn significant_eigenvalue_count(eigenvalues: &[f64], threshold_factor: f64) -> usize {
    let lambda_max = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    eigenvalues.iter().filter(|&&l| l > threshold_factor * lambda_max).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activation::{init_layer_params, InitConfig, InitScheme};
    use crate::mlp::{ActivationKind, NetworkConfig};

    fn single(c: f64, w: f64, phi: f64) -> ActivationParams<f64> {
        ActivationParams::new(vec![c], vec![w], vec![phi]).unwrap()
    }

    #[test]
    fn sine_dual_at_full_correlation() {
        // E[sin²(u)] for u ~ N(0,1) is (1 − e⁻²)/2.
        let p = single(1.0, 1.0, 0.0);
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((dual_activation(&p, 1.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_activation_separates_signs() {
        // Ω = 0 makes ρ* ≡ sinΦ; the dual must be sin²Φ. The plus-signed
        // variant yields cos²Φ instead.
        for phi in [0.3, 1.0, -0.8] {
            let p = single(1.0, 0.0, phi);
            let minus = dual_activation_with_sign(&p, 0.4, CrossTermSign::OracleMinus);
            let plus = dual_activation_with_sign(&p, 0.4, CrossTermSign::PrintedPlus);
            assert!((minus - phi.sin().powi(2)).abs() < 1e-12);
            assert!((plus - phi.cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn independence_factorization_at_zero_correlation() {
        // ξ = 0: E[ρ*(u)ρ*(v)] = E[ρ*(u)]² with E[sin(u + π/2)] = e^{-1/2}.
        let p = single(1.0, 1.0, std::f64::consts::FRAC_PI_2);
        let expected = (-1.0f64).exp();
        assert!((dual_activation(&p, 0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = Rng::new(3);
        let cfg = InitConfig::new(2.0, InitScheme::TheoremPdf);
        let h = 1e-6;
        for _ in 0..50 {
            let tau = 1 + (rng.next_u64() % 3) as usize;
            let p = init_layer_params(&mut rng, tau, &cfg);
            for step in 0..9 {
                let xi = -0.99 + 0.2475 * step as f64;
                let analytic = dual_activation_derivative(&p, xi);
                let numeric =
                    (dual_activation(&p, xi + h) - dual_activation(&p, xi - h)) / (2.0 * h);
                // Floor the denominator: central differences carry ~1e-11
                // of roundoff, which swamps the ratio for near-zero slopes.
                let denom = analytic.abs().max(numeric.abs()).max(1e-4);
                assert!(
                    ((analytic - numeric) / denom).abs() < 1e-6,
                    "xi={xi} analytic {analytic} numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn derivative_special_cases() {
        let p = single(1.5, 0.0, 0.7);
        for xi in [-0.5, 0.0, 0.9] {
            assert_eq!(dual_activation_derivative(&p, xi), 0.0);
        }
        // ξ=0, τ=1, Φ=0: ρ̌'(0) = C²Ω²e^{−Ω²}.
        let (c, w) = (1.3, 0.8);
        let p = single(c, w, 0.0);
        let expected = c * c * w * w * (-w * w).exp();
        assert!((dual_activation_derivative(&p, 0.0) - expected).abs() < 1e-12);
    }

    #[test]
    fn large_frequencies_do_not_overflow() {
        let p = ActivationParams::new(vec![1.0, 0.5], vec![30.0, 29.0], vec![0.1, -0.2]).unwrap();
        for xi in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let v = dual_activation(&p, xi);
            assert!(v.is_finite(), "xi={xi} gave {v}");
        }
    }

    #[test]
    fn mc_oracle_matches_closed_form() {
        let p = single(1.0, 1.0, 0.0);
        let mut rng = Rng::new(11);
        let (est, se) = mc_dual_oracle(&p, 1.0, 1_000_000, &mut rng).unwrap();
        let expected = (1.0 - (-2.0f64).exp()) / 2.0;
        assert!((est - expected).abs() < 4.0 * se, "est {est} expected {expected} se {se}");
        assert!(est >= 0.0);
    }

    #[test]
    fn mc_oracle_phase_negation_symmetry() {
        // ρ̌ is invariant under Φ → −Φ (cosines are even in the phase
        // differences/sums).
        let cfg = InitConfig::new(2.0, InitScheme::TheoremPdf);
        let mut rng = Rng::new(13);
        let p = init_layer_params(&mut rng, 3, &cfg);
        let mut negated = p.clone();
        for phi in negated.phases.iter_mut() {
            *phi = -*phi;
        }
        let (a, se_a) = mc_dual_oracle(&p, 0.6, 200_000, &mut Rng::new(14)).unwrap();
        let (b, se_b) = mc_dual_oracle(&negated, 0.6, 200_000, &mut Rng::new(15)).unwrap();
        let se = (se_a * se_a + se_b * se_b).sqrt();
        assert!((a - b).abs() < 4.0 * se);
        assert!(
            (dual_activation(&p, 0.6) - dual_activation(&negated, 0.6)).abs() < 1e-12
        );
    }

    #[test]
    fn recursion_base_and_one_step() {
        let p = single(1.0, 1.0, 0.0);
        let xi = 0.37;
        let v = analytic_ntk_from_correlation(&p, 0, xi, false).unwrap();
        assert_eq!(v.nngp, xi);
        assert_eq!(v.ntk, xi);

        let v = analytic_ntk_from_correlation(&p, 1, xi, false).unwrap();
        let expected_sigma = dual_activation(&p, xi);
        let expected_kernel = expected_sigma + xi * dual_activation_derivative(&p, xi);
        assert!((v.nngp - expected_sigma).abs() < 1e-15);
        assert!((v.ntk - expected_kernel).abs() < 1e-15);
    }

    #[test]
    fn normalized_dual_fixes_unit_correlation() {
        let cfg = InitConfig::new(3.0, InitScheme::TheoremPdf);
        let mut rng = Rng::new(21);
        let p = init_layer_params(&mut rng, 4, &cfg);
        for depth in 0..6 {
            let v = analytic_ntk(&p, depth, &[1.0, 0.0], &[1.0, 0.0], true).unwrap();
            assert!((v.nngp - 1.0).abs() < 1e-12, "depth {depth} sigma {}", v.nngp);
        }
    }

    #[test]
    fn out_of_domain_correlation_rejected() {
        let p = single(1.0, 1.0, 0.0);
        assert!(matches!(
            analytic_ntk(&p, 1, &[2.0], &[2.0], false),
            Err(NtkError::Domain(_))
        ));
    }

    #[test]
    fn plain_sine_dual_reduction() {
        // τ=1, C=1, Φ=0: ρ̌(ξ) = ½e^{−Ω²}(e^{Ω²ξ} − e^{−Ω²ξ}), checked
        // against the Monte-Carlo estimate.
        let w = 1.7;
        let p = single(1.0, w, 0.0);
        for xi in [-0.8, -0.2, 0.5, 0.9] {
            let closed = 0.5 * (-w * w).exp() * ((w * w * xi).exp() - (-w * w * xi).exp());
            assert!((dual_activation(&p, xi) - closed).abs() < 1e-12);
            let (est, se) = mc_dual_oracle(&p, xi, 400_000, &mut Rng::new(31)).unwrap();
            assert!((est - closed).abs() < 4.0 * se.max(1e-12));
        }
    }

    fn scalar_net(kind: ActivationKind, width: usize, seed: u64) -> Network {
        let mut cfg = NetworkConfig::new(1, vec![width, width, width], 1);
        cfg.activation = kind;
        cfg.tau = 5;
        cfg.seed = seed;
        Network::init(cfg).unwrap()
    }

    #[test]
    fn single_weight_kernel_is_input_product() {
        // f(x) = w·x has ∇_w f = x, so K(x, x̃) = x·x̃ plus the bias block
        // contribution; build the pure-weight case by hand.
        let mut cfg = NetworkConfig::new(1, vec![1], 1);
        cfg.activation = ActivationKind::Staf;
        cfg.tau = 1;
        cfg.seed = 1;
        let mut net = Network::init(cfg).unwrap();
        net.layers[0].pass_through = true;
        net.layers[0].weight.data_mut()[0] = 1.0;
        net.layers[0].bias[0] = 0.0;
        net.layers[1].weight.data_mut()[0] = 1.0;
        net.layers[1].bias[0] = 0.0;
        let inputs = Matrix::from_vec(3, 1, vec![0.5, -1.0, 2.0]).unwrap();
        let k = empirical_ntk(&net, &inputs, false).unwrap();
        // ∇ = (x, 1, x, 1): gradient wrt both weights is x (pass-through
        // layer then unit weight), biases contribute 1 each.
        for i in 0..3 {
            for j in 0..3 {
                let (xi, xj) = (inputs.get(i, 0), inputs.get(j, 0));
                assert!((k.matrix.get(i, j) - (2.0 * xi * xj + 2.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_is_symmetric_and_psd() {
        let net = scalar_net(ActivationKind::Staf, 16, 5);
        let grid = crate::train::make_coordinate_grid(&[32]);
        let k = empirical_ntk(&net, &grid, false).unwrap();
        assert!(k.is_symmetric());
        let eig = ntk_spectrum(&k).unwrap();
        let lambda_max = eig.eigenvalues[0];
        let lambda_min = *eig.eigenvalues.last().unwrap();
        assert!(lambda_min >= -1e-8 * lambda_max, "λ_min {lambda_min} λ_max {lambda_max}");
    }

    #[test]
    fn single_input_kernel_is_gradient_norm() {
        let net = scalar_net(ActivationKind::Staf, 8, 9);
        let inputs = Matrix::from_vec(1, 1, vec![0.3]).unwrap();
        let k = empirical_ntk(&net, &inputs, false).unwrap();
        assert_eq!(k.matrix.shape(), (1, 1));
        assert!(k.matrix.get(0, 0) >= 0.0);
    }

    #[test]
    fn activation_parameter_flag_changes_kernel() {
        let net = scalar_net(ActivationKind::Staf, 8, 12);
        let grid = crate::train::make_coordinate_grid(&[8]);
        let without = empirical_ntk(&net, &grid, false).unwrap();
        let with = empirical_ntk(&net, &grid, true).unwrap();
        // Adding coordinates can only grow the diagonal.
        for i in 0..8 {
            assert!(with.matrix.get(i, i) >= without.matrix.get(i, i) - 1e-12);
        }
        assert!(with.matrix.get(0, 0) > without.matrix.get(0, 0));
    }

    #[test]
    fn multi_output_rejected() {
        let mut cfg = NetworkConfig::new(1, vec![4], 2);
        cfg.activation = ActivationKind::Staf;
        cfg.tau = 2;
        cfg.seed = 3;
        let net = Network::init(cfg).unwrap();
        let inputs = Matrix::zeros(2, 1);
        assert!(matches!(empirical_ntk(&net, &inputs, false), Err(NtkError::MultiOutput(2))));
    }

    #[test]
    fn spectrum_trivial_kernels() {
        // Rank-one kernel vvᵀ has a single eigenvalue ‖v‖².
        let v = [1.0, 2.0, -2.0];
        let mut m = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                m.set(i, j, v[i] * v[j]);
            }
        }
        let k = KernelMatrix { matrix: m, provenance: KernelProvenance::Analytic };
        let eig = ntk_spectrum(&k).unwrap();
        assert!((eig.eigenvalues[0] - 9.0).abs() < 1e-10);
        assert!(eig.eigenvalues[1].abs() < 1e-10);

        let k = KernelMatrix { matrix: Matrix::identity(4), provenance: KernelProvenance::Analytic };
        let eig = ntk_spectrum(&k).unwrap();
        assert!(eig.eigenvalues.iter().all(|&l| (l - 1.0).abs() < 1e-12));
        assert_eq!(significant_eigenvalue_count(&eig.eigenvalues, 1e-6), 4);
    }
}
