//! Construction of the plain-sine network that computes the same function
//! as a trainable-activation network with one shared parameter triple.
//!
//! For a stack of activated layers `z⁽ˡ⁾ = ρ*(W⁽ˡ⁾z⁽ˡ⁻¹⁾ + B⁽ˡ⁾)` read out
//! through a final affine layer, the equivalent sine network carries the
//! expanded state `z̄⁽ˡ⁾ = sin(W̄⁽ˡ⁾z̄⁽ˡ⁻¹⁾ + B̄⁽ˡ⁾)` with
//!
//! * `W̄⁽¹⁾ = Ω ⊗ W⁽¹⁾`,
//! * `W̄⁽ˡ⁾ = (Ω ⊗ Cᵀ) ⊗ W⁽ˡ⁾` at even depths and
//!   `(Ω ⊗ W⁽ˡ⁾)(Cᵀ ⊗ I)` at odd depths past the first (the two forms are
//!   equal by the mixed-product law; both are exercised),
//! * `B̄⁽ˡ⁾ = Ω ⊗ B⁽ˡ⁾ + Φ ⊗ J`, which reduces to `Φ ⊗ J` for the
//!   bias-free setting the construction is usually stated in,
//! * final readout `W̄ = W_out (Cᵀ ⊗ I)`, which is exactly `Cᵀ ⊗ I` when the
//!   readout is the identity.
//!
//! Intermediate widths grow from `F_l` to `τ·F_l`.

use thiserror::Error;

use crate::activation::SharingMode;
use crate::matrix::{kron, matmul, DenseMatrix, MatrixError};
use crate::mlp::{forward, ActivationKind, Layer, MlpError, Network, NetworkConfig};
use crate::rng::Rng;
use crate::ActivationParams;
use serde::{Deserialize, Serialize};

type Matrix = DenseMatrix<f64>;

#[derive(Debug, Error)]
pub enum KroneckerError {
    #[error("equivalence requires trainable sinusoid activations, got {0:?}")]
    NotStaf(ActivationKind),
    #[error(
        "the construction is stated for a single shared parameter triple; \
         convert the network to PerNetwork sharing first (found {0:?})"
    )]
    SharingNotShared(SharingMode),
    #[error(
        "activated depth {0} is odd; call add_dummy_layer to flip the parity \
         before building the equivalent network"
    )]
    OddActivatedDepth(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Appends a parity dummy: an explicitly marked pass-through layer (identity
/// weight, zero bias) between the last hidden layer and the readout. The
/// stated dummy construction (zero weight, bias equal to the network output)
/// cannot exist as a static layer, so the pass-through realization is used:
/// it flips the counted layer parity and leaves the function untouched.
pub fn add_dummy_layer(net: &Network) -> Network {
    let mut out = net.clone();
    let last_hidden_width = match out.layers.len() {
        0 => unreachable!("networks have at least one layer"),
        1 => out.config.mapped_input_dim(),
        d => out.layers[d - 2].weight.rows(),
    };
    let dummy = Layer {
        weight: Matrix::identity(last_hidden_width),
        bias: vec![0.0; last_hidden_width],
        pass_through: true,
    };
    let final_idx = out.layers.len() - 1;
    out.layers.insert(final_idx, dummy);
    out.config.hidden_widths.push(last_hidden_width);
    out
}

/// Builds the sine network equivalent to `net`.
///
/// Requires PerNetwork sharing and an even count of hidden layers (parity
/// dummies count; see [`add_dummy_layer`]). The returned network computes
/// the identical function; intermediate widths are `τ` times the originals.
pub fn build_equivalent(net: &Network) -> Result<Network, KroneckerError> {
    if net.config.activation != ActivationKind::Staf {
        return Err(KroneckerError::NotStaf(net.config.activation));
    }
    if net.config.sharing != SharingMode::PerNetwork {
        return Err(KroneckerError::SharingNotShared(net.config.sharing));
    }
    let n_hidden = net.depth() - 1;
    if n_hidden % 2 != 0 {
        return Err(KroneckerError::OddActivatedDepth(n_hidden));
    }
    let p: &ActivationParams = &net.activations[0];
    let omega = Matrix::column_vector(p.frequencies.clone());
    let phi = Matrix::column_vector(p.phases.clone());
    let amp_row = Matrix::from_vec(1, p.tau(), p.amplitudes.clone()).expect("row vector");

    let mut layers = Vec::with_capacity(net.depth());
    let mut expanded = false; // becomes true after the first activated layer
    for (idx, layer) in net.layers.iter().enumerate().take(n_hidden) {
        if layer.pass_through {
            let width = if expanded { p.tau() * layer.weight.rows() } else { layer.weight.rows() };
            layers.push(Layer {
                weight: Matrix::identity(width),
                bias: vec![0.0; width],
                pass_through: true,
            });
            continue;
        }
        let f_out = layer.weight.rows();
        let weight = if !expanded {
            kron(&omega, &layer.weight)?
        } else if (idx + 1) % 2 == 0 {
            // even depth: (Ω ⊗ Cᵀ) ⊗ W
            kron(&kron(&omega, &amp_row)?, &layer.weight)?
        } else {
            // odd depth past the first: (Ω ⊗ W)(Cᵀ ⊗ I)
            let left = kron(&omega, &layer.weight)?;
            let right = kron(&amp_row, &Matrix::identity(layer.weight.cols()))?;
            matmul(&left, &right)?
        };
        let bias_col = Matrix::column_vector(layer.bias.clone());
        let ones = Matrix::from_vec(f_out, 1, vec![1.0; f_out]).expect("ones column");
        let mut bias = kron(&omega, &bias_col)?;
        bias.add_assign_scaled(&kron(&phi, &ones)?, 1.0);
        layers.push(Layer {
            weight,
            bias: bias.data().to_vec(),
            pass_through: false,
        });
        expanded = true;
    }

    // Readout: W_out (Cᵀ ⊗ I) collapses the expanded state; equals Cᵀ ⊗ I
    // for an identity readout.
    let readout = &net.layers[n_hidden];
    let collapse = kron(&amp_row, &Matrix::identity(readout.weight.cols()))?;
    let weight = matmul(&readout.weight, &collapse)?;
    layers.push(Layer { weight, bias: readout.bias.clone(), pass_through: false });

    let mut config = NetworkConfig::new(
        net.config.input_dim,
        layers[..layers.len() - 1].iter().map(|l| l.weight.rows()).collect(),
        net.config.output_dim,
    );
    config.activation = ActivationKind::Sine;
    config.sharing = SharingMode::PerLayer;
    config.tau = 1;
    config.omega0 = 1.0;
    config.omega0_hidden = 1.0;
    config.input_mapping = net.config.input_mapping;
    config.seed = net.config.seed;
    let equivalent = Network { config, layers, activations: Vec::new() };
    Ok(equivalent)
}

/// Largest output deviation between two networks over random inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub max_abs_diff: f64,
    pub n_inputs: usize,
    pub seed: u64,
}

pub fn compare_networks(
    a: &Network,
    b: &Network,
    n_inputs: usize,
    rng: &mut Rng,
) -> Result<EquivalenceReport, KroneckerError> {
    let seed = rng.seed();
    let dim = a.config.input_dim;
    let mut inputs = Matrix::zeros(n_inputs, dim);
    for v in inputs.data_mut() {
        *v = rng.uniform(-1.0, 1.0).expect("valid range");
    }
    let ya = forward(a, &inputs)?;
    let yb = forward(b, &inputs)?;
    let max_abs_diff = ya
        .output()
        .data()
        .iter()
        .zip(yb.output().data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max);
    Ok(EquivalenceReport { max_abs_diff, n_inputs, seed })
}

/// Random network in the setting the construction is stated for: a stack of
/// activated layers with zero biases, one shared parameter triple, and an
/// identity readout. `widths` lists `[F₀, F₁, …, F_L]`.
pub fn random_shared_stack(widths: &[usize], tau: usize, rng: &mut Rng) -> Network {
    assert!(widths.len() >= 2, "need at least one activated layer");
    let l = widths.len() - 1;
    let f_out = widths[l];
    // Activated widths F₁..F_L, then an identity readout of width F_L.
    let mut config = NetworkConfig::new(widths[0], widths[1..].to_vec(), f_out);
    config.activation = ActivationKind::Staf;
    config.sharing = SharingMode::PerNetwork;
    config.tau = tau;
    config.seed = rng.seed();

    let mut layers = Vec::with_capacity(l + 1);
    for i in 0..l {
        let mut weight = Matrix::zeros(widths[i + 1], widths[i]);
        for v in weight.data_mut() {
            *v = rng.uniform(-1.0, 1.0).unwrap();
        }
        layers.push(Layer { weight, bias: vec![0.0; widths[i + 1]], pass_through: false });
    }
    layers.push(Layer {
        weight: Matrix::identity(f_out),
        bias: vec![0.0; f_out],
        pass_through: false,
    });

    let amplitudes: Vec<f64> = (0..tau).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
    let frequencies: Vec<f64> = (0..tau).map(|_| rng.uniform(-2.0, 2.0).unwrap()).collect();
    let phases: Vec<f64> = (0..tau)
        .map(|_| rng.uniform(-std::f64::consts::PI, std::f64::consts::PI).unwrap())
        .collect();
    let activations = vec![ActivationParams { amplitudes, frequencies, phases }];
    Network { config, layers, activations }
}
