//! Coordinate MLP with exact reverse-mode gradients.
//!
//! The network follows the standard form: an optional input mapping γ, a
//! stack of activated layers `z⁽ˡ⁾ = ρ⁽ˡ⁾(W⁽ˡ⁾z⁽ˡ⁻¹⁾ + B⁽ˡ⁾)`, and a final
//! affine layer. Activations are trainable sinusoid sums, plain sine with a
//! frequency scale, or ReLU. Gradient accumulation over the batch uses fixed
//! chunk boundaries so results are identical for every thread count.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activation::{
    init_layer_params, staf_eval, ActivationError, ActivationParams, InitConfig, InitScheme,
    SharingMode,
};
use crate::fastmath::{sine_backward_slice, sine_forward_slice, staf_backward_slice, staf_forward_slice};
use crate::matrix::{matmul, matmul_nt, matmul_tn, DenseMatrix, MatrixError};
use crate::rng::Rng;
use crate::threads;

type Matrix = DenseMatrix<f64>;

/// Rows per work chunk in batched activation passes. Fixed so that chunk
/// boundaries (and therefore reduction order) never depend on thread count.
const ROWS_PER_CHUNK: usize = 256;

#[derive(Debug, Error)]
pub enum MlpError {
    #[error("input has width {got}, network expects {expected}")]
    InputWidth { got: usize, expected: usize },
    #[error("non-finite value produced at layer {layer}")]
    NonFinite { layer: usize },
    #[error("trace does not belong to this network (parameters or shapes differ)")]
    TraceMismatch,
    #[error("output gradient has shape {gr}x{gc}, expected {er}x{ec}")]
    GradShape { gr: usize, gc: usize, er: usize, ec: usize },
    #[error("targets have shape {gr}x{gc}, expected {er}x{ec}")]
    TargetShape { gr: usize, gc: usize, er: usize, ec: usize },
    #[error("invalid network: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Activation(#[from] ActivationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ActivationKind {
    Staf,
    Sine,
    Relu,
}

/// Input mapping γ applied before the first layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum InputMapping {
    #[default]
    Identity,
    /// `[sin(2ᵏπx), cos(2ᵏπx)]` per input dimension for k = 0..frequencies;
    /// provided for the ReLU-with-positional-encoding baseline.
    PositionalEncoding { frequencies: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub output_dim: usize,
    pub hidden_widths: Vec<usize>,
    pub activation: ActivationKind,
    pub sharing: SharingMode,
    pub tau: usize,
    /// First-layer frequency scale: the Ω sampling range for trainable
    /// activations, the first-layer multiplier for plain sine.
    pub omega0: f64,
    /// Sine multiplier for hidden layers past the first.
    pub omega0_hidden: f64,
    pub init_scheme: InitScheme,
    pub input_mapping: InputMapping,
    pub seed: u64,
}

impl NetworkConfig {
    pub fn new(input_dim: usize, hidden_widths: Vec<usize>, output_dim: usize) -> Self {
        Self {
            input_dim,
            output_dim,
            hidden_widths,
            activation: ActivationKind::Staf,
            sharing: SharingMode::PerLayer,
            tau: 5,
            omega0: 30.0,
            omega0_hidden: 30.0,
            init_scheme: InitScheme::TheoremPdf,
            input_mapping: InputMapping::Identity,
            seed: 0,
        }
    }

    /// Number of weight layers (hidden layers plus the final affine layer).
    pub fn depth(&self) -> usize {
        self.hidden_widths.len() + 1
    }

    /// Input width after the γ mapping.
    pub fn mapped_input_dim(&self) -> usize {
        match self.input_mapping {
            InputMapping::Identity => self.input_dim,
            InputMapping::PositionalEncoding { frequencies } => self.input_dim * 2 * frequencies,
        }
    }

    /// Widths of every layer boundary: mapped input, hidden, output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.depth() + 1);
        w.push(self.mapped_input_dim());
        w.extend_from_slice(&self.hidden_widths);
        w.push(self.output_dim);
        w
    }

    fn validate(&self) -> Result<(), MlpError> {
        if self.depth() < 2 {
            return Err(MlpError::BadConfig("need at least one hidden layer".into()));
        }
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_widths.iter().any(|&w| w == 0)
        {
            return Err(MlpError::BadConfig("all widths must be >= 1".into()));
        }
        if self.activation == ActivationKind::Staf && self.tau == 0 {
            return Err(MlpError::BadConfig("tau must be >= 1".into()));
        }
        if !(self.omega0 > 0.0) || !(self.omega0_hidden > 0.0) {
            return Err(MlpError::BadConfig("frequency scales must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `F_l × F_{l−1}`.
    pub weight: Matrix,
    /// Length `F_l`.
    pub bias: Vec<f64>,
    /// Parity dummy: the layer applies no activation (identity pass-through).
    pub pass_through: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetworkConfig,
    pub layers: Vec<Layer>,
    /// Trainable activation groups; empty for sine/ReLU networks. Length is
    /// 1 for network sharing, one per hidden layer for layer sharing, one
    /// per hidden neuron for neuron sharing.
    pub activations: Vec<ActivationParams<f64>>,
}

impl Network {
    /// Builds and initializes a network from its configuration.
    pub fn init(config: NetworkConfig) -> Result<Self, MlpError> {
        config.validate()?;
        let mut rng = Rng::new(config.seed);
        let widths = config.widths();
        let n_hidden = config.hidden_widths.len();

        let mut activations = Vec::new();
        if config.activation == ActivationKind::Staf {
            // The frequency range ω₀ applies to the first hidden layer;
            // later layers draw from ω₀_hidden (the audio task splits them).
            let first = InitConfig::new(config.omega0, config.init_scheme);
            let rest = InitConfig::new(config.omega0_hidden, config.init_scheme);
            let group_layers: Vec<usize> = match config.sharing {
                SharingMode::PerNetwork => vec![0],
                SharingMode::PerLayer => (0..n_hidden).collect(),
                SharingMode::PerNeuron => (0..n_hidden)
                    .flat_map(|l| std::iter::repeat(l).take(config.hidden_widths[l]))
                    .collect(),
            };
            for layer in group_layers {
                let init = if layer == 0 { &first } else { &rest };
                activations.push(init_layer_params(&mut rng, config.tau, init));
            }
        }

        let mut layers = Vec::with_capacity(config.depth());
        for l in 0..config.depth() {
            let fan_in = widths[l];
            let fan_out = widths[l + 1];
            let w_bound = match config.activation {
                ActivationKind::Relu => (6.0 / fan_in as f64).sqrt(),
                ActivationKind::Sine => {
                    if l == 0 {
                        1.0 / fan_in as f64
                    } else {
                        (6.0 / fan_in as f64).sqrt() / config.omega0_hidden
                    }
                }
                ActivationKind::Staf => {
                    if l == 0 {
                        // Wider than the plain-sine first layer so the
                        // one-sided Ω draw still spans several periods of
                        // the input domain.
                        2.0 / fan_in as f64
                    } else {
                        // Scale by the mean effective frequency of the
                        // incoming activation so pre-activations stay O(1).
                        let prev_hidden = l - 1;
                        let omega_eff = match config.sharing {
                            SharingMode::PerNetwork => activations[0].mean_abs_frequency(),
                            SharingMode::PerLayer => activations[prev_hidden].mean_abs_frequency(),
                            SharingMode::PerNeuron => {
                                let base: usize =
                                    config.hidden_widths[..prev_hidden].iter().sum();
                                let width = config.hidden_widths[prev_hidden];
                                (0..width)
                                    .map(|n| activations[base + n].mean_abs_frequency())
                                    .sum::<f64>()
                                    / width as f64
                            }
                        };
                        (6.0 / fan_in as f64).sqrt() / omega_eff.max(1.0)
                    }
                }
            };
            let mut weight = Matrix::zeros(fan_out, fan_in);
            for v in weight.data_mut() {
                *v = rng.uniform(-w_bound, w_bound).expect("valid bound");
            }
            let b_bound = 1.0 / (fan_in as f64).sqrt();
            let bias =
                (0..fan_out).map(|_| rng.uniform(-b_bound, b_bound).expect("valid bound")).collect();
            layers.push(Layer { weight, bias, pass_through: false });
        }
        let net = Self { config, layers, activations };
        net.check_shapes()?;
        Ok(net)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Hidden layers that actually apply an activation.
    pub fn activated_hidden_count(&self) -> usize {
        self.layers[..self.depth() - 1].iter().filter(|l| !l.pass_through).count()
    }

    fn check_shapes(&self) -> Result<(), MlpError> {
        let mut prev = self.config.mapped_input_dim();
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.weight.cols() != prev || layer.bias.len() != layer.weight.rows() {
                return Err(MlpError::BadConfig(format!("layer {l} shape inconsistent")));
            }
            prev = layer.weight.rows();
        }
        if prev != self.config.output_dim {
            return Err(MlpError::BadConfig("output width mismatch".into()));
        }
        Ok(())
    }

    /// Activation group index for a hidden layer/neuron; pass-through layers
    /// do not consume groups.
    pub fn activation_group(&self, layer: usize, neuron: usize) -> usize {
        match self.config.sharing {
            SharingMode::PerNetwork => 0,
            SharingMode::PerLayer => self.layers[..layer]
                .iter()
                .take(self.depth() - 1)
                .filter(|l| !l.pass_through)
                .count(),
            SharingMode::PerNeuron => {
                let base: usize = self.layers[..layer]
                    .iter()
                    .enumerate()
                    .take(self.depth() - 1)
                    .filter(|(_, l)| !l.pass_through)
                    .map(|(i, _)| self.layers[i].weight.rows())
                    .sum();
                base + neuron
            }
        }
    }

    /// Cheap content hash binding traces to the exact parameter state.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut mix = |v: u64| {
            h ^= v;
            h = h.rotate_left(27).wrapping_mul(0x1000_0001_b3);
        };
        mix(self.layers.len() as u64);
        for layer in &self.layers {
            mix(layer.weight.rows() as u64);
            mix(layer.weight.cols() as u64);
            mix(layer.pass_through as u64);
            for &v in layer.weight.data() {
                mix(v.to_bits());
            }
            for &v in &layer.bias {
                mix(v.to_bits());
            }
        }
        for p in &self.activations {
            for &v in p.amplitudes.iter().chain(&p.frequencies).chain(&p.phases) {
                mix(v.to_bits());
            }
        }
        h
    }

    /// Applies γ to raw inputs.
    pub fn map_inputs(&self, inputs: &Matrix) -> Result<Matrix, MlpError> {
        if inputs.cols() != self.config.input_dim {
            return Err(MlpError::InputWidth {
                got: inputs.cols(),
                expected: self.config.input_dim,
            });
        }
        match self.config.input_mapping {
            InputMapping::Identity => Ok(inputs.clone()),
            InputMapping::PositionalEncoding { frequencies } => {
                let d = self.config.input_dim;
                let mut out = Matrix::zeros(inputs.rows(), d * 2 * frequencies);
                for r in 0..inputs.rows() {
                    for c in 0..d {
                        let x = inputs.get(r, c);
                        for k in 0..frequencies {
                            let angle = (1u64 << k) as f64 * std::f64::consts::PI * x;
                            out.set(r, (c * frequencies + k) * 2, angle.sin());
                            out.set(r, (c * frequencies + k) * 2 + 1, angle.cos());
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Per-layer pre/post activations for one batch.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// `z⁽⁰⁾ = γ(inputs)`.
    pub mapped_input: Matrix,
    /// `a⁽ˡ⁾` for every weight layer; the last entry is the network output.
    pub pre_activations: Vec<Matrix>,
    /// `z⁽ˡ⁾` for hidden layers.
    pub post_activations: Vec<Matrix>,
    net_fingerprint: u64,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.pre_activations.last().expect("at least one layer")
    }
}

/// Gradients of a scalar loss with respect to every network parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_activations: Vec<ActivationGrads>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivationGrads {
    pub d_amplitudes: Vec<f64>,
    pub d_frequencies: Vec<f64>,
    pub d_phases: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            d_weights: net
                .layers
                .iter()
                .map(|l| Matrix::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
            d_activations: net
                .activations
                .iter()
                .map(|p| ActivationGrads {
                    d_amplitudes: vec![0.0; p.tau()],
                    d_frequencies: vec![0.0; p.tau()],
                    d_phases: vec![0.0; p.tau()],
                })
                .collect(),
        }
    }
}

/// Forward pass over a batch; records every pre- and post-activation.
pub fn forward(net: &Network, inputs: &Matrix) -> Result<ForwardTrace, MlpError> {
    let mapped = net.map_inputs(inputs)?;
    let depth = net.depth();
    let mut pre: Vec<Matrix> = Vec::with_capacity(depth);
    let mut post: Vec<Matrix> = Vec::with_capacity(depth - 1);
    for l in 0..depth {
        let layer = &net.layers[l];
        let z_prev = if l == 0 { &mapped } else { &post[l - 1] };
        let mut a = matmul_nt(z_prev, &layer.weight)?;
        add_bias(&mut a, &layer.bias);
        if !a.is_finite() {
            return Err(MlpError::NonFinite { layer: l });
        }
        if l + 1 < depth {
            let z = apply_hidden_activation(net, l, &a);
            if !z.is_finite() {
                return Err(MlpError::NonFinite { layer: l });
            }
            post.push(z);
        }
        pre.push(a);
    }
    Ok(ForwardTrace {
        mapped_input: mapped,
        pre_activations: pre,
        post_activations: post,
        net_fingerprint: net.fingerprint(),
    })
}

fn add_bias(a: &mut Matrix, bias: &[f64]) {
    let cols = a.cols();
    for r in 0..a.rows() {
        let row = a.row_mut(r);
        for c in 0..cols {
            row[c] += bias[c];
        }
    }
}

fn apply_hidden_activation(net: &Network, layer: usize, a: &Matrix) -> Matrix {
    if net.layers[layer].pass_through {
        return a.clone();
    }
    match net.config.activation {
        ActivationKind::Relu => a.map(|v| v.max(0.0)),
        ActivationKind::Sine => {
            let omega =
                if layer == 0 { net.config.omega0 } else { net.config.omega0_hidden };
            let mut z = Matrix::zeros(a.rows(), a.cols());
            let cols = a.cols();
            let a_data = a.data();
            threads::for_each_chunk_mut(z.data_mut(), ROWS_PER_CHUNK * cols, |_, start, chunk| {
                sine_forward_slice(&a_data[start..start + chunk.len()], chunk, omega);
            });
            z
        }
        ActivationKind::Staf => match net.config.sharing {
            SharingMode::PerNeuron => {
                let mut z = Matrix::zeros(a.rows(), a.cols());
                for r in 0..a.rows() {
                    for c in 0..a.cols() {
                        let p = &net.activations[net.activation_group(layer, c)];
                        z.set(r, c, staf_eval(p, a.get(r, c)));
                    }
                }
                z
            }
            _ => {
                let p = &net.activations[net.activation_group(layer, 0)];
                let mut z = Matrix::zeros(a.rows(), a.cols());
                let cols = a.cols();
                let a_data = a.data();
                threads::for_each_chunk_mut(
                    z.data_mut(),
                    ROWS_PER_CHUNK * cols,
                    |_, start, chunk| {
                        staf_forward_slice(
                            &a_data[start..start + chunk.len()],
                            chunk,
                            &p.amplitudes,
                            &p.frequencies,
                            &p.phases,
                        );
                    },
                );
                z
            }
        },
    }
}

/// Reverse pass: exact gradients of the scalar loss whose output gradient is
/// supplied. Batch accumulation runs in fixed chunk order.
pub fn backward(
    net: &Network,
    trace: &ForwardTrace,
    output_grad: &Matrix,
) -> Result<GradientBundle, MlpError> {
    if trace.net_fingerprint != net.fingerprint() {
        return Err(MlpError::TraceMismatch);
    }
    let out = trace.output();
    if output_grad.shape() != out.shape() {
        return Err(MlpError::GradShape {
            gr: output_grad.rows(),
            gc: output_grad.cols(),
            er: out.rows(),
            ec: out.cols(),
        });
    }
    let depth = net.depth();
    let mut bundle = GradientBundle::zeros_like(net);
    let mut grad = output_grad.clone(); // dL/da at the current layer
    for l in (0..depth).rev() {
        let z_prev = if l == 0 { &trace.mapped_input } else { &trace.post_activations[l - 1] };
        bundle.d_weights[l] = matmul_tn(&grad, z_prev)?;
        let db = &mut bundle.d_biases[l];
        for r in 0..grad.rows() {
            let row = grad.row(r);
            for c in 0..row.len() {
                db[c] += row[c];
            }
        }
        if l == 0 {
            break;
        }
        let upstream = matmul(&grad, &net.layers[l].weight)?; // dL/dz^{(l-1)}
        grad = backward_hidden_activation(
            net,
            l - 1,
            &trace.pre_activations[l - 1],
            &upstream,
            &mut bundle,
        );
    }
    Ok(bundle)
}

/// Converts dL/dz into dL/da for hidden layer `layer` and accumulates
/// activation-parameter gradients.
fn backward_hidden_activation(
    net: &Network,
    layer: usize,
    a: &Matrix,
    upstream: &Matrix,
    bundle: &mut GradientBundle,
) -> Matrix {
    if net.layers[layer].pass_through {
        return upstream.clone();
    }
    match net.config.activation {
        ActivationKind::Relu => {
            let mut da = upstream.clone();
            for (g, &x) in da.data_mut().iter_mut().zip(a.data()) {
                if x <= 0.0 {
                    *g = 0.0;
                }
            }
            da
        }
        ActivationKind::Sine => {
            let omega =
                if layer == 0 { net.config.omega0 } else { net.config.omega0_hidden };
            let mut da = Matrix::zeros(a.rows(), a.cols());
            let cols = a.cols();
            let a_data = a.data();
            let u_data = upstream.data();
            threads::for_each_chunk_mut(da.data_mut(), ROWS_PER_CHUNK * cols, |_, start, chunk| {
                let end = start + chunk.len();
                sine_backward_slice(&a_data[start..end], &u_data[start..end], chunk, omega);
            });
            da
        }
        ActivationKind::Staf => match net.config.sharing {
            SharingMode::PerNeuron => {
                let mut da = Matrix::zeros(a.rows(), a.cols());
                for r in 0..a.rows() {
                    for c in 0..a.cols() {
                        let group = net.activation_group(layer, c);
                        let p = &net.activations[group];
                        let x = a.get(r, c);
                        let u = upstream.get(r, c);
                        let g = &mut bundle.d_activations[group];
                        let mut dadx = 0.0;
                        for t in 0..p.tau() {
                            let angle = p.frequencies[t] * x + p.phases[t];
                            let (s, co) = angle.sin_cos();
                            g.d_amplitudes[t] += u * s;
                            g.d_frequencies[t] += u * p.amplitudes[t] * x * co;
                            g.d_phases[t] += u * p.amplitudes[t] * co;
                            dadx += p.amplitudes[t] * p.frequencies[t] * co;
                        }
                        da.set(r, c, u * dadx);
                    }
                }
                da
            }
            _ => {
                let group = net.activation_group(layer, 0);
                let p = net.activations[group].clone();
                let tau = p.tau();
                let cols = a.cols();
                let a_data = a.data();
                let u_data = upstream.data();
                let mut da = Matrix::zeros(a.rows(), a.cols());

                // Per-chunk partial parameter gradients, merged in chunk
                // order so the sum is thread-count independent.
                let chunk_len = ROWS_PER_CHUNK * cols;
                let da_data = da.data_mut();
                let results = threads::map_chunks(a_data.len(), chunk_len, |start, end| {
                    let mut da_local = vec![0.0; end - start];
                    let sums = staf_backward_slice(
                        &a_data[start..end],
                        &u_data[start..end],
                        &mut da_local,
                        &p.amplitudes,
                        &p.frequencies,
                        &p.phases,
                    );
                    (sums, da_local)
                });
                let g = &mut bundle.d_activations[group];
                for (idx, ((dc, dw, dphi), da_local)) in results.into_iter().enumerate() {
                    let start = idx * chunk_len;
                    da_data[start..start + da_local.len()].copy_from_slice(&da_local);
                    for t in 0..tau {
                        g.d_amplitudes[t] += dc[t];
                        g.d_frequencies[t] += dw[t];
                        g.d_phases[t] += dphi[t];
                    }
                }
                da
            }
        },
    }
}

/// Flat parameter catalogue used by the gradient checker and optimizers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamRef {
    Weight { layer: usize, index: usize },
    Bias { layer: usize, index: usize },
    Amplitude { group: usize, term: usize },
    Frequency { group: usize, term: usize },
    Phase { group: usize, term: usize },
}

impl std::fmt::Display for ParamRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamRef::Weight { layer, index } => write!(f, "W[{layer}][{index}]"),
            ParamRef::Bias { layer, index } => write!(f, "B[{layer}][{index}]"),
            ParamRef::Amplitude { group, term } => write!(f, "C[{group}][{term}]"),
            ParamRef::Frequency { group, term } => write!(f, "Omega[{group}][{term}]"),
            ParamRef::Phase { group, term } => write!(f, "Phi[{group}][{term}]"),
        }
    }
}

impl Network {
    pub fn param_refs(&self) -> Vec<ParamRef> {
        let mut out = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for i in 0..layer.weight.data().len() {
                out.push(ParamRef::Weight { layer: l, index: i });
            }
            for i in 0..layer.bias.len() {
                out.push(ParamRef::Bias { layer: l, index: i });
            }
        }
        for (g, p) in self.activations.iter().enumerate() {
            for t in 0..p.tau() {
                out.push(ParamRef::Amplitude { group: g, term: t });
                out.push(ParamRef::Frequency { group: g, term: t });
                out.push(ParamRef::Phase { group: g, term: t });
            }
        }
        out
    }

    pub fn param_add(&mut self, r: ParamRef, delta: f64) {
        match r {
            ParamRef::Weight { layer, index } => self.layers[layer].weight.data_mut()[index] += delta,
            ParamRef::Bias { layer, index } => self.layers[layer].bias[index] += delta,
            ParamRef::Amplitude { group, term } => self.activations[group].amplitudes[term] += delta,
            ParamRef::Frequency { group, term } => self.activations[group].frequencies[term] += delta,
            ParamRef::Phase { group, term } => self.activations[group].phases[term] += delta,
        }
    }

    pub fn grad_value(bundle: &GradientBundle, r: ParamRef) -> f64 {
        match r {
            ParamRef::Weight { layer, index } => bundle.d_weights[layer].data()[index],
            ParamRef::Bias { layer, index } => bundle.d_biases[layer][index],
            ParamRef::Amplitude { group, term } => bundle.d_activations[group].d_amplitudes[term],
            ParamRef::Frequency { group, term } => bundle.d_activations[group].d_frequencies[term],
            ParamRef::Phase { group, term } => bundle.d_activations[group].d_phases[term],
        }
    }
}

/// Mean-squared-error loss value; the scalar loss under gradient checking.
fn mse_scalar(pred: &Matrix, target: &Matrix) -> f64 {
    let n = pred.data().len() as f64;
    pred.data().iter().zip(target.data()).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub n_checked: usize,
    /// Coordinates skipped because a ±h perturbation crossed a ReLU kink.
    pub n_skipped: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Magnitude floor for the relative-error denominator; below it the check
/// is effectively absolute, keeping finite-difference roundoff out of the
/// verdict for near-zero coordinates.
const REL_ERR_FLOOR: f64 = 1e-4;

/// Central-finite-difference check of every parameter gradient under the
/// mean-squared-error loss.
pub fn grad_check(
    net: &Network,
    inputs: &Matrix,
    targets: &Matrix,
    h: f64,
    tol: f64,
) -> Result<CheckReport, MlpError> {
    assert!(h > 0.0, "step must be positive");
    let trace = forward(net, inputs)?;
    if targets.shape() != trace.output().shape() {
        return Err(MlpError::TargetShape {
            gr: targets.rows(),
            gc: targets.cols(),
            er: trace.output().rows(),
            ec: trace.output().cols(),
        });
    }
    let n = trace.output().data().len() as f64;
    let mut loss_grad = Matrix::zeros(targets.rows(), targets.cols());
    for (g, (p, t)) in
        loss_grad.data_mut().iter_mut().zip(trace.output().data().iter().zip(targets.data()))
    {
        *g = 2.0 * (p - t) / n;
    }
    let bundle = backward(net, &trace, &loss_grad)?;

    let relu = net.config.activation == ActivationKind::Relu;
    let mut report = CheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        n_checked: 0,
        n_skipped: 0,
        tolerance: tol,
        passed: true,
    };
    let mut probe = net.clone();
    for r in net.param_refs() {
        probe.param_add(r, h);
        let trace_plus = forward(&probe, inputs)?;
        let loss_plus = mse_scalar(trace_plus.output(), targets);
        probe.param_add(r, -2.0 * h);
        let trace_minus = forward(&probe, inputs)?;
        let loss_minus = mse_scalar(trace_minus.output(), targets);
        probe.param_add(r, h);

        if relu && relu_masks_differ(&trace_plus, &trace_minus) {
            report.n_skipped += 1;
            continue;
        }
        let numeric = (loss_plus - loss_minus) / (2.0 * h);
        let analytic = Network::grad_value(&bundle, r);
        let rel = (analytic - numeric).abs()
            / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
        report.n_checked += 1;
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_param = Some(r.to_string());
        }
    }
    report.passed = report.max_rel_error < tol;
    Ok(report)
}

/// True when the two perturbed forward passes disagree on any ReLU
/// activation sign, i.e. the perturbation stepped across a kink.
fn relu_masks_differ(a: &ForwardTrace, b: &ForwardTrace) -> bool {
    let hidden = a.pre_activations.len() - 1;
    for l in 0..hidden {
        let pa = &a.pre_activations[l];
        let pb = &b.pre_activations[l];
        for (x, y) in pa.data().iter().zip(pb.data()) {
            if (*x > 0.0) != (*y > 0.0) {
                return true;
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_inputs(rng: &mut Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0).unwrap()).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn small_config(activation: ActivationKind) -> NetworkConfig {
        let mut cfg = NetworkConfig::new(2, vec![16, 16, 16], 1);
        cfg.activation = activation;
        cfg.tau = 3;
        cfg.omega0 = 3.0;
        cfg.omega0_hidden = 3.0;
        cfg.seed = 11;
        cfg
    }

    #[test]
    fn zero_network_with_zero_phase_outputs_zero() {
        let mut cfg = small_config(ActivationKind::Staf);
        cfg.hidden_widths = vec![4];
        let mut net = Network::init(cfg).unwrap();
        for layer in &mut net.layers {
            layer.weight.data_mut().fill(0.0);
            layer.bias.fill(0.0);
        }
        for p in &mut net.activations {
            p.phases.fill(0.0);
        }
        let mut rng = Rng::new(1);
        let inputs = random_inputs(&mut rng, 5, 2);
        let trace = forward(&net, &inputs).unwrap();
        assert!(trace.output().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_amplitudes_reduce_to_affine_of_zero() {
        // With C = 0 the hidden activation contributes nothing, so the
        // output is exactly the final layer's affine map of z = 0.
        let mut cfg = small_config(ActivationKind::Staf);
        cfg.hidden_widths = vec![8];
        let mut net = Network::init(cfg).unwrap();
        for p in &mut net.activations {
            p.amplitudes.fill(0.0);
        }
        let mut rng = Rng::new(2);
        let inputs = random_inputs(&mut rng, 7, 2);
        let trace = forward(&net, &inputs).unwrap();
        let expected = net.layers[1].bias[0];
        for r in 0..7 {
            assert!((trace.output().get(r, 0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn staf_with_single_sine_term_matches_sine_network() {
        let mut sine_cfg = small_config(ActivationKind::Sine);
        sine_cfg.omega0 = 7.0;
        sine_cfg.omega0_hidden = 2.0;
        let sine = Network::init(sine_cfg).unwrap();

        // Equivalent trainable-activation network: one term, C = 1, Φ = 0,
        // Ω = 1, with the frequency scale folded into weights and biases.
        let mut staf_cfg = small_config(ActivationKind::Staf);
        staf_cfg.tau = 1;
        let mut staf = Network::init(staf_cfg).unwrap();
        let n_layers = staf.layers.len();
        for (l, layer) in staf.layers.iter_mut().enumerate() {
            let omega = if l == 0 { 7.0 } else { 2.0 };
            layer.weight = sine.layers[l].weight.clone();
            layer.bias = sine.layers[l].bias.clone();
            if l + 1 < n_layers {
                layer.weight = layer.weight.scale(omega);
                for b in &mut layer.bias {
                    *b *= omega;
                }
            }
        }
        for p in &mut staf.activations {
            p.amplitudes = vec![1.0];
            p.frequencies = vec![1.0];
            p.phases = vec![0.0];
        }
        let mut rng = Rng::new(3);
        let inputs = random_inputs(&mut rng, 20, 2);
        let a = forward(&sine, &inputs).unwrap();
        let b = forward(&staf, &inputs).unwrap();
        for (x, y) in a.output().data().iter().zip(b.output().data()) {
            assert!((x - y).abs() < 1e-15, "{x} vs {y}");
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let inputs = Matrix::zeros(3, 5);
        assert!(matches!(forward(&net, &inputs), Err(MlpError::InputWidth { .. })));
    }

    #[test]
    fn forward_reports_nonfinite_layer() {
        let mut net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        net.layers[1].weight.data_mut()[0] = f64::INFINITY;
        let mut rng = Rng::new(4);
        let inputs = random_inputs(&mut rng, 2, 2);
        match forward(&net, &inputs) {
            Err(MlpError::NonFinite { layer }) => assert_eq!(layer, 1),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let mut rng = Rng::new(5);
        let inputs = random_inputs(&mut rng, 33, 2);
        let a = forward(&net, &inputs).unwrap();
        let b = forward(&net, &inputs).unwrap();
        assert_eq!(a.output().data(), b.output().data());
    }

    #[test]
    fn batch_invariance() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let mut rng = Rng::new(6);
        let batch = random_inputs(&mut rng, 9, 2);
        let full = forward(&net, &batch).unwrap();
        for r in 0..batch.rows() {
            let row = Matrix::from_vec(1, 2, batch.row(r).to_vec()).unwrap();
            let single = forward(&net, &row).unwrap();
            for c in 0..full.output().cols() {
                assert!((full.output().get(r, c) - single.output().get(0, c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_output_grad_gives_zero_bundle() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let mut rng = Rng::new(7);
        let inputs = random_inputs(&mut rng, 4, 2);
        let trace = forward(&net, &inputs).unwrap();
        let zeros = Matrix::zeros(4, 1);
        let bundle = backward(&net, &trace, &zeros).unwrap();
        assert_eq!(bundle, GradientBundle::zeros_like(&net));
    }

    #[test]
    fn duplicated_rows_double_gradient() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let mut rng = Rng::new(8);
        let single = random_inputs(&mut rng, 1, 2);
        let double =
            Matrix::from_vec(2, 2, [single.row(0), single.row(0)].concat()).unwrap();
        let ones1 = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let ones2 = Matrix::from_vec(2, 1, vec![1.0, 1.0]).unwrap();
        let t1 = forward(&net, &single).unwrap();
        let b1 = backward(&net, &t1, &ones1).unwrap();
        let t2 = forward(&net, &double).unwrap();
        let b2 = backward(&net, &t2, &ones2).unwrap();
        for (g1, g2) in b1.d_weights.iter().zip(&b2.d_weights) {
            for (x, y) in g1.data().iter().zip(g2.data()) {
                assert!((2.0 * x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trace_net_mismatch_detected() {
        let net = Network::init(small_config(ActivationKind::Staf)).unwrap();
        let mut other = net.clone();
        other.layers[0].weight.data_mut()[0] += 0.5;
        let mut rng = Rng::new(9);
        let inputs = random_inputs(&mut rng, 3, 2);
        let trace = forward(&net, &inputs).unwrap();
        let grad = Matrix::zeros(3, 1);
        assert!(matches!(backward(&other, &trace, &grad), Err(MlpError::TraceMismatch)));
    }

    // Central-difference oracle over every parameter for all activation
    // kinds and sharing modes.
    #[test]
    fn gradients_match_finite_differences() {
        for (kind, sharing) in [
            (ActivationKind::Staf, SharingMode::PerLayer),
            (ActivationKind::Staf, SharingMode::PerNetwork),
            (ActivationKind::Staf, SharingMode::PerNeuron),
            (ActivationKind::Sine, SharingMode::PerLayer),
            (ActivationKind::Relu, SharingMode::PerLayer),
        ] {
            for seed in 0..3u64 {
                let mut cfg = NetworkConfig::new(2, vec![6, 5], 2);
                cfg.activation = kind;
                cfg.sharing = sharing;
                cfg.tau = 3;
                cfg.omega0 = 3.0;
                cfg.omega0_hidden = 2.0;
                cfg.seed = 100 + seed;
                let net = Network::init(cfg).unwrap();
                let mut rng = Rng::new(200 + seed);
                let inputs = random_inputs(&mut rng, 5, 2);
                let targets = random_inputs(&mut rng, 5, 2);
                let report = grad_check(&net, &inputs, &targets, 1e-6, 1e-5).unwrap();
                assert!(
                    report.passed,
                    "kind {kind:?} sharing {sharing:?} seed {seed}: max rel {} at {:?}",
                    report.max_rel_error, report.worst_param
                );
            }
        }
    }

    #[test]
    fn linear_network_checks_to_high_precision() {
        // A pass-through hidden layer makes the whole map affine, where the
        // central difference of a quadratic loss is exact to rounding.
        let mut cfg = NetworkConfig::new(3, vec![4], 2);
        cfg.activation = ActivationKind::Staf;
        cfg.seed = 77;
        let mut net = Network::init(cfg).unwrap();
        net.layers[0].pass_through = true;
        let mut rng = Rng::new(78);
        let inputs = random_inputs(&mut rng, 6, 3);
        let targets = random_inputs(&mut rng, 6, 2);
        // For an affine map the loss is exactly quadratic in every
        // parameter, so the central difference is exact at any step; a
        // larger h keeps f64 roundoff out of the quotient.
        let report = grad_check(&net, &inputs, &targets, 1e-3, 1e-9).unwrap();
        assert!(report.passed, "max rel {}", report.max_rel_error);
    }

    #[test]
    fn relu_kink_is_flagged_and_skipped() {
        let mut cfg = NetworkConfig::new(1, vec![1], 1);
        cfg.activation = ActivationKind::Relu;
        cfg.seed = 5;
        let mut net = Network::init(cfg).unwrap();
        // Put the single hidden pre-activation exactly on the kink for x=0.5:
        // a = w*x + b = 0.
        net.layers[0].weight.data_mut()[0] = 1.0;
        net.layers[0].bias[0] = -0.5;
        let inputs = Matrix::from_vec(1, 1, vec![0.5]).unwrap();
        let targets = Matrix::from_vec(1, 1, vec![1.0]).unwrap();
        let report = grad_check(&net, &inputs, &targets, 1e-6, 1e-5).unwrap();
        assert!(report.n_skipped > 0, "expected kink coordinates to be skipped");
        assert!(report.passed, "non-kink coordinates should pass: {}", report.max_rel_error);
    }

    #[test]
    fn positional_encoding_shapes_and_gradients() {
        let mut cfg = NetworkConfig::new(2, vec![8], 1);
        cfg.activation = ActivationKind::Relu;
        cfg.input_mapping = InputMapping::PositionalEncoding { frequencies: 3 };
        cfg.seed = 13;
        let net = Network::init(cfg).unwrap();
        assert_eq!(net.layers[0].weight.cols(), 2 * 2 * 3);
        let mut rng = Rng::new(14);
        let inputs = random_inputs(&mut rng, 8, 2);
        let targets = random_inputs(&mut rng, 8, 1);
        let report = grad_check(&net, &inputs, &targets, 1e-6, 1e-5).unwrap();
        // Kink crossings may be skipped; remaining coordinates must pass.
        assert!(report.passed, "max rel {}", report.max_rel_error);
    }
}
