//! Adam training loop, losses, and image/audio quality metrics for
//! coordinate-regression tasks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::DenseMatrix;
use crate::mlp::{backward, forward, GradientBundle, MlpError, Network};
use crate::rng::Rng;

type Matrix = DenseMatrix<f64>;

/// PSNR sentinel for an exact match (zero MSE).
pub const PSNR_CAP_DB: f64 = 200.0;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid task: {0}")]
    BadTask(String),
    #[error("non-finite loss at iteration {iteration}; layer weight norms {layer_norms:?}")]
    NonFinite { iteration: usize, layer_norms: Vec<f64> },
    #[error(transparent)]
    Mlp(#[from] MlpError),
}

/// Mean squared error and its gradient `2(pred − target)/N`.
pub fn mse_loss(pred: &Matrix, target: &Matrix) -> Result<(f64, Matrix), TrainError> {
    if pred.shape() != target.shape() {
        return Err(TrainError::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.data().len() as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut loss = 0.0;
    for (g, (p, t)) in grad.data_mut().iter_mut().zip(pred.data().iter().zip(target.data())) {
        let d = p - t;
        loss += d * d;
        *g = 2.0 * d / n;
    }
    Ok((loss / n, grad))
}

/// One-parameter Adam update with bias correction; shared by the state
/// tracker and the scalar convergence tests.
#[inline]
pub fn adam_update(
    param: &mut f64,
    grad: f64,
    m: &mut f64,
    v: &mut f64,
    step: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) {
    *m = beta1 * *m + (1.0 - beta1) * grad;
    *v = beta2 * *v + (1.0 - beta2) * grad * grad;
    let m_hat = *m / (1.0 - beta1.powi(step as i32));
    let v_hat = *v / (1.0 - beta2.powi(step as i32));
    *param -= lr * m_hat / (v_hat.sqrt() + epsilon);
}

/// First/second moment accumulators mirroring the gradient bundle.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    m: GradientBundle,
    v: GradientBundle,
}

impl AdamState {
    pub fn new(net: &Network) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: GradientBundle::zeros_like(net),
            v: GradientBundle::zeros_like(net),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one Adam step to every parameter of the network.
    pub fn step(&mut self, net: &mut Network, grads: &GradientBundle, lr: f64) {
        self.step += 1;
        let t = self.step;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        for (l, layer) in net.layers.iter_mut().enumerate() {
            let gw = grads.d_weights[l].data();
            let mw = self.m.d_weights[l].data_mut();
            let vw = self.v.d_weights[l].data_mut();
            for (i, p) in layer.weight.data_mut().iter_mut().enumerate() {
                adam_update(p, gw[i], &mut mw[i], &mut vw[i], t, lr, b1, b2, eps);
            }
            for (i, p) in layer.bias.iter_mut().enumerate() {
                adam_update(
                    p,
                    grads.d_biases[l][i],
                    &mut self.m.d_biases[l][i],
                    &mut self.v.d_biases[l][i],
                    t,
                    lr,
                    b1,
                    b2,
                    eps,
                );
            }
        }
        for (g, params) in net.activations.iter_mut().enumerate() {
            let ga = &grads.d_activations[g];
            let ma = &mut self.m.d_activations[g];
            let va = &mut self.v.d_activations[g];
            for t_idx in 0..params.tau() {
                adam_update(
                    &mut params.amplitudes[t_idx],
                    ga.d_amplitudes[t_idx],
                    &mut ma.d_amplitudes[t_idx],
                    &mut va.d_amplitudes[t_idx],
                    t,
                    lr,
                    b1,
                    b2,
                    eps,
                );
                adam_update(
                    &mut params.frequencies[t_idx],
                    ga.d_frequencies[t_idx],
                    &mut ma.d_frequencies[t_idx],
                    &mut va.d_frequencies[t_idx],
                    t,
                    lr,
                    b1,
                    b2,
                    eps,
                );
                adam_update(
                    &mut params.phases[t_idx],
                    ga.d_phases[t_idx],
                    &mut ma.d_phases[t_idx],
                    &mut va.d_phases[t_idx],
                    t,
                    lr,
                    b1,
                    b2,
                    eps,
                );
            }
        }
    }
}

/// A discretely sampled target signal with normalized values: pixels in
/// [0, 1], audio in [−1, 1]. `samples` is row-major over the grid with
/// channels interleaved per sample point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalBuffer {
    pub dims: Vec<usize>,
    pub channels: usize,
    pub samples: Vec<f64>,
}

impl SignalBuffer {
    pub fn new(dims: Vec<usize>, channels: usize, samples: Vec<f64>) -> Result<Self, TrainError> {
        let expected: usize = dims.iter().product::<usize>() * channels;
        if samples.len() != expected {
            return Err(TrainError::Shape(format!(
                "buffer has {} samples, dims {:?} x {} channels need {}",
                samples.len(),
                dims,
                channels,
                expected
            )));
        }
        Ok(Self { dims, channels, samples })
    }

    pub fn points(&self) -> usize {
        self.dims.iter().product()
    }

    /// Targets as a (points × channels) matrix.
    pub fn as_matrix(&self) -> Matrix {
        Matrix::from_vec(self.points(), self.channels, self.samples.clone())
            .expect("consistent buffer")
    }
}

/// Coordinates linearly spaced in [−1, 1] per axis, one row per sample
/// point, row-major over the grid. A singleton axis maps to 0.
pub fn make_coordinate_grid(dims: &[usize]) -> Matrix {
    assert!(!dims.is_empty() && dims.iter().all(|&d| d > 0), "dims must be positive");
    let points: usize = dims.iter().product();
    let d = dims.len();
    let mut out = Matrix::zeros(points, d);
    for p in 0..points {
        let mut rem = p;
        let row = out.row_mut(p);
        for axis in (0..d).rev() {
            let idx = rem % dims[axis];
            rem /= dims[axis];
            row[axis] = if dims[axis] == 1 {
                0.0
            } else {
                -1.0 + 2.0 * idx as f64 / (dims[axis] - 1) as f64
            };
        }
    }
    out
}

/// Peak signal-to-noise ratio in dB against peak value 1.0; exact matches
/// return the 200 dB cap.
pub fn psnr(pred: &SignalBuffer, target: &SignalBuffer) -> Result<f64, TrainError> {
    if pred.dims != target.dims || pred.channels != target.channels {
        return Err(TrainError::Shape("psnr buffers differ in dims".into()));
    }
    Ok(psnr_samples(&pred.samples, &target.samples))
}

pub fn psnr_samples(pred: &[f64], target: &[f64]) -> f64 {
    assert_eq!(pred.len(), target.len());
    let mse = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

/// Structural similarity with an 8×8 uniform sliding window and the
/// standard constants (K₁ = 0.01, K₂ = 0.03, dynamic range 1); channels are
/// evaluated separately and averaged.
pub fn ssim(pred: &SignalBuffer, target: &SignalBuffer) -> Result<f64, TrainError> {
    if pred.dims != target.dims || pred.channels != target.channels {
        return Err(TrainError::Shape("ssim buffers differ in dims".into()));
    }
    if pred.dims.len() != 2 {
        return Err(TrainError::BadTask("ssim expects a 2-D image".into()));
    }
    let (h, w) = (pred.dims[0], pred.dims[1]);
    let window = 8usize.min(h).min(w);
    let c1 = 0.01f64 * 0.01;
    let c2 = 0.03f64 * 0.03;
    let ch = pred.channels;
    let mut total = 0.0;
    for c in 0..ch {
        let at = |buf: &SignalBuffer, y: usize, x: usize| buf.samples[(y * w + x) * ch + c];
        let mut acc = 0.0;
        let mut count = 0usize;
        for y0 in 0..=(h - window) {
            for x0 in 0..=(w - window) {
                let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for dy in 0..window {
                    for dx in 0..window {
                        let a = at(pred, y0 + dy, x0 + dx);
                        let b = at(target, y0 + dy, x0 + dx);
                        sx += a;
                        sy += b;
                        sxx += a * a;
                        syy += b * b;
                        sxy += a * b;
                    }
                }
                let n = (window * window) as f64;
                let mx = sx / n;
                let my = sy / n;
                let vx = (sxx / n - mx * mx).max(0.0);
                let vy = (syy / n - my * my).max(0.0);
                let cov = sxy / n - mx * my;
                let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2))
                    / ((mx * mx + my * my + c1) * (vx + vy + c2));
                acc += s;
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    Ok(total / ch as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskKind {
    Image2d,
    Audio1d,
    Signal1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseModel {
    /// Photon noise: scale intensities by the mean count, draw Poisson,
    /// rescale back.
    Poisson { mean_photons: f64 },
    Gaussian { sigma: f64 },
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub target: SignalBuffer,
    pub iterations: usize,
    pub learning_rate: f64,
    pub noise: Option<NoiseModel>,
    pub seed: u64,
    /// PSNR/SSIM logging interval in iterations.
    pub log_every: usize,
}

impl TaskSpec {
    pub fn new(kind: TaskKind, target: SignalBuffer, iterations: usize, learning_rate: f64) -> Self {
        Self { kind, target, iterations, learning_rate, noise: None, seed: 0, log_every: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub iteration: usize,
    pub loss: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub iterations: usize,
    pub final_loss: f64,
    pub final_psnr: f64,
    pub final_ssim: Option<f64>,
    pub wall_ms: f64,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,loss,psnr,ssim,elapsed_ms\n");
        for r in &self.records {
            let psnr = r.psnr.map_or(String::new(), |v| format!("{v:.6}"));
            let ssim = r.ssim.map_or(String::new(), |v| format!("{v:.6}"));
            out.push_str(&format!(
                "{},{:.12e},{},{},{:.3}\n",
                r.iteration, r.loss, psnr, ssim, r.elapsed_ms
            ));
        }
        out
    }
}

/// Applies the configured noise model to a copy of the buffer. The noise
/// stream is a fixed substream of the task seed.
pub fn apply_noise(target: &SignalBuffer, noise: NoiseModel, seed: u64) -> SignalBuffer {
    let mut rng = Rng::new(seed).substream(0x4e4f_4953); // "NOIS"
    let mut out = target.clone();
    match noise {
        NoiseModel::Poisson { mean_photons } => {
            for v in out.samples.iter_mut() {
                let lambda = (*v).max(0.0) * mean_photons;
                *v = rng.poisson(lambda).expect("valid mean") as f64 / mean_photons;
            }
        }
        NoiseModel::Gaussian { sigma } => {
            for v in out.samples.iter_mut() {
                *v += sigma * rng.gaussian();
            }
        }
    }
    out
}

/// Runs the network over the task's coordinate grid and packs the outputs
/// into a buffer shaped like the target (values unclamped).
pub fn reconstruct(net: &Network, dims: &[usize], channels: usize) -> Result<SignalBuffer, TrainError> {
    let grid = make_coordinate_grid(dims);
    let trace = forward(net, &grid)?;
    SignalBuffer::new(dims.to_vec(), channels, trace.output().data().to_vec())
}

/// Full-batch Adam fit of the network to the task target. Deterministic
/// given the task seed: the only randomness is the optional noise stream.
pub fn fit_signal(mut net: Network, task: &TaskSpec) -> Result<(Network, TrainLog), TrainError> {
    if task.iterations < 1 {
        return Err(TrainError::BadTask("iterations must be >= 1".into()));
    }
    if !(task.learning_rate > 0.0) {
        return Err(TrainError::BadTask("learning rate must be positive".into()));
    }
    if net.config.input_dim != task.target.dims.len() {
        return Err(TrainError::BadTask(format!(
            "network input dim {} does not match task dimensionality {}",
            net.config.input_dim,
            task.target.dims.len()
        )));
    }
    if net.config.output_dim != task.target.channels {
        return Err(TrainError::BadTask(format!(
            "network output dim {} does not match {} channels",
            net.config.output_dim, task.target.channels
        )));
    }
    let effective = match task.noise {
        Some(noise) => apply_noise(&task.target, noise, task.seed),
        None => task.target.clone(),
    };
    let grid = make_coordinate_grid(&task.target.dims);
    let targets = effective.as_matrix();
    let is_image = task.kind == TaskKind::Image2d && task.target.dims.len() == 2;

    let start = std::time::Instant::now();
    let mut adam = AdamState::new(&net);
    let mut records = Vec::with_capacity(task.iterations);
    let mut last_psnr = f64::NAN;
    let mut last_ssim = None;
    let mut last_loss = f64::NAN;
    for it in 1..=task.iterations {
        let trace = forward(&net, &grid)?;
        let (loss, grad) = mse_loss(trace.output(), &targets)?;
        if !loss.is_finite() {
            return Err(TrainError::NonFinite {
                iteration: it,
                layer_norms: net.layers.iter().map(|l| l.weight.frobenius_norm()).collect(),
            });
        }
        let log_metrics = it % task.log_every == 0 || it == task.iterations;
        let (psnr_now, ssim_now) = if log_metrics {
            let pred = SignalBuffer::new(
                task.target.dims.clone(),
                task.target.channels,
                trace.output().data().to_vec(),
            )?;
            let p = psnr(&pred, &effective)?;
            let s = if is_image { Some(ssim(&pred, &effective)?) } else { None };
            (Some(p), s)
        } else {
            (None, None)
        };
        records.push(TrainRecord {
            iteration: it,
            loss,
            psnr: psnr_now,
            ssim: ssim_now,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        });
        if let Some(p) = psnr_now {
            last_psnr = p;
            last_ssim = ssim_now;
        }
        last_loss = loss;

        let bundle = backward(&net, &trace, &grad)?;
        adam.step(&mut net, &bundle, task.learning_rate);
    }
    let log = TrainLog {
        iterations: task.iterations,
        final_loss: last_loss,
        final_psnr: last_psnr,
        final_ssim: last_ssim,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
        records,
    };
    Ok((net, log))
}
