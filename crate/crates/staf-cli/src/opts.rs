//! Argument structs and the flag/config/default resolution layer.
//!
//! Precedence: command-line flags override config-file keys, which override
//! built-in defaults (task-specific defaults included).

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use staf_core::activation::InitScheme;
use staf_core::mlp::{ActivationKind, InputMapping};
use staf_core::SharingMode;

#[derive(Args, Debug)]
pub struct NetworkFlags {
    /// Hidden width (the reference setup uses 256; desk scale 128).
    #[arg(long)]
    pub width: Option<usize>,
    /// Number of hidden layers.
    #[arg(long)]
    pub layers: Option<usize>,
    /// Activation kind: staf | sine | relu.
    #[arg(long)]
    pub activation: Option<String>,
    /// Sinusoid term count τ.
    #[arg(long)]
    pub tau: Option<usize>,
    /// First-layer frequency scale ω₀.
    #[arg(long)]
    pub omega0: Option<f64>,
    /// Hidden-layer frequency scale (defaults to ω₀).
    #[arg(long)]
    pub omega0_hidden: Option<f64>,
    /// Amplitude scheme: theorem | listing.
    #[arg(long)]
    pub scheme: Option<String>,
    /// Activation sharing: neuron | layer | network.
    #[arg(long)]
    pub sharing: Option<String>,
    /// Positional-encoding frequency count (ReLU baseline only).
    #[arg(long)]
    pub pe: Option<usize>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Grayscale (P5) or RGB (P6) image target.
    #[arg(long, conflicts_with_all = ["wav", "signal"])]
    pub image: Option<PathBuf>,
    /// Mono PCM16 WAV target.
    #[arg(long, conflicts_with = "signal")]
    pub wav: Option<PathBuf>,
    /// 1-D signal target: one value per line.
    #[arg(long)]
    pub signal: Option<PathBuf>,
    /// Output directory for log.csv, summary.json, model.ckpt, recon.*
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub log_every: Option<usize>,
    /// Poisson photon noise with this mean count applied to the target.
    #[arg(long)]
    pub noise_poisson: Option<f64>,
    /// Additive Gaussian noise with this σ applied to the target.
    #[arg(long)]
    pub noise_gaussian: Option<f64>,
    /// Flat key=value config file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub net: NetworkFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub ckpt: PathBuf,
    /// Reference image to score against (also sets the sampling grid).
    #[arg(long, conflicts_with = "wav")]
    pub image: Option<PathBuf>,
    /// Reference WAV to score against.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Bare reconstruction grid "HxW" or "N" when no reference is given.
    #[arg(long)]
    pub dims: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 3)]
    pub tau: usize,
    #[arg(long, default_value = "staf")]
    pub activation: String,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyInitArgs {
    #[arg(long, default_value_t = 5)]
    pub tau: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "theorem")]
    pub scheme: String,
    /// Input coordinate distribution: uniform | gaussian.
    #[arg(long, default_value = "uniform")]
    pub input_dist: String,
    #[arg(long, default_value_t = 30.0)]
    pub omega0: f64,
    #[arg(long, default_value_t = 16)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyKroneckerArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of activated layers L in the random stack.
    #[arg(long, default_value_t = 2)]
    pub depth: usize,
    #[arg(long, default_value_t = 2)]
    pub tau: usize,
    /// Comma-separated widths F₀,F₁,…,F_L (overrides --depth).
    #[arg(long)]
    pub widths: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub inputs: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DelannoyArgs {
    #[arg(long)]
    pub t: u64,
    #[arg(long)]
    pub k: u64,
    /// Also report the expansion ratio |V(τT,K)| / |V(T,K)|.
    #[arg(long)]
    pub tau: Option<u64>,
}

#[derive(Args, Debug)]
pub struct FreqsetArgs {
    /// Lattice dimension T (number of embedding rows).
    #[arg(long)]
    pub t: Option<usize>,
    /// Coordinate dimension D.
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub k: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// CSV file with the embedding matrix Ψ (T rows, D columns); random if
    /// absent.
    #[arg(long)]
    pub psi: Option<PathBuf>,
    /// Write the mapped frequency vectors as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000_000)]
    pub cap: u64,
}

#[derive(Args, Debug)]
pub struct NtkArgs {
    #[arg(long, default_value = "empirical")]
    pub mode: String,
    /// Number of 1-D grid inputs.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 32)]
    pub width: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 5)]
    pub tau: usize,
    #[arg(long, default_value = "staf")]
    pub activation: String,
    #[arg(long, default_value_t = 30.0)]
    pub omega0: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Differentiate activation parameters too (two-phase view off).
    #[arg(long)]
    pub include_activation_params: bool,
    /// Recursion depth for the analytic mode.
    #[arg(long, default_value_t = 3)]
    pub depth: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Kernel file produced by `staf ntk`.
    #[arg(long)]
    pub kernel: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Flag/config/default resolution.
pub struct Resolver {
    config: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
#[error("bad value for {key}: {value:?} ({message})")]
pub struct ResolveError {
    pub key: String,
    pub value: String,
    pub message: String,
}

impl Resolver {
    pub fn new(config: BTreeMap<String, String>) -> Self {
        Self { config }
    }

    /// `flag` beats the config file beats `default`.
    pub fn get<T: std::str::FromStr + Copy>(
        &self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, ResolveError> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.config.get(key) {
            Some(raw) => raw.parse().map_err(|_| ResolveError {
                key: key.into(),
                value: raw.clone(),
                message: "unparseable".into(),
            }),
            None => Ok(default),
        }
    }

    pub fn get_str(&self, key: &str, flag: Option<&str>, default: &str) -> String {
        flag.map(str::to_string)
            .or_else(|| self.config.get(key).cloned())
            .unwrap_or_else(|| default.to_string())
    }
}

pub fn parse_activation(s: &str) -> Result<ActivationKind, ResolveError> {
    match s {
        "staf" => Ok(ActivationKind::Staf),
        "sine" => Ok(ActivationKind::Sine),
        "relu" => Ok(ActivationKind::Relu),
        other => Err(ResolveError {
            key: "activation".into(),
            value: other.into(),
            message: "expected staf | sine | relu".into(),
        }),
    }
}

pub fn parse_scheme(s: &str) -> Result<InitScheme, ResolveError> {
    match s {
        "theorem" => Ok(InitScheme::TheoremPdf),
        "listing" => Ok(InitScheme::ListingCode),
        other => Err(ResolveError {
            key: "scheme".into(),
            value: other.into(),
            message: "expected theorem | listing".into(),
        }),
    }
}

pub fn parse_sharing(s: &str) -> Result<SharingMode, ResolveError> {
    match s {
        "neuron" => Ok(SharingMode::PerNeuron),
        "layer" => Ok(SharingMode::PerLayer),
        "network" => Ok(SharingMode::PerNetwork),
        other => Err(ResolveError {
            key: "sharing".into(),
            value: other.into(),
            message: "expected neuron | layer | network".into(),
        }),
    }
}

pub fn parse_mapping(pe: Option<usize>) -> InputMapping {
    match pe {
        Some(frequencies) if frequencies > 0 => InputMapping::PositionalEncoding { frequencies },
        _ => InputMapping::Identity,
    }
}
