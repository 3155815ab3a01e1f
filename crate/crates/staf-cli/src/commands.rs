//! Command implementations.

use std::path::{Path, PathBuf};

use serde_json::json;
use staf_core::io::checkpoint::{load_checkpoint, save_checkpoint};
use staf_core::io::config::{load_config, ConfigMap};
use staf_core::io::pnm::{load_pnm, save_pnm};
use staf_core::io::wav::{load_wav, save_wav};
use staf_core::io::{fnv1a64, write_atomic, IoError};
use staf_core::kronecker::{add_dummy_layer, build_equivalent, compare_networks, random_shared_stack};
use staf_core::lattice::{delannoy_count, potential_frequencies, tau_expansion_ratio};
use staf_core::mlp::{grad_check, Network, NetworkConfig};
use staf_core::ntk::{analytic_ntk_from_correlation, empirical_ntk, ntk_spectrum, significant_eigenvalue_count, KernelMatrix, KernelProvenance};
use staf_core::stats::{verify_init_statistics, InputDist};
use staf_core::train::{
    apply_noise, fit_signal, make_coordinate_grid, psnr, reconstruct, ssim, NoiseModel,
    SignalBuffer, TaskKind, TaskSpec,
};
use staf_core::{Matrix, Rng};

use crate::opts::*;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error(transparent)]
    Mlp(#[from] staf_core::mlp::MlpError),
    #[error(transparent)]
    Train(#[from] staf_core::train::TrainError),
    #[error(transparent)]
    Kronecker(#[from] staf_core::kronecker::KroneckerError),
    #[error(transparent)]
    Lattice(#[from] staf_core::lattice::LatticeError),
    #[error(transparent)]
    Ntk(#[from] staf_core::ntk::NtkError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("verification gate failed: {0}")]
    GateFailed(String),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) | CliError::Resolve(_) => "usage",
            CliError::Io(_) | CliError::File(_) => "io",
            CliError::Mlp(_) | CliError::Train(_) => "numeric",
            CliError::Kronecker(_) | CliError::Lattice(_) | CliError::Ntk(_) => "analysis",
            CliError::Json(_) => "serialization",
            CliError::GateFailed(_) => "gate",
        }
    }
}

/// Runs a command; on failure prints `{"error": {...}}` to stderr and maps
/// to a nonzero exit code.
pub fn run(f: impl FnOnce() -> Result<(), CliError>) -> i32 {
    match f() {
        Ok(()) => 0,
        Err(e) => {
            let payload = json!({"error": {"kind": e.kind(), "message": e.to_string()}});
            eprintln!("{payload}");
            match e {
                CliError::Usage(_) | CliError::Resolve(_) => 2,
                _ => 1,
            }
        }
    }
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> Result<(), CliError> {
    let pretty = serde_json::to_string_pretty(value)?;
    println!("{pretty}");
    if let Some(path) = out {
        write_atomic(path, pretty.as_bytes())?;
    }
    Ok(())
}

fn load_signal_csv(path: &Path) -> Result<SignalBuffer, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Usage(format!("{}:{}: cannot parse {line:?} as a number", path.display(), idx + 1))
        })?;
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(CliError::Usage(format!("{} holds no samples", path.display())));
    }
    let n = samples.len();
    Ok(SignalBuffer::new(vec![n], 1, samples)?)
}

struct LoadedTask {
    kind: TaskKind,
    target: SignalBuffer,
    sample_rate: Option<u32>,
    source: PathBuf,
}

fn load_target(args: &FitArgs) -> Result<LoadedTask, CliError> {
    if let Some(path) = &args.image {
        Ok(LoadedTask {
            kind: TaskKind::Image2d,
            target: load_pnm(path)?,
            sample_rate: None,
            source: path.clone(),
        })
    } else if let Some(path) = &args.wav {
        let (target, rate) = load_wav(path)?;
        Ok(LoadedTask { kind: TaskKind::Audio1d, target, sample_rate: Some(rate), source: path.clone() })
    } else if let Some(path) = &args.signal {
        Ok(LoadedTask {
            kind: TaskKind::Signal1d,
            target: load_signal_csv(path)?,
            sample_rate: None,
            source: path.clone(),
        })
    } else {
        Err(CliError::Usage("one of --image, --wav, --signal is required".into()))
    }
}

struct TaskDefaults {
    lr: f64,
    iters: usize,
    tau: usize,
    omega0: f64,
    omega0_hidden: f64,
    width: usize,
    layers: usize,
}

/// Built-in per-task defaults: images use lr 1e-3 with ω₀ = 30; audio uses
/// lr 2.5e-4 with a 3000/30 frequency split; noise-injection (denoising)
/// runs use lr 1.5e-4 with ω₀ = 5 and τ = 2.
fn task_defaults(kind: TaskKind, denoising: bool) -> TaskDefaults {
    let mut d = TaskDefaults {
        lr: 1e-3,
        iters: 500,
        tau: 5,
        omega0: 30.0,
        omega0_hidden: 30.0,
        width: 128,
        layers: 3,
    };
    if kind == TaskKind::Audio1d {
        d.lr = 2.5e-4;
        d.omega0 = 3000.0;
    }
    if denoising {
        d.lr = 1.5e-4;
        d.omega0 = 5.0;
        d.omega0_hidden = 5.0;
        d.tau = 2;
    }
    d
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let loaded = load_target(&args)?;
    let config_map: ConfigMap = match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigMap::new(),
    };
    let r = Resolver::new(config_map);

    let noise = match (args.noise_poisson, args.noise_gaussian) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("choose one of --noise-poisson / --noise-gaussian".into()))
        }
        (Some(mean_photons), None) => Some(NoiseModel::Poisson { mean_photons }),
        (None, Some(sigma)) => Some(NoiseModel::Gaussian { sigma }),
        (None, None) => None,
    };
    let d = task_defaults(loaded.kind, noise.is_some());

    let width = r.get("width", args.net.width, d.width)?;
    let layers = r.get("layers", args.net.layers, d.layers)?;
    let tau = r.get("tau", args.net.tau, d.tau)?;
    let omega0 = r.get("omega0", args.net.omega0, d.omega0)?;
    let omega0_hidden = r.get("omega0_hidden", args.net.omega0_hidden, d.omega0_hidden)?;
    let seed = r.get("seed", args.seed, 0)?;
    let lr = r.get("lr", args.lr, d.lr)?;
    let iters = r.get("iters", args.iters, d.iters)?;
    let log_every = r.get("log_every", args.log_every, 10)?;
    let activation = parse_activation(&r.get_str("activation", args.net.activation.as_deref(), "staf"))?;
    let scheme = parse_scheme(&r.get_str("scheme", args.net.scheme.as_deref(), "theorem"))?;
    let sharing = parse_sharing(&r.get_str("sharing", args.net.sharing.as_deref(), "layer"))?;

    let input_dim = loaded.target.dims.len();
    let mut cfg = NetworkConfig::new(input_dim, vec![width; layers], loaded.target.channels);
    cfg.activation = activation;
    cfg.sharing = sharing;
    cfg.tau = tau;
    cfg.omega0 = omega0;
    cfg.omega0_hidden = omega0_hidden;
    cfg.init_scheme = scheme;
    cfg.input_mapping = parse_mapping(args.net.pe);
    cfg.seed = seed;
    let net = Network::init(cfg.clone())?;

    let mut task = TaskSpec::new(loaded.kind, loaded.target.clone(), iters, lr);
    task.noise = noise;
    task.seed = seed;
    task.log_every = log_every;
    let (net, log) = fit_signal(net, &task)?;

    std::fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("log.csv"), log.to_csv().as_bytes())?;
    save_checkpoint(&net, &args.out.join("model.ckpt"))?;

    let recon = reconstruct(&net, &loaded.target.dims, loaded.target.channels)?;
    let recon_path = match loaded.kind {
        TaskKind::Image2d => {
            let name = if loaded.target.channels == 3 { "recon.ppm" } else { "recon.pgm" };
            let path = args.out.join(name);
            save_pnm(&recon, &path)?;
            path
        }
        TaskKind::Audio1d => {
            let path = args.out.join("recon.wav");
            save_wav(&recon, loaded.sample_rate.unwrap_or(44_100), &path)?;
            path
        }
        TaskKind::Signal1d => {
            let path = args.out.join("recon.csv");
            let body: String = recon.samples.iter().map(|v| format!("{v:.17e}\n")).collect();
            write_atomic(&path, body.as_bytes())?;
            path
        }
    };

    // PSNR of the reconstruction against the clean target; under noise
    // injection this is the denoising score, while the training log tracks
    // the corrupted target.
    let clean_psnr = psnr(&recon, &loaded.target)?;
    let noisy_psnr = match task.noise {
        Some(noise) => Some(psnr(&recon, &apply_noise(&loaded.target, noise, seed))?),
        None => None,
    };
    let summary = json!({
        "task": {
            "kind": format!("{:?}", loaded.kind),
            "source": loaded.source.display().to_string(),
            "dims": loaded.target.dims,
            "channels": loaded.target.channels,
            "iterations": iters,
            "learning_rate": lr,
            "seed": seed,
            "noise": task.noise.map(|n| format!("{n:?}")),
            "sample_rate": loaded.sample_rate,
        },
        "network": cfg,
        "metrics": {
            "final_loss": log.final_loss,
            "final_psnr": log.final_psnr,
            "final_ssim": log.final_ssim,
            "clean_psnr": clean_psnr,
            "noisy_psnr": noisy_psnr,
        },
        "artifacts": {
            "log": "log.csv",
            "checkpoint": "model.ckpt",
            "reconstruction": recon_path.file_name().unwrap().to_string_lossy(),
        },
        "timing": { "wall_ms": log.wall_ms },
    });
    write_atomic(&args.out.join("summary.json"), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn parse_dims(s: &str) -> Result<Vec<usize>, CliError> {
    let dims: Result<Vec<usize>, _> = s.split('x').map(str::parse).collect();
    dims.map_err(|_| CliError::Usage(format!("cannot parse dims {s:?}; expected N or HxW")))
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let net = load_checkpoint(&args.ckpt)?;
    let (reference, sample_rate): (Option<SignalBuffer>, Option<u32>) = match (&args.image, &args.wav) {
        (Some(path), _) => (Some(load_pnm(path)?), None),
        (_, Some(path)) => {
            let (buf, rate) = load_wav(path)?;
            (Some(buf), Some(rate))
        }
        _ => (None, None),
    };
    let dims = match (&reference, &args.dims) {
        (Some(buf), _) => buf.dims.clone(),
        (None, Some(s)) => parse_dims(s)?,
        (None, None) => {
            return Err(CliError::Usage("need --image, --wav, or --dims to size the grid".into()))
        }
    };
    if dims.len() != net.config.input_dim {
        return Err(CliError::Usage(format!(
            "grid rank {} does not match network input dim {}",
            dims.len(),
            net.config.input_dim
        )));
    }
    std::fs::create_dir_all(&args.out)?;
    let recon = reconstruct(&net, &dims, net.config.output_dim)?;
    let recon_name = if dims.len() == 2 {
        let name = if recon.channels == 3 { "recon.ppm" } else { "recon.pgm" };
        save_pnm(&recon, &args.out.join(name))?;
        name
    } else {
        save_wav(&recon, sample_rate.unwrap_or(44_100), &args.out.join("recon.wav"))?;
        "recon.wav"
    };
    let metrics = match &reference {
        Some(target) => {
            let p = psnr(&recon, target)?;
            let s = if dims.len() == 2 { Some(ssim(&recon, target)?) } else { None };
            json!({"psnr": p, "ssim": s})
        }
        None => json!(null),
    };
    let payload = json!({
        "checkpoint": args.ckpt.display().to_string(),
        "dims": dims,
        "reconstruction": recon_name,
        "metrics": metrics,
    });
    write_atomic(&args.out.join("eval.json"), serde_json::to_string_pretty(&payload)?.as_bytes())?;
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

pub fn gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let activation = parse_activation(&args.activation)?;
    let mut cfg = NetworkConfig::new(2, vec![args.width; args.layers], 1);
    cfg.activation = activation;
    cfg.tau = args.tau;
    cfg.omega0 = 3.0;
    cfg.omega0_hidden = 3.0;
    cfg.seed = args.seed;
    let net = Network::init(cfg)?;
    let mut rng = Rng::new(args.seed).substream(1);
    let mut inputs = Matrix::zeros(args.batch, 2);
    for v in inputs.data_mut() {
        *v = rng.uniform(-1.0, 1.0).expect("valid range");
    }
    let mut targets = Matrix::zeros(args.batch, 1);
    for v in targets.data_mut() {
        *v = rng.uniform(-1.0, 1.0).expect("valid range");
    }
    let report = grad_check(&net, &inputs, &targets, args.h, args.tol)?;
    let payload = json!({
        "seed": args.seed,
        "activation": args.activation,
        "width": args.width,
        "layers": args.layers,
        "tau": args.tau,
        "h": args.h,
        "tolerance": args.tol,
        "max_rel_error": report.max_rel_error,
        "worst_param": report.worst_param,
        "n_checked": report.n_checked,
        "n_skipped": report.n_skipped,
        "passed": report.passed,
    });
    emit(&payload, args.out.as_deref())?;
    if report.passed {
        Ok(())
    } else {
        Err(CliError::GateFailed(format!(
            "gradient check: max relative error {:.3e} exceeds {:.1e}",
            report.max_rel_error, args.tol
        )))
    }
}

pub fn verify_init(args: VerifyInitArgs) -> Result<(), CliError> {
    let scheme = parse_scheme(&args.scheme)?;
    let input_dist = match args.input_dist.as_str() {
        "uniform" => InputDist::Uniform,
        "gaussian" => InputDist::Gaussian,
        other => return Err(CliError::Usage(format!("unknown input dist {other:?}"))),
    };
    let mut cfg = NetworkConfig::new(2, vec![args.width; args.layers], 1);
    cfg.tau = args.tau;
    cfg.omega0 = args.omega0;
    cfg.init_scheme = scheme;
    cfg.seed = args.seed;
    let mut rng = Rng::new(args.seed);
    let report = verify_init_statistics(&cfg, &mut rng, args.samples, input_dist)?;
    let within = report.within(4.0);
    let payload = json!({
        "report": report,
        "gate": {"criterion": "every layer within 4 standard errors of N(0,1) moments", "passed": within},
    });
    emit(&payload, args.out.as_deref())?;
    if within {
        Ok(())
    } else {
        Err(CliError::GateFailed(
            "post-activation moments deviate from N(0,1) beyond 4 standard errors".into(),
        ))
    }
}

pub fn verify_kronecker(args: VerifyKroneckerArgs) -> Result<(), CliError> {
    let widths: Vec<usize> = match &args.widths {
        Some(s) => s
            .split(',')
            .map(|w| w.trim().parse())
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("cannot parse widths {s:?}")))?,
        None => {
            let mut w = vec![2usize];
            for i in 0..args.depth {
                w.push(if i % 2 == 0 { 4 } else { 3 });
            }
            w
        }
    };
    if widths.len() < 2 {
        return Err(CliError::Usage("need at least F0,F1".into()));
    }
    let mut rng = Rng::new(args.seed);
    let net = random_shared_stack(&widths, args.tau, &mut rng);
    let activated = net.depth() - 1;
    let (prepared, dummy_added) =
        if activated % 2 == 1 { (add_dummy_layer(&net), true) } else { (net.clone(), false) };
    let equivalent = build_equivalent(&prepared)?;
    let report = compare_networks(&net, &equivalent, args.inputs, &mut Rng::new(args.seed).substream(7))?;
    let passed = report.max_abs_diff < args.tol;
    let payload = json!({
        "max_abs_diff": report.max_abs_diff,
        "n_inputs": report.n_inputs,
        "seed": args.seed,
        "tau": args.tau,
        "widths": widths,
        "activated_layers": activated,
        "dummy_added": dummy_added,
        "tolerance": args.tol,
        "passed": passed,
    });
    emit(&payload, args.out.as_deref())?;
    if passed {
        Ok(())
    } else {
        Err(CliError::GateFailed(format!(
            "kronecker equivalence: max |f̄(r) − f(r)| = {:.3e} exceeds {:.1e}",
            report.max_abs_diff, args.tol
        )))
    }
}

fn biguint_json(v: num_bigint::BigUint) -> serde_json::Value {
    use num_traits::ToPrimitive;
    match v.to_u64() {
        Some(small) if small <= (1u64 << 53) => json!(small),
        _ => json!(v.to_string()),
    }
}

pub fn delannoy(args: DelannoyArgs) -> Result<(), CliError> {
    let count = delannoy_count(args.t, args.k);
    let mut payload = json!({
        "T": args.t,
        "K": args.k,
        "count": biguint_json(count),
    });
    if let Some(tau) = args.tau {
        payload["tau"] = json!(tau);
        payload["ratio"] = json!(tau_expansion_ratio(args.t, args.k, tau));
    }
    emit(&payload, None)?;
    Ok(())
}

fn load_psi_csv(path: &Path) -> Result<Matrix, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse()).collect();
        rows.push(row.map_err(|_| {
            CliError::Usage(format!("{}:{}: bad embedding row", path.display(), idx + 1))
        })?);
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::Usage("embedding CSV must be rectangular and non-empty".into()));
    }
    Ok(Matrix::from_rows(&rows))
}

pub fn freqset(args: FreqsetArgs) -> Result<(), CliError> {
    let psi = match &args.psi {
        Some(path) => load_psi_csv(path)?,
        None => {
            let t = args
                .t
                .ok_or_else(|| CliError::Usage("--t is required without --psi".into()))?;
            let mut rng = Rng::new(args.seed);
            let mut m = Matrix::zeros(t, args.d);
            for v in m.data_mut() {
                *v = rng.gaussian();
            }
            m
        }
    };
    let set = potential_frequencies(&psi, args.k, args.cap)?;
    let lattice_points = set.vectors.len();
    let payload = json!({
        "T": set.psi_shape.0,
        "D": set.psi_shape.1,
        "K": args.k,
        "seed": args.seed,
        "count": lattice_points,
        "distinct": set.distinct,
    });
    println!("{}", serde_json::to_string_pretty(&payload)?);
    if let Some(out) = &args.out {
        let mut body = String::new();
        for v in &set.vectors {
            let row: Vec<String> = v.iter().map(|x| format!("{x:.17e}")).collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        write_atomic(out, body.as_bytes())?;
    }
    Ok(())
}

const KERNEL_MAGIC: &[u8; 4] = b"STFK";

fn save_kernel(kernel: &KernelMatrix, path: &Path) -> Result<(), CliError> {
    let n = kernel.matrix.rows() as u32;
    let mut bytes = Vec::with_capacity(16 + kernel.matrix.data().len() * 8);
    bytes.extend_from_slice(KERNEL_MAGIC);
    bytes.extend_from_slice(&n.to_le_bytes());
    bytes.push(match kernel.provenance {
        KernelProvenance::Analytic => 0,
        KernelProvenance::Empirical => 1,
    });
    for &v in kernel.matrix.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    let sum = fnv1a64(&bytes);
    bytes.extend_from_slice(&sum.to_le_bytes());
    write_atomic(path, &bytes)?;
    Ok(())
}

fn load_kernel(path: &Path) -> Result<KernelMatrix, CliError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 17 || &bytes[..4] != KERNEL_MAGIC {
        return Err(CliError::Io(IoError::Integrity("not a kernel file".into())));
    }
    let (payload, trailer) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(trailer.try_into().expect("8 bytes"));
    if fnv1a64(payload) != stored {
        return Err(CliError::Io(IoError::Integrity("kernel checksum mismatch".into())));
    }
    let n = u32::from_le_bytes(payload[4..8].try_into().expect("4 bytes")) as usize;
    let provenance =
        if payload[8] == 0 { KernelProvenance::Analytic } else { KernelProvenance::Empirical };
    let data: Vec<f64> = payload[9..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if data.len() != n * n {
        return Err(CliError::Io(IoError::Integrity(format!(
            "kernel holds {} values, expected {}",
            data.len(),
            n * n
        ))));
    }
    let matrix = Matrix::from_vec(n, n, data)
        .map_err(|e| CliError::Io(IoError::Integrity(e.to_string())))?;
    Ok(KernelMatrix { matrix, provenance })
}

pub fn ntk(args: NtkArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&args.out)?;
    let kernel = match args.mode.as_str() {
        "empirical" => {
            let activation = parse_activation(&args.activation)?;
            let mut cfg = NetworkConfig::new(1, vec![args.width; args.layers], 1);
            cfg.activation = activation;
            cfg.tau = args.tau;
            cfg.omega0 = args.omega0;
            cfg.omega0_hidden = args.omega0;
            cfg.seed = args.seed;
            let net = Network::init(cfg)?;
            let grid = make_coordinate_grid(&[args.grid]);
            empirical_ntk(&net, &grid, args.include_activation_params)?
        }
        "analytic" => {
            // Embed the 1-D grid on the unit circle so every input lies on
            // the sphere the recursion assumes; correlations are
            // cos(π(t_i − t_j)/2).
            let net_params = {
                let mut cfg = NetworkConfig::new(1, vec![args.width; args.layers], 1);
                cfg.tau = args.tau;
                cfg.omega0 = args.omega0;
                cfg.seed = args.seed;
                Network::init(cfg)?
            };
            let p = net_params.activations.first().cloned().ok_or_else(|| {
                CliError::Usage("analytic mode needs trainable sinusoid activations".into())
            })?;
            let grid = make_coordinate_grid(&[args.grid]);
            let n = args.grid;
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                for j in i..n {
                    let xi = (std::f64::consts::FRAC_PI_2 * (grid.get(i, 0) - grid.get(j, 0))).cos();
                    let v = analytic_ntk_from_correlation(&p, args.layers, xi, true)?;
                    m.set(i, j, v.ntk);
                    m.set(j, i, v.ntk);
                }
            }
            KernelMatrix { matrix: m, provenance: KernelProvenance::Analytic }
        }
        other => return Err(CliError::Usage(format!("unknown ntk mode {other:?}"))),
    };
    let kernel_path = args.out.join("kernel.bin");
    save_kernel(&kernel, &kernel_path)?;
    let payload = json!({
        "mode": args.mode,
        "grid": args.grid,
        "width": args.width,
        "layers": args.layers,
        "tau": args.tau,
        "activation": args.activation,
        "seed": args.seed,
        "include_activation_params": args.include_activation_params,
        "symmetric": kernel.is_symmetric(),
        "kernel": "kernel.bin",
    });
    write_atomic(&args.out.join("kernel.json"), serde_json::to_string_pretty(&payload)?.as_bytes())?;
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}

const EIGENFUNCTIONS_MAGIC: &[u8; 4] = b"STFE";

pub fn spectrum(args: SpectrumArgs) -> Result<(), CliError> {
    let kernel = load_kernel(&args.kernel)?;
    let eig = ntk_spectrum(&kernel)?;
    std::fs::create_dir_all(&args.out)?;

    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in eig.eigenvalues.iter().enumerate() {
        csv.push_str(&format!("{i},{l:.17e}\n"));
    }
    write_atomic(&args.out.join("eigenvalues.csv"), csv.as_bytes())?;

    // Eigenfunction matrix: rows follow the kernel's input grid, columns are
    // eigenvectors in descending-eigenvalue order.
    let v = &eig.eigenvectors;
    let mut bytes = Vec::with_capacity(12 + v.data().len() * 8);
    bytes.extend_from_slice(EIGENFUNCTIONS_MAGIC);
    bytes.extend_from_slice(&(v.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(v.cols() as u32).to_le_bytes());
    for &x in v.data() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    write_atomic(&args.out.join("eigenfunctions.bin"), &bytes)?;

    let lambda_max = eig.eigenvalues.first().copied().unwrap_or(0.0);
    let lambda_min = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let payload = json!({
        "n": eig.eigenvalues.len(),
        "lambda_max": lambda_max,
        "lambda_min": lambda_min,
        "significant_above_1e6": significant_eigenvalue_count(&eig.eigenvalues, 1e-6),
        "psd_within_tolerance": lambda_min >= -1e-8 * lambda_max.max(0.0),
        "eigenvalues": "eigenvalues.csv",
        "eigenfunctions": "eigenfunctions.bin",
    });
    write_atomic(&args.out.join("spectrum.json"), serde_json::to_string_pretty(&payload)?.as_bytes())?;
    println!("{}", serde_json::to_string_pretty(&payload)?);
    Ok(())
}
