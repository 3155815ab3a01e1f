use std::time::Instant;
use staf_core::fastmath::{sin_slice, staf_forward_slice, staf_backward_slice};
use staf_core::mlp::{backward, forward, Network, NetworkConfig, ActivationKind};
use staf_core::train::{make_coordinate_grid, mse_loss, AdamState};
use staf_core::Matrix;

fn main() {
    let n = 1 << 19;
    let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37) % 20.0 - 10.0).collect();
    let us: Vec<f64> = (0..n).map(|i| (i as f64 * 0.11) % 2.0 - 1.0).collect();
    let mut out = vec![0.0; n];
    let amp = [0.5, -1.2, 0.3, 0.9, -0.1];
    let freq = [1.0, 7.3, 0.2, 14.0, 26.0];
    let phase = [0.1, -2.0, 3.0, 0.5, -0.7];
    let t = Instant::now();
    for _ in 0..20 { sin_slice(&xs, &mut out); }
    println!("sin_slice: {:.2} ns/elem", t.elapsed().as_secs_f64() / (20.0 * n as f64) * 1e9);
    let t = Instant::now();
    for _ in 0..20 { staf_forward_slice(&xs, &mut out, &amp, &freq, &phase); }
    println!("staf_forward tau=5: {:.2} ns/elem", t.elapsed().as_secs_f64() / (20.0 * n as f64) * 1e9);
    let mut da = vec![0.0; n];
    let t = Instant::now();
    for _ in 0..20 { let _ = staf_backward_slice(&xs, &us, &mut da, &amp, &freq, &phase); }
    println!("staf_backward tau=5: {:.2} ns/elem", t.elapsed().as_secs_f64() / (20.0 * n as f64) * 1e9);
    std::hint::black_box(out[777] + da[888]);

    let mut cfg = NetworkConfig::new(2, vec![128, 128, 128], 1);
    cfg.activation = ActivationKind::Staf;
    cfg.tau = 5;
    cfg.seed = 1;
    let mut net = Network::init(cfg).unwrap();
    let grid = make_coordinate_grid(&[64, 64]);
    let targets = Matrix::zeros(4096, 1).map(|_| 0.5);
    let mut adam = AdamState::new(&net);
    let reps = 30;
    let t = Instant::now();
    for _ in 0..reps {
        let tr = forward(&net, &grid).unwrap();
        let (_, g) = mse_loss(tr.output(), &targets).unwrap();
        let b = backward(&net, &tr, &g).unwrap();
        adam.step(&mut net, &b, 1e-3);
    }
    println!("full iter (threads={}): {:.1} ms", staf_core::threads::max_threads(), t.elapsed().as_secs_f64() / reps as f64 * 1e3);
}
