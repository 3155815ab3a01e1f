use staf_core::io::pnm::load_pnm;
use staf_core::mlp::{ActivationKind, Network, NetworkConfig};
use staf_core::train::{fit_signal, TaskKind, TaskSpec};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k1: f64 = args[1].parse().unwrap(); // first-layer weight scale
    let k2: f64 = args[2].parse().unwrap(); // hidden-layer weight scale
    let seed: u64 = args[3].parse().unwrap();
    let iters: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(250);
    let target = load_pnm(std::path::Path::new("crates/staf-core/tests/data/cameraman64.pgm")).unwrap();
    let mut cfg = NetworkConfig::new(2, vec![128, 128, 128], 1);
    cfg.activation = ActivationKind::Staf;
    cfg.tau = 5;
    cfg.seed = seed;
    let mut net = Network::init(cfg).unwrap();
    let depth = net.layers.len();
    for (l, layer) in net.layers.iter_mut().enumerate() {
        let k = if l == 0 { k1 } else if l + 1 < depth { k2 } else { 1.0 };
        if k != 1.0 {
            layer.weight = layer.weight.scale(k);
        }
    }
    let mut task = TaskSpec::new(TaskKind::Image2d, target, iters, 1e-3);
    task.seed = seed;
    task.log_every = 50;
    let (_, log) = fit_signal(net, &task).unwrap();
    println!("k1={k1} k2={k2} seed={seed} iters={iters} psnr={:.2}", log.final_psnr);
}
