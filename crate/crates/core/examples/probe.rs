//! Diagnostic probe: watches what the classifier's layers actually learn.
//! Not part of the library surface; run manually while tuning.

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use spikegan::backprop::{
    backward_pass, make_targets, normalize_delta, output_delta, train_step, TrainHyper,
};
use spikegan::classifier::{eval_metrics, ClassifierConfig};
use spikegan::codec::encode_ttfs;
use spikegan::io::load_mnist_dir;
use spikegan::sim::{network_forward, SimConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let get = |name: &str, dft: f64| -> f64 {
        args.iter()
            .position(|a| a == name)
            .map(|i| args[i + 1].parse().unwrap())
            .unwrap_or(dft)
    };
    let gain = get("--gain", 8.0);
    let lr = get("--lr", 0.1);
    let epochs = get("--epochs", 10.0) as u32;
    let n_train = get("--train", 10000.0) as usize;
    let n_test = get("--test", 1000.0) as usize;

    let cfg = SimConfig::new(256).unwrap();
    let (mut train, mut test) = load_mnist_dir(std::path::Path::new("data/mnist")).unwrap();
    train.truncate(n_train);
    test.truncate(n_test);

    let ccfg = ClassifierConfig::<f64> {
        arch: vec![784, 400, 10],
        theta: 100.0,
        init_gain: gain,
        hyper: TrainHyper {
            learning_rate: lr,
            epochs,
            ..TrainHyper::default()
        },
        seed: 7,
    };
    let mut layers = spikegan::backprop::init_network::<f64, _>(
        &ccfg.arch,
        ccfg.theta,
        ccfg.init_gain,
        &mut rand_chacha::ChaCha8Rng::seed_from_u64(7),
    )
    .unwrap();

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut shuffler = SmallRng::seed_from_u64(99);

    for epoch in 0..epochs {
        order.shuffle(&mut shuffler);
        let mut correct = 0usize;
        for &i in &order {
            let inputs = encode_ttfs(&train.images[i], &cfg).unwrap();
            let pass = network_forward(&layers, &inputs, &cfg).unwrap();
            let out = pass.output_times();
            if out.argmin_index() == train.labels[i] as usize {
                correct += 1;
            }
            let targets = make_targets(out, train.labels[i] as usize, &cfg).unwrap();
            train_step(
                &mut layers,
                &pass.traces,
                &targets,
                ccfg.hyper.learning_rate,
                ccfg.hyper.l2,
            )
            .unwrap();
        }

        // Layer statistics on a fixed probe batch.
        let mut hid_fire = 0usize;
        let mut hid_n = 0usize;
        let mut hid_min = 0.0;
        let mut hid_med = 0.0;
        let mut hid_spread = 0.0;
        let mut out_fire = 0usize;
        let mut out_n = 0usize;
        let probes = 200.min(test.len());
        for i in 0..probes {
            let inputs = encode_ttfs(&test.images[i], &cfg).unwrap();
            let pass = network_forward(&layers, &inputs, &cfg).unwrap();
            let hid: Vec<u32> = pass.traces[0].outputs().as_slice().to_vec();
            let mut fired: Vec<u32> = hid
                .iter()
                .copied()
                .filter(|&t| t < cfg.sentinel())
                .collect();
            fired.sort_unstable();
            hid_fire += fired.len();
            hid_n += hid.len();
            if !fired.is_empty() {
                hid_min += fired[0] as f64;
                hid_med += fired[fired.len() / 2] as f64;
                hid_spread += (fired[fired.len() - 1] - fired[0]) as f64;
            }
            let out = pass.output_times();
            out_fire += out.spike_count(&cfg);
            out_n += out.len();
        }
        let p = probes as f64;
        println!(
            "epoch {epoch:>3} train_acc {:.3} | hidden fired {:.2} min {:.0} med {:.0} spread {:.0} | out fired {:.2}",
            correct as f64 / train.len() as f64,
            hid_fire as f64 / hid_n as f64,
            hid_min / p,
            hid_med / p,
            hid_spread / p,
            out_fire as f64 / out_n as f64,
        );
    }

    // Class selectivity: mean firing time of each output neuron by true class.
    let mut sums = vec![vec![0f64; 10]; 10];
    let mut counts = vec![0usize; 10];
    for i in 0..test.len() {
        let inputs = encode_ttfs(&test.images[i], &cfg).unwrap();
        let pass = network_forward(&layers, &inputs, &cfg).unwrap();
        let c = test.labels[i] as usize;
        counts[c] += 1;
        for (j, &t) in pass.output_times().as_slice().iter().enumerate() {
            sums[c][j] += t as f64;
        }
    }
    println!("\nmean output time by true class (rows=class, cols=output neuron):");
    print!("      ");
    for j in 0..10 {
        print!("  n{j:<4}");
    }
    println!();
    for c in 0..10 {
        if counts[c] == 0 {
            continue;
        }
        print!("class {c}");
        for j in 0..10 {
            print!(" {:6.0}", sums[c][j] / counts[c] as f64);
        }
        println!();
    }

    let metrics = eval_metrics(&layers, &test, &cfg).unwrap();
    println!(
        "\ntest acc {:.4} decision {:.1} spikes {:.1}",
        metrics.accuracy, metrics.mean_decision_time, metrics.mean_spikes_until_decision
    );

    // One-sample anatomy: show targets and deltas.
    let inputs = encode_ttfs(&test.images[0], &cfg).unwrap();
    let pass = network_forward(&layers, &inputs, &cfg).unwrap();
    let out = pass.output_times();
    let label = test.labels[0] as usize;
    let targets = make_targets(out, label, &cfg).unwrap();
    let deltas = output_delta::<f64>(out, &targets).unwrap();
    let mut norm = deltas.clone();
    normalize_delta(&mut norm);
    println!("\nsample anatomy: label {label}");
    println!("  out times  {:?}", out.as_slice());
    println!("  targets    {:?}", targets.as_slice());
    println!("  deltas     {deltas:.1?}");
    println!("  normalized {norm:.4?}");
    let grads = backward_pass(&pass.traces, &layers, &targets).unwrap();
    for (l, g) in grads.layers.iter().enumerate() {
        let total: f64 = g.data().iter().map(|v| v.abs()).sum();
        let nz = g.data().iter().filter(|v| **v != 0.0).count();
        println!("  layer {l}: grad L1 {total:.3} nonzero {nz}");
    }
}
