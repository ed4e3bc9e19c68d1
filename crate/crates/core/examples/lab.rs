//! Training-dynamics laboratory: sweeps hyperparameters (per-layer init
//! gains, learning rate, batch handling) and rule variants (causality
//! tie handling, normalization placement, silent-neuron gradients) to
//! find a regime where the temporal classifier actually learns.
//!
//! Dev tool only — not part of the shipped API. Usage:
//!   cargo run --release --example lab -- lr=0.1 gains=8,8 epochs=5

use rand::rngs::SmallRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use spikegan::backprop::init_layer;
use spikegan::codec::encode_ttfs;
use spikegan::io::load_mnist_dir;
use spikegan::mat::Mat;
use spikegan::sim::{network_forward, FiringTimes, LayerParams, SimConfig};
use std::collections::HashMap;
use std::path::Path;

#[derive(Clone, Debug)]
struct Opts {
    train: usize,
    test: usize,
    epochs: usize,
    arch: Vec<usize>,
    gains: Vec<f64>,
    lr: f64,
    l2: f64,
    decay: f64,
    decay_every: usize,
    batch: usize,
    seed: u64,
    inclusive: bool,    // hidden causality t_j <= t_k instead of strict <
    norm: String,       // layer | output | none
    silent: String,     // silent-neuron eff time: window | zero | decision
    alpha_hidden: f64,  // lr multiplier for the hidden (first) layer
    margin: u32,        // target for desired neuron = max(tau - margin, 0)
    inits: Vec<String>, // per-layer weight family: pos | sym | sparse
    thetas: Vec<f64>,   // per-layer firing thresholds
    nz: usize,          // sparse init: nonzero inputs per neuron
    need: f64,          // sparse init: coincident arrivals to cross theta
}

fn parse_opts() -> Opts {
    let mut kv: HashMap<String, String> = HashMap::new();
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("args are key=value");
        kv.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str, d: &str| kv.get(k).cloned().unwrap_or_else(|| d.to_string());
    let opts = Opts {
        train: get("train", "10000").parse().unwrap(),
        test: get("test", "2000").parse().unwrap(),
        epochs: get("epochs", "5").parse().unwrap(),
        arch: get("arch", "784,400,10")
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect(),
        gains: get("gains", "8,8")
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect(),
        lr: get("lr", "0.1").parse().unwrap(),
        l2: get("l2", "1e-6").parse().unwrap(),
        decay: get("decay", "1.0").parse().unwrap(),
        decay_every: get("decay_every", "10").parse().unwrap(),
        batch: get("batch", "1").parse().unwrap(),
        seed: get("seed", "7").parse().unwrap(),
        inclusive: get("inclusive", "0") == "1",
        norm: get("norm", "layer"),
        silent: get("silent", "window"),
        alpha_hidden: get("alpha_hidden", "1.0").parse().unwrap(),
        margin: get("margin", "0").parse().unwrap(),
        inits: get("inits", "pos,pos")
            .split(',')
            .map(|s| s.to_string())
            .collect(),
        thetas: get("thetas", "100,100")
            .split(',')
            .map(|s| s.parse().unwrap())
            .collect(),
        nz: get("nz", "40").parse().unwrap(),
        need: get("need", "15").parse().unwrap(),
    };
    assert_eq!(opts.gains.len(), opts.arch.len() - 1, "one gain per layer");
    assert_eq!(opts.inits.len(), opts.arch.len() - 1, "one init per layer");
    assert_eq!(opts.thetas.len(), opts.arch.len() - 1, "one theta per layer");
    opts
}

fn l1_normalize(delta: &mut [f64], clip: bool) {
    let norm: f64 = delta.iter().map(|d| d.abs()).sum();
    if norm > 0.0 && (!clip || norm > 1.0) {
        for d in delta.iter_mut() {
            *d /= norm;
        }
    }
}

/// Local backward pass with variant flags. Returns per-layer gradients.
fn backward(
    opts: &Opts,
    layers: &[LayerParams<f64>],
    traces: &[spikegan::sim::LayerTrace],
    label: usize,
    cfg: &SimConfig,
) -> Vec<Mat<f64>> {
    let t_max = cfg.t_max();
    let out_times = traces.last().unwrap().outputs();

    // Targets: desired gets the earliest firing time (0 when nothing
    // fired), everyone else gets t_max.
    let mut tau = out_times
        .iter()
        .map(|&t| t.min(t_max))
        .min()
        .unwrap_or(t_max);
    if tau >= t_max {
        tau = 0;
    }
    tau = tau.saturating_sub(opts.margin);
    let n_out = out_times.len();
    let mut delta: Vec<f64> = (0..n_out)
        .map(|j| {
            let t = out_times[j].min(t_max) as f64;
            let target = if j == label { tau as f64 } else { t_max as f64 };
            t - target
        })
        .collect();
    if opts.norm != "none" {
        l1_normalize(&mut delta, opts.norm == "clip");
    }

    let mut grads: Vec<Mat<f64>> = Vec::with_capacity(layers.len());
    for l in (0..layers.len()).rev() {
        let trace = &traces[l];
        let inputs = trace.inputs().as_slice();
        let outputs = trace.outputs();
        // Weight gradient for this layer from the current delta.
        // Silent neurons take their effective time from the chosen
        // policy: full window, zero grad, or the sample's decision
        // moment (earliest spike in this layer, window end if none).
        let decision = outputs
            .iter()
            .map(|&t| t.min(t_max))
            .min()
            .filter(|&t| t < t_max)
            .unwrap_or(t_max - 1);
        let mut g = Mat::zeros(layers[l].n_out(), layers[l].n_in());
        for (j, &dj) in delta.iter().enumerate() {
            if dj == 0.0 {
                continue;
            }
            let t_j = outputs[j];
            let fired = t_j < t_max;
            if !fired && opts.silent == "zero" {
                continue;
            }
            let eff = if fired {
                t_j
            } else {
                match opts.silent.as_str() {
                    "decision" => decision,
                    _ => t_max - 1,
                }
            };
            let row = g.row_mut(j);
            for (gw, &t_i) in row.iter_mut().zip(inputs) {
                if t_i <= eff {
                    *gw = -dj;
                }
            }
        }
        grads.push(g);

        if l == 0 {
            break;
        }
        // Chain the delta down to the previous layer's outputs.
        let below = traces[l - 1].outputs();
        let mut next = vec![0.0f64; layers[l].n_in()];
        for (k, &dk) in delta.iter().enumerate() {
            if dk == 0.0 {
                continue;
            }
            let t_k = outputs[k].min(t_max);
            let row = layers[l].weights().row(k);
            for (j, nd) in next.iter_mut().enumerate() {
                let t_j = below[j];
                let causal = if opts.inclusive {
                    t_j <= t_k
                } else {
                    t_j < t_k
                };
                if causal {
                    *nd += dk * row[j];
                }
            }
        }
        if opts.norm == "layer" || opts.norm == "clip" {
            l1_normalize(&mut next, opts.norm == "clip");
        }
        delta = next;
    }
    grads.reverse();
    grads
}

fn accuracy(
    layers: &[LayerParams<f64>],
    spikes: &[FiringTimes],
    labels: &[u8],
    cfg: &SimConfig,
) -> f64 {
    let mut hits = 0usize;
    for (inp, &lbl) in spikes.iter().zip(labels) {
        let pass = network_forward(layers, inp, cfg).unwrap();
        let pred = pass.output_times().argmin_index();
        if pred == lbl as usize {
            hits += 1;
        }
    }
    hits as f64 / spikes.len() as f64
}

/// Deep-dive on the test set: confusion matrix, decision margins,
/// per-output fire rates, and mean firing time per (class, output).
fn autopsy(
    layers: &[LayerParams<f64>],
    spikes: &[FiringTimes],
    labels: &[u8],
    cfg: &SimConfig,
) {
    let n_out = layers.last().unwrap().n_out();
    let t_max = cfg.t_max();
    let mut confusion = vec![vec![0usize; n_out]; n_out];
    let mut fire_rate = vec![0usize; n_out];
    let mut margins = Vec::new();
    let mut time_sum = vec![vec![0f64; n_out]; n_out];
    let mut class_n = vec![0usize; n_out];
    let mut decision_sum = 0f64;
    let mut spikes_to_decision = 0f64;
    let total_neurons: usize = layers[0].n_in() + layers.iter().map(|l| l.n_out()).sum::<usize>();
    for (inp, &lbl) in spikes.iter().zip(labels) {
        let pass = network_forward(layers, inp, cfg).unwrap();
        let out = pass.output_times();
        let pred = out.argmin_index();
        confusion[lbl as usize][pred] += 1;
        class_n[lbl as usize] += 1;
        let mut ts: Vec<u32> = out.iter().map(|&t| t.min(t_max)).collect();
        for (k, &t) in ts.iter().enumerate() {
            if t < t_max {
                fire_rate[k] += 1;
            }
            time_sum[lbl as usize][k] += t as f64;
        }
        // Decision latency and total activity up to the decision moment,
        // counting spikes in every population (inputs included).
        let decision = *ts.iter().min().unwrap();
        decision_sum += decision as f64;
        let mut fired = inp.iter().filter(|&&t| t <= decision).count();
        for trace in &pass.traces {
            fired += trace
                .outputs()
                .iter()
                .filter(|&&t| t <= decision && t < t_max)
                .count();
        }
        spikes_to_decision += fired as f64;
        ts.sort_unstable();
        margins.push((ts[1] - ts[0]) as f64);
    }
    let n = spikes.len() as f64;
    println!(
        "# decision: mean_time={:.2} mean_spikes={:.1} fire_frac={:.4} (of {total_neurons})",
        decision_sum / n,
        spikes_to_decision / n,
        spikes_to_decision / n / total_neurons as f64,
    );
    println!("# confusion (rows=true, cols=pred):");
    for row in &confusion {
        println!("#   {row:?}");
    }
    println!(
        "# out fire rates: {:?}",
        fire_rate.iter().map(|&c| (100.0 * c as f64 / n) as u32).collect::<Vec<_>>()
    );
    println!(
        "# mean argmin margin: {:.2}",
        margins.iter().sum::<f64>() / n
    );
    println!("# mean out time by true class (rows=class):");
    for (c, row) in time_sum.iter().enumerate() {
        let k = class_n[c].max(1) as f64;
        println!(
            "#   c{c}: {:?}",
            row.iter().map(|&s| (s / k) as u32).collect::<Vec<_>>()
        );
    }
}

fn main() {
    let opts = parse_opts();
    println!("# {opts:?}");
    let cfg = SimConfig::new(256).unwrap();
    let data_dir = std::env::var("SPIKEGAN_DATA")
        .unwrap_or_else(|_| "/root/crate/data/mnist".to_string());
    let (mut train, mut test) = load_mnist_dir(Path::new(&data_dir)).unwrap();
    train.truncate(opts.train);
    test.truncate(opts.test);

    let train_spikes: Vec<FiringTimes> = train
        .images
        .iter()
        .map(|img| encode_ttfs(img, &cfg).unwrap())
        .collect();
    let test_spikes: Vec<FiringTimes> = test
        .images
        .iter()
        .map(|img| encode_ttfs(img, &cfg).unwrap())
        .collect();

    let mut rng = SmallRng::seed_from_u64(opts.seed);
    let mut layers: Vec<LayerParams<f64>> = opts
        .arch
        .windows(2)
        .enumerate()
        .map(|(l, pair)| {
            let (n_out, n_in) = (pair[1], pair[0]);
            let (gain, theta) = (opts.gains[l], opts.thetas[l]);
            match opts.inits[l].as_str() {
                "sym" => {
                    let a = gain * theta / n_in as f64;
                    let data: Vec<f64> = (0..n_out * n_in)
                        .map(|_| rng.random_range(-a..a))
                        .collect();
                    LayerParams::new(Mat::from_vec(n_out, n_in, data).unwrap(), theta).unwrap()
                }
                "sparse" => {
                    // Each neuron listens to `nz` random inputs with
                    // weights sized so ~`need` coincident arrivals
                    // cross theta: a coincidence detector.
                    let scale = 2.0 * theta / opts.need;
                    let mut data = vec![0.0f64; n_out * n_in];
                    let mut cols: Vec<usize> = (0..n_in).collect();
                    for j in 0..n_out {
                        cols.shuffle(&mut rng);
                        for &i in cols.iter().take(opts.nz) {
                            data[j * n_in + i] = rng.random_range(0.0..scale);
                        }
                    }
                    LayerParams::new(Mat::from_vec(n_out, n_in, data).unwrap(), theta).unwrap()
                }
                _ => init_layer(n_out, n_in, theta, gain, &mut rng).unwrap(),
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..train_spikes.len()).collect();
    let mut lr = opts.lr;
    for epoch in 0..opts.epochs {
        if epoch > 0 && opts.decay_every > 0 && epoch % opts.decay_every == 0 {
            lr *= opts.decay;
        }
        order.shuffle(&mut rng);
        let mut train_hits = 0usize;
        let mut hid_fired = 0usize;
        let mut out_fired = 0usize;
        let mut all_silent = 0usize;
        let mut acc_grads: Option<Vec<Mat<f64>>> = None;
        let mut in_batch = 0usize;
        for (step, &idx) in order.iter().enumerate() {
            let inp = &train_spikes[idx];
            let label = train.labels[idx] as usize;
            let pass = network_forward(&layers, inp, &cfg).unwrap();
            let out = pass.output_times();
            if out.argmin_index() == label {
                train_hits += 1;
            }
            hid_fired += pass.traces[0].outputs().spike_count(&cfg);
            out_fired += out.spike_count(&cfg);
            if out.spike_count(&cfg) == 0 {
                all_silent += 1;
            }
            let grads = backward(&opts, &layers, &pass.traces, label, &cfg);
            if opts.batch <= 1 {
                apply(&mut layers, &grads, lr, opts.l2, opts.alpha_hidden);
            } else {
                match &mut acc_grads {
                    None => acc_grads = Some(grads),
                    Some(acc) => {
                        for (a, g) in acc.iter_mut().zip(&grads) {
                            for (av, gv) in a.data_mut().iter_mut().zip(g.data()) {
                                *av += gv;
                            }
                        }
                    }
                }
                in_batch += 1;
                if in_batch == opts.batch || step + 1 == order.len() {
                    let mut acc = acc_grads.take().unwrap();
                    let scale = 1.0 / in_batch as f64;
                    for a in &mut acc {
                        for v in a.data_mut() {
                            *v *= scale;
                        }
                    }
                    apply(&mut layers, &acc, lr, opts.l2, opts.alpha_hidden);
                    in_batch = 0;
                }
            }
        }
        let n = order.len() as f64;
        let n_hid = layers[0].n_out() as f64;
        let test_acc = accuracy(&layers, &test_spikes, &test.labels, &cfg);
        println!(
            "epoch {epoch}: train_acc={:.3} test_acc={:.4} hid_fire={:.2} out_fire={:.2} all_silent={:.3} lr={lr:.4}",
            train_hits as f64 / n,
            test_acc,
            hid_fired as f64 / n / n_hid,
            out_fired as f64 / n / layers.last().unwrap().n_out() as f64,
            all_silent as f64 / n,
        );
    }
    autopsy(&layers, &test_spikes, &test.labels, &cfg);
}

fn apply(
    layers: &mut [LayerParams<f64>],
    grads: &[Mat<f64>],
    lr: f64,
    l2: f64,
    alpha_hidden: f64,
) {
    for (l, (params, g)) in layers.iter_mut().zip(grads).enumerate() {
        let rate = if l == 0 { lr * alpha_hidden } else { lr };
        let w = params.weights_mut().data_mut();
        for (w, &gv) in w.iter_mut().zip(g.data()) {
            *w -= rate * (gv + 2.0 * l2 * *w);
        }
    }
}
