//! Digit classifier: training loop, prediction, and evaluation
//! metrics including the latency/sparsity accounting.

use crate::backprop::{
    apply_sgd_update, backward_pass, init_network_with, make_targets, squared_temporal_loss,
    train_step, LayerInit, TrainHyper, STREAM_EPOCH_BASE, STREAM_INIT_PRIMARY,
};
use crate::codec::{encode_ttfs, AnalogImage};
use crate::error::{Error, Result};
use crate::io::{write_csv, write_image_grid, Dataset, GridFormat};
use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::sim::{network_forward, LayerParams, SimConfig};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::Path;

/// Everything needed to train a classifier from scratch.
#[derive(Clone, Debug)]
pub struct ClassifierConfig<T> {
    /// Layer widths, inputs first, e.g. `[784, 400, 10]`.
    pub arch: Vec<usize>,
    /// One initialization recipe (threshold, weight family, scale) per
    /// weight layer: `arch.len() - 1` entries.
    pub inits: Vec<LayerInit<T>>,
    pub hyper: TrainHyper<T>,
    pub seed: u64,
}

impl<T: Scalar> Default for ClassifierConfig<T> {
    /// The tuned digit-classifier recipe.
    ///
    /// Two deliberate asymmetries carry the training dynamics. The
    /// hidden layer starts symmetric so that which neurons fire depends
    /// on spike arrival order (selectivity); the output layer starts
    /// positive so every class neuron is alive from epoch 0. And the
    /// output threshold is set far above the hidden one: per-layer
    /// delta normalization hands both layers the same total update
    /// mass per sample, so scaling the output layer's threshold (and
    /// with it, its weights) down-weights that mass relative to the
    /// layer — an effective per-layer learning-rate ratio that lets
    /// the hidden layer learn features instead of freezing while the
    /// output layer races ahead.
    fn default() -> Self {
        ClassifierConfig {
            arch: vec![784, 400, 10],
            inits: vec![
                LayerInit::symmetric(T::from_f64_lossy(100.0), 130.0),
                LayerInit::positive(T::from_f64_lossy(2000.0), 16.0),
            ],
            hyper: TrainHyper {
                learning_rate: T::from_f64_lossy(2.0),
                l2: T::from_f64_lossy(1e-6),
                epochs: 30,
                lr_decay: T::from_f64_lossy(0.8),
                lr_decay_every: 3,
                batch_size: 1,
            },
            seed: 7,
        }
    }
}

/// Online metrics of one training epoch (accuracy/loss of the model as
/// it streamed over the shuffled samples).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub learning_rate: f64,
    pub mean_loss: f64,
    pub accuracy: f64,
}

fn check_training_inputs<T: Scalar>(
    train: &Dataset,
    ccfg: &ClassifierConfig<T>,
) -> Result<()> {
    if train.is_empty() {
        return Err(Error::EmptyDataset("classifier training"));
    }
    if ccfg.arch.len() < 2 {
        return Err(Error::InvalidParameter(
            "architecture needs at least input and output widths".into(),
        ));
    }
    let pixels = train.images[0].pixels.len();
    if ccfg.arch[0] != pixels {
        return Err(Error::DimMismatch {
            context: "input width vs image pixels",
            expected: pixels,
            got: ccfg.arch[0],
        });
    }
    let classes = *ccfg.arch.last().unwrap();
    if let Some((i, &l)) = train
        .labels
        .iter()
        .enumerate()
        .find(|&(_, &l)| (l as usize) >= classes)
    {
        return Err(Error::LabelOutOfRange { index: i, value: l });
    }
    if ccfg.inits.len() != ccfg.arch.len() - 1 {
        return Err(Error::DimMismatch {
            context: "init recipes vs weight layers",
            expected: ccfg.arch.len() - 1,
            got: ccfg.inits.len(),
        });
    }
    ccfg.hyper.validate()
}

/// Train a classifier with per-sample (or small-batch) SGD. Returns
/// the layers and one metrics row per epoch.
pub fn train_classifier<T: Scalar>(
    train: &Dataset,
    cfg: &SimConfig,
    ccfg: &ClassifierConfig<T>,
) -> Result<(Vec<LayerParams<T>>, Vec<EpochMetrics>)> {
    check_training_inputs(train, ccfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(ccfg.seed);
    rng.set_stream(STREAM_INIT_PRIMARY);
    let mut layers = init_network_with(&ccfg.arch, &ccfg.inits, &mut rng)?;

    let mut metrics = Vec::with_capacity(ccfg.hyper.epochs as usize);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 0..ccfg.hyper.epochs {
        let lr = ccfg.hyper.lr_at(epoch);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(ccfg.seed);
        shuffle_rng.set_stream(STREAM_EPOCH_BASE * (epoch as u64 + 1));
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0f64;
        let mut correct = 0usize;

        if ccfg.hyper.batch_size == 1 {
            for &idx in &order {
                let inputs = encode_ttfs(&train.images[idx], cfg)?;
                let pass = network_forward(&layers, &inputs, cfg)?;
                let label = train.labels[idx] as usize;
                if pass.output_times().argmin_index() == label {
                    correct += 1;
                }
                let targets = make_targets(pass.output_times(), label, cfg)?;
                loss_sum +=
                    squared_temporal_loss::<T>(pass.output_times(), &targets)?.to_f64_lossy();
                train_step(&mut layers, &pass.traces, &targets, lr, ccfg.hyper.l2)?;
            }
        } else {
            for chunk in order.chunks(ccfg.hyper.batch_size) {
                let mut acc: Option<Vec<Mat<T>>> = None;
                for &idx in chunk {
                    let inputs = encode_ttfs(&train.images[idx], cfg)?;
                    let pass = network_forward(&layers, &inputs, cfg)?;
                    let label = train.labels[idx] as usize;
                    if pass.output_times().argmin_index() == label {
                        correct += 1;
                    }
                    let targets = make_targets(pass.output_times(), label, cfg)?;
                    loss_sum += squared_temporal_loss::<T>(pass.output_times(), &targets)?
                        .to_f64_lossy();
                    let grads = backward_pass(&pass.traces, &layers, &targets)?;
                    match acc.as_mut() {
                        None => acc = Some(grads.layers),
                        Some(acc) => {
                            for (a, g) in acc.iter_mut().zip(&grads.layers) {
                                for (a, &g) in a.data_mut().iter_mut().zip(g.data()) {
                                    *a += g;
                                }
                            }
                        }
                    }
                }
                let mut acc = acc.expect("non-empty chunk");
                let scale = T::from_usize(chunk.len()).unwrap();
                for (params, grad) in layers.iter_mut().zip(acc.iter_mut()) {
                    for g in grad.data_mut() {
                        *g /= scale;
                    }
                    apply_sgd_update(params, grad, lr, ccfg.hyper.l2)?;
                }
            }
        }

        let row = EpochMetrics {
            epoch,
            learning_rate: lr.to_f64_lossy(),
            mean_loss: loss_sum / train.len() as f64,
            accuracy: correct as f64 / train.len() as f64,
        };
        log::info!(
            "epoch {:>3}: lr {:.5}  loss {:>10.2}  train acc {:.4}",
            row.epoch,
            row.learning_rate,
            row.mean_loss,
            row.accuracy
        );
        metrics.push(row);
    }

    Ok((layers, metrics))
}

/// Prediction with its latency and spike cost.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Classification {
    /// Earliest-firing output neuron; ties and the all-silent case
    /// resolve to the lowest index.
    pub label: u8,
    /// Time of the earliest output spike (sentinel if none).
    pub decision_time: u32,
    /// Network-wide spikes at steps up to the decision, inputs included.
    pub spikes_until_decision: u32,
    /// Network-wide spikes over the whole window.
    pub total_spikes: u32,
}

/// Classify one image: the class whose output neuron fires first.
pub fn classify<T: Scalar>(
    layers: &[LayerParams<T>],
    img: &AnalogImage,
    cfg: &SimConfig,
) -> Result<Classification> {
    let inputs = encode_ttfs(img, cfg)?;
    let pass = network_forward(layers, &inputs, cfg)?;
    Ok(Classification {
        label: pass.output_times().argmin_index() as u8,
        decision_time: pass.decision.time,
        spikes_until_decision: pass.decision.spikes,
        total_spikes: pass.total_spikes,
    })
}

/// Per-class slice of an evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DigitMetrics {
    pub digit: u8,
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub mean_decision_time: f64,
    pub mean_spikes_until_decision: f64,
}

/// Whole-dataset evaluation: accuracy plus latency and sparsity.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub samples: usize,
    pub correct: usize,
    pub accuracy: f64,
    /// Mean time of the first output spike (sentinel when silent).
    pub mean_decision_time: f64,
    /// Mean network spikes issued up to the decision, inputs included.
    pub mean_spikes_until_decision: f64,
    /// Mean network spikes over the full window.
    pub mean_total_spikes: f64,
    /// Neurons in the network, input layer included.
    pub neuron_count: usize,
    /// `mean_spikes_until_decision / neuron_count`: the fraction of the
    /// network that had fired when the decision was made.
    pub mean_firing_fraction: f64,
    pub per_digit: Vec<DigitMetrics>,
}

/// Evaluate a classifier over a dataset. Samples are independent, so
/// they are scored in parallel; aggregation preserves order and is
/// deterministic.
pub fn eval_metrics<T: Scalar>(
    layers: &[LayerParams<T>],
    ds: &Dataset,
    cfg: &SimConfig,
) -> Result<RunMetrics> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset("classifier evaluation"));
    }
    let results: Vec<Classification> = ds
        .images
        .par_iter()
        .map(|img| classify(layers, img, cfg))
        .collect::<Result<_>>()?;

    let neuron_count =
        layers[0].n_in() + layers.iter().map(|l| l.n_out()).sum::<usize>();

    let mut correct = 0usize;
    let mut time_sum = 0u64;
    let mut spike_sum = 0u64;
    let mut total_sum = 0u64;
    let mut digit_n = [0usize; 10];
    let mut digit_correct = [0usize; 10];
    let mut digit_time = [0u64; 10];
    let mut digit_spikes = [0u64; 10];

    for (c, &label) in results.iter().zip(&ds.labels) {
        let hit = c.label == label;
        correct += hit as usize;
        time_sum += c.decision_time as u64;
        spike_sum += c.spikes_until_decision as u64;
        total_sum += c.total_spikes as u64;
        let d = label as usize;
        digit_n[d] += 1;
        digit_correct[d] += hit as usize;
        digit_time[d] += c.decision_time as u64;
        digit_spikes[d] += c.spikes_until_decision as u64;
    }

    let n = ds.len() as f64;
    let per_digit = (0..10)
        .map(|d| DigitMetrics {
            digit: d as u8,
            samples: digit_n[d],
            correct: digit_correct[d],
            accuracy: if digit_n[d] == 0 {
                0.0
            } else {
                digit_correct[d] as f64 / digit_n[d] as f64
            },
            mean_decision_time: if digit_n[d] == 0 {
                0.0
            } else {
                digit_time[d] as f64 / digit_n[d] as f64
            },
            mean_spikes_until_decision: if digit_n[d] == 0 {
                0.0
            } else {
                digit_spikes[d] as f64 / digit_n[d] as f64
            },
        })
        .collect();

    let mean_spikes = spike_sum as f64 / n;
    Ok(RunMetrics {
        samples: ds.len(),
        correct,
        accuracy: correct as f64 / n,
        mean_decision_time: time_sum as f64 / n,
        mean_spikes_until_decision: mean_spikes,
        mean_total_spikes: total_sum as f64 / n,
        neuron_count,
        mean_firing_fraction: mean_spikes / neuron_count as f64,
        per_digit,
    })
}

/// Write the headline evaluation numbers as a one-row CSV.
pub fn write_summary_csv(m: &RunMetrics, path: &Path) -> Result<()> {
    write_csv(
        path,
        &[
            "samples",
            "correct",
            "accuracy",
            "mean_decision_time",
            "mean_spikes_until_decision",
            "mean_total_spikes",
            "neuron_count",
            "mean_firing_fraction",
        ],
        &[vec![
            m.samples.to_string(),
            m.correct.to_string(),
            format!("{:.6}", m.accuracy),
            format!("{:.4}", m.mean_decision_time),
            format!("{:.4}", m.mean_spikes_until_decision),
            format!("{:.4}", m.mean_total_spikes),
            m.neuron_count.to_string(),
            format!("{:.6}", m.mean_firing_fraction),
        ]],
    )
}

/// Write the per-class breakdown as CSV, one row per digit.
pub fn write_per_digit_csv(m: &RunMetrics, path: &Path) -> Result<()> {
    let rows = m
        .per_digit
        .iter()
        .map(|d| {
            vec![
                d.digit.to_string(),
                d.samples.to_string(),
                d.correct.to_string(),
                format!("{:.6}", d.accuracy),
                format!("{:.4}", d.mean_decision_time),
                format!("{:.4}", d.mean_spikes_until_decision),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(
        path,
        &[
            "digit",
            "samples",
            "correct",
            "accuracy",
            "mean_decision_time",
            "mean_spikes_until_decision",
        ],
        &rows,
    )
}

/// Write per-epoch training curves as CSV.
pub fn write_epoch_csv(rows: &[EpochMetrics], path: &Path) -> Result<()> {
    let rows = rows
        .iter()
        .map(|e| {
            vec![
                e.epoch.to_string(),
                format!("{:.8}", e.learning_rate),
                format!("{:.4}", e.mean_loss),
                format!("{:.6}", e.accuracy),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(path, &["epoch", "learning_rate", "mean_loss", "accuracy"], &rows)
}

/// Render a sample of first-layer receptive fields as an image grid.
/// Each selected row is min-max scaled to full contrast (a constant
/// row renders mid-gray). The input width must be a perfect square.
pub fn export_filters<T: Scalar>(
    layers: &[LayerParams<T>],
    count: usize,
    columns: usize,
    seed: u64,
    path: &Path,
    format: GridFormat,
) -> Result<()> {
    let first = layers.first().ok_or(Error::EmptyDataset("filter export"))?;
    let side = (first.n_in() as f64).sqrt() as usize;
    if side * side != first.n_in() {
        return Err(Error::InvalidParameter(format!(
            "input width {} is not a perfect square",
            first.n_in()
        )));
    }
    if count == 0 || count > first.n_out() {
        return Err(Error::InvalidParameter(format!(
            "filter count must lie in 1..={}, got {count}",
            first.n_out()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<usize> = (0..first.n_out()).collect();
    rows.shuffle(&mut rng);
    rows.truncate(count);
    rows.sort_unstable();

    let tiles = rows
        .iter()
        .map(|&j| {
            let w = first.weights().row(j);
            let lo = w.iter().cloned().fold(T::infinity(), T::min);
            let hi = w.iter().cloned().fold(T::neg_infinity(), T::max);
            let pixels = if hi == lo {
                vec![128u16; w.len()]
            } else {
                let span = (hi - lo).to_f64_lossy();
                w.iter()
                    .map(|&v| {
                        (((v - lo).to_f64_lossy() / span * 255.0).round()) as u16
                    })
                    .collect()
            };
            AnalogImage::new(pixels, side, side, 255)
        })
        .collect::<Result<Vec<_>>>()?;
    write_image_grid(&tiles, columns, path, format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn cfg64() -> SimConfig {
        SimConfig::new(64).unwrap()
    }

    /// Two clearly separable 4x4 patterns: bright top half vs bright
    /// bottom half. Intensities are staggered within each pattern so
    /// spikes arrive spread over the window rather than as one
    /// synchronized volley (which would pin every neuron to the same
    /// firing step and stall temporal credit assignment).
    fn toy_dataset(n_per_class: usize) -> Dataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for k in 0..n_per_class {
            let jitter = (k as u16 * 7) % 40;
            let ramp: Vec<u16> = (0..8).map(|i| 255 - i * 20 - jitter).collect();
            let mut top = vec![0u16; 16];
            top[..8].copy_from_slice(&ramp);
            images.push(AnalogImage::new(top, 4, 4, 255).unwrap());
            labels.push(0u8);
            let mut bottom = vec![0u16; 16];
            bottom[8..].copy_from_slice(&ramp);
            images.push(AnalogImage::new(bottom, 4, 4, 255).unwrap());
            labels.push(1u8);
        }
        Dataset::new(images, labels).unwrap()
    }

    fn toy_config() -> ClassifierConfig<f64> {
        ClassifierConfig {
            arch: vec![16, 16, 2],
            inits: vec![LayerInit::positive(100.0, 8.0); 2],
            hyper: TrainHyper {
                epochs: 60,
                learning_rate: 0.3,
                ..TrainHyper::default()
            },
            seed: 11,
        }
    }

    #[test]
    fn overfits_separable_toy_data() {
        let cfg = cfg64();
        let ds = toy_dataset(5);
        let (layers, metrics) = train_classifier(&ds, &cfg, &toy_config()).unwrap();
        assert_eq!(metrics.len(), 60);
        let eval = eval_metrics(&layers, &ds, &cfg).unwrap();
        assert_eq!(eval.accuracy, 1.0, "toy problem should be fully learned");
        assert_eq!(eval.samples, 10);
        assert_eq!(eval.neuron_count, 16 + 16 + 2);
        assert!(eval.mean_decision_time < cfg.sentinel() as f64);
        // Per-digit rows cover only the classes present.
        assert_eq!(eval.per_digit[0].samples, 5);
        assert_eq!(eval.per_digit[1].samples, 5);
        assert_eq!(eval.per_digit[2].samples, 0);
        // Spike accounting is internally consistent.
        assert!(eval.mean_spikes_until_decision <= eval.mean_total_spikes);
        assert!(
            (eval.mean_firing_fraction
                - eval.mean_spikes_until_decision / eval.neuron_count as f64)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let cfg = cfg64();
        let ds = toy_dataset(3);
        let c = toy_config();
        let (a, ma) = train_classifier(&ds, &cfg, &c).unwrap();
        let (b, mb) = train_classifier(&ds, &cfg, &c).unwrap();
        assert_eq!(ma, mb);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.weights().data(), y.weights().data());
        }
        let mut c2 = c.clone();
        c2.seed = 12;
        let (d, _) = train_classifier(&ds, &cfg, &c2).unwrap();
        assert_ne!(a[0].weights().data(), d[0].weights().data());
    }

    #[test]
    fn batch_training_also_learns() {
        let cfg = cfg64();
        let ds = toy_dataset(5);
        let mut c = toy_config();
        c.hyper.batch_size = 4;
        c.hyper.epochs = 120;
        c.hyper.learning_rate = 1.0;
        let (layers, _) = train_classifier(&ds, &cfg, &c).unwrap();
        let eval = eval_metrics(&layers, &ds, &cfg).unwrap();
        assert!(eval.accuracy >= 0.9);
    }

    #[test]
    fn training_validates_inputs() {
        let cfg = cfg64();
        let ds = toy_dataset(2);
        let mut c = toy_config();
        c.arch = vec![15, 16, 2]; // wrong input width
        assert!(train_classifier(&ds, &cfg, &c).is_err());
        let mut c = toy_config();
        c.arch = vec![16, 16, 2];
        let mut bad = ds.clone();
        bad.labels[0] = 2; // out of range for 2 outputs
        assert!(train_classifier(&bad, &cfg, &c).is_err());
        c.hyper.learning_rate = -1.0;
        assert!(train_classifier(&ds, &cfg, &c).is_err());
        let mut c = toy_config();
        c.inits.pop(); // one recipe short
        assert!(train_classifier(&ds, &cfg, &c).is_err());
        assert!(eval_metrics::<f64>(&[], &Dataset::new(vec![], vec![]).unwrap(), &cfg).is_err());
    }

    #[test]
    fn filters_export_to_grid() {
        let cfg = cfg64();
        let ds = toy_dataset(2);
        let (layers, _) = train_classifier(&ds, &cfg, &toy_config()).unwrap();
        let dir = tempdir().unwrap();
        let p = dir.path().join("filters.pgm");
        export_filters(&layers, 6, 3, 5, &p, GridFormat::Pgm).unwrap();
        let (w, h, _) = crate::io::read_pgm(&p).unwrap();
        // 3 columns of 4px tiles + 2px separators: 3*4+2*2 = 16 wide,
        // 2 rows: 4*2+2 = 10 tall.
        assert_eq!((w, h), (16, 10));
        // Count larger than the layer is rejected.
        assert!(export_filters(&layers, 17, 3, 5, &p, GridFormat::Pgm).is_err());
    }

    #[test]
    fn csv_writers_emit_expected_shapes() {
        let cfg = cfg64();
        let ds = toy_dataset(2);
        let (layers, epochs) = train_classifier(&ds, &cfg, &toy_config()).unwrap();
        let eval = eval_metrics(&layers, &ds, &cfg).unwrap();
        let dir = tempdir().unwrap();
        let s = dir.path().join("summary.csv");
        let d = dir.path().join("digits.csv");
        let e = dir.path().join("epochs.csv");
        write_summary_csv(&eval, &s).unwrap();
        write_per_digit_csv(&eval, &d).unwrap();
        write_epoch_csv(&epochs, &e).unwrap();
        let summary = std::fs::read_to_string(&s).unwrap();
        assert_eq!(summary.lines().count(), 2);
        assert!(summary.starts_with("samples,"));
        let digits = std::fs::read_to_string(&d).unwrap();
        assert_eq!(digits.lines().count(), 11);
        let ep = std::fs::read_to_string(&e).unwrap();
        assert_eq!(ep.lines().count(), 1 + epochs.len());
    }
}
