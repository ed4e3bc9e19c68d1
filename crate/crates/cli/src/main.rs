//! Command-line driver: train the classifier or the adversarial pair,
//! sample a trained generator, evaluate checkpoints, and report input
//! coding costs.
//!
//! Every subcommand resolves its settings as `defaults < config file <
//! flags`, seeds default to the documented constant 7, and runs that
//! produce artifacts write a `manifest.json` (the exact effective
//! configuration plus crate versions) beside them. `--threads 1` (the
//! default) makes every artifact bit-reproducible.
//!
//! Exit codes: 0 success, 2 configuration/usage problem, 3 data or
//! checkpoint I/O problem, 4 training divergence, 1 anything else.

mod config;

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use config::{parse_layer_list, ConfigError, Resolver};
use spikegan::backprop::TrainHyper;
use spikegan::checkpoint::{read_gan_file, read_network_file, write_network_file};
use spikegan::classifier::{
    eval_metrics, export_filters, train_classifier, write_epoch_csv, write_per_digit_csv,
    write_summary_csv, ClassifierConfig, RunMetrics,
};
use spikegan::codec::coding_cost_report;
use spikegan::gan::{
    generate_samples, train_gan, Alternation, GanConfig, GanState, GanTrainOptions,
};
use spikegan::io::{load_mnist_dir, write_csv, write_image_grid, Dataset, GridFormat};
use spikegan::scalar::Scalar;
use spikegan::sim::SimConfig;

// ---------------------------------------------------------------------------
// Failure categories and exit codes
// ---------------------------------------------------------------------------

enum Failure {
    /// Bad flags, bad config file, bad parameter values. Exit 2.
    Usage(String),
    /// Missing or corrupt data/checkpoint files. Exit 3.
    Data(String),
    /// Training produced non-finite weights. Exit 4.
    Diverged(String),
    /// Anything else. Exit 1.
    Internal(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Diverged(_) => 4,
            Failure::Internal(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Diverged(m) | Failure::Internal(m) => {
                m
            }
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.0)
    }
}

/// Sort a library error into an exit category.
fn categorize(e: spikegan::Error) -> Failure {
    use spikegan::Error as E;
    match e {
        E::Diverged(_) => Failure::Diverged(e.to_string()),
        E::Io { .. }
        | E::BadMagic { .. }
        | E::Truncated { .. }
        | E::LabelOutOfRange { .. }
        | E::PairMismatch { .. }
        | E::UnsupportedVersion(_)
        | E::WrongCheckpointKind { .. }
        | E::ImageEncode(_) => Failure::Data(e.to_string()),
        E::DimMismatch { .. } | E::InvalidParameter(_) | E::EmptyDataset(_) => {
            Failure::Usage(e.to_string())
        }
    }
}

type CmdResult = Result<(), Failure>;

// ---------------------------------------------------------------------------
// Flags
// ---------------------------------------------------------------------------

#[derive(Parser)]
#[command(
    name = "spikegan",
    version,
    about = "Single-spike temporal-coded networks: classifiers and an adversarial image generator"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a first-spike classifier and write model, metrics, and a
    /// filter grid.
    TrainClassifier(TrainClassifierArgs),
    /// Train the generator/discriminator pair on one digit class.
    TrainGan(TrainGanArgs),
    /// Sample images from a trained generator checkpoint.
    Generate(GenerateArgs),
    /// Evaluate a classifier checkpoint: accuracy, latency, spike cost.
    Eval(EvalArgs),
    /// Report mean per-image spike costs of the three input codings.
    CodingReport(CodingReportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Precision {
    F32,
    F64,
}

impl Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

impl FromStr for Precision {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("expected f32 or f64, got {other}")),
        }
    }
}

/// Settings every subcommand understands.
#[derive(Args)]
struct Common {
    /// Run-configuration file of `key = value` lines; flags win over it.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master RNG seed [default: 7].
    #[arg(long)]
    seed: Option<u64>,
    /// Evaluation worker threads; 1 guarantees bit-exact outputs [default: 1].
    #[arg(long)]
    threads: Option<usize>,
    /// Weight/potential scalar type [default: f64].
    #[arg(long, value_enum)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with the four MNIST IDX files [default: $SPIKEGAN_DATA or data/mnist].
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Output directory [default: runs/classifier].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Layer widths, input first [default: 784,400,10].
    #[arg(long)]
    arch: Option<String>,
    /// Simulation window length in steps [default: 256].
    #[arg(long)]
    tmax: Option<u32>,
    /// Firing threshold [default: 100].
    #[arg(long)]
    theta: Option<f64>,
    /// Initial-weight gain [default: 8].
    #[arg(long)]
    gain: Option<f64>,
    /// Training epochs [default: 30].
    #[arg(long)]
    epochs: Option<u32>,
    /// Learning rate [default: 0.1].
    #[arg(long)]
    lr: Option<f64>,
    /// L2 penalty coefficient [default: 1e-6].
    #[arg(long)]
    l2: Option<f64>,
    /// Multiplicative learning-rate decay factor [default: 0.7].
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Apply the decay every N epochs; 0 disables [default: 10].
    #[arg(long)]
    lr_decay_every: Option<u32>,
    /// Samples per gradient estimate; 1 is fully online [default: 1].
    #[arg(long)]
    batch_size: Option<usize>,
    /// Use only the first N training samples; 0 means all [default: 0].
    #[arg(long)]
    train_limit: Option<usize>,
    /// Use only the first N test samples; 0 means all [default: 0].
    #[arg(long)]
    test_limit: Option<usize>,
    /// Hidden filters to render into the grid; 0 skips it [default: 64].
    #[arg(long)]
    filters: Option<usize>,
    /// Columns in the filter grid [default: 8].
    #[arg(long)]
    filter_columns: Option<usize>,
    /// Image format for the filter grid: pgm or png [default: png].
    #[arg(long)]
    image_format: Option<String>,
}

#[derive(Args)]
struct TrainGanArgs {
    #[command(flatten)]
    common: Common,
    /// Digit class (0-9) to train on. Required.
    #[arg(long)]
    digit: Option<u8>,
    /// Directory with the four MNIST IDX files [default: $SPIKEGAN_DATA or data/mnist].
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Output directory [default: runs/gan-digit-N].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Simulation window length in steps [default: 256].
    #[arg(long)]
    tmax: Option<u32>,
    /// Generator noise inputs [default: 100].
    #[arg(long)]
    noise_dim: Option<usize>,
    /// Generator hidden widths [default: 400].
    #[arg(long)]
    g_hidden: Option<String>,
    /// Discriminator hidden widths [default: 400].
    #[arg(long)]
    d_hidden: Option<String>,
    /// Firing threshold [default: 100].
    #[arg(long)]
    theta: Option<f64>,
    /// Initial-weight gain [default: 8].
    #[arg(long)]
    gain: Option<f64>,
    /// Adversarial epochs [default: 50].
    #[arg(long)]
    epochs: Option<u32>,
    /// Snapshot checkpoint + sample grid every N epochs; 0 = only first
    /// and last [default: 10].
    #[arg(long)]
    checkpoint_every: Option<u32>,
    /// Generator learning rate [default: 0.1].
    #[arg(long)]
    g_lr: Option<f64>,
    /// Discriminator learning rate [default: 0.1].
    #[arg(long)]
    d_lr: Option<f64>,
    /// Generator L2 coefficient [default: 1e-6].
    #[arg(long)]
    g_l2: Option<f64>,
    /// Discriminator L2 coefficient [default: 1e-6].
    #[arg(long)]
    d_l2: Option<f64>,
    /// Update schedule: per-sample or per-epoch [default: per-sample].
    #[arg(long)]
    alternation: Option<String>,
    /// Samples in each progress grid [default: 64].
    #[arg(long)]
    grid_samples: Option<usize>,
    /// Columns in each progress grid [default: 8].
    #[arg(long)]
    grid_columns: Option<usize>,
    /// Use only the first N real samples of the digit; 0 means all [default: 0].
    #[arg(long)]
    train_limit: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Trained adversarial checkpoint to sample from. Required.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Number of samples [default: 64].
    #[arg(short = 'n', long)]
    count: Option<usize>,
    /// Output directory [default: runs/generated].
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Columns in the sample grid [default: 8].
    #[arg(long)]
    columns: Option<usize>,
    /// Decoded image width [default: square side of the output layer].
    #[arg(long)]
    width: Option<usize>,
    /// Decoded image height [default: square side of the output layer].
    #[arg(long)]
    height: Option<usize>,
    /// Peak intensity of the decoded images [default: 255].
    #[arg(long)]
    i_max: Option<u16>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Classifier checkpoint to evaluate. Required.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Directory with the four MNIST IDX files [default: $SPIKEGAN_DATA or data/mnist].
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Which split to evaluate: test or train [default: test].
    #[arg(long)]
    split: Option<String>,
    /// Evaluate only the first N samples; 0 means all [default: 0].
    #[arg(long)]
    limit: Option<usize>,
    /// Optional directory for summary/per-digit CSVs and the manifest.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CodingReportArgs {
    #[command(flatten)]
    common: Common,
    /// Directory with the four MNIST IDX files [default: $SPIKEGAN_DATA or data/mnist].
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Which split to measure: train or test [default: train].
    #[arg(long)]
    split: Option<String>,
    /// Use only the first N samples; 0 means all [default: 0].
    #[arg(long)]
    limit: Option<usize>,
    /// Optional directory for the report CSV and the manifest.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// Shared resolution helpers
// ---------------------------------------------------------------------------

/// Seed, threads, and precision resolved for every command.
struct CommonSettings {
    seed: u64,
    precision: Precision,
}

fn resolve_common(r: &mut Resolver, c: &Common) -> Result<CommonSettings, Failure> {
    let seed = r.get("seed", c.seed, 7u64)?;
    let threads = r.get("threads", c.threads, 1usize)?;
    if threads == 0 {
        return Err(Failure::Usage("--threads must be >= 1".into()));
    }
    let precision: Precision = {
        let raw = r.get_str("precision", c.precision.map(|p| p.to_string()), "f64");
        raw.parse()
            .map_err(|e| Failure::Usage(format!("bad value for `precision`: {e}")))?
    };
    // The global pool can only be installed once per process; a second
    // install attempt (tests driving several commands) keeps the first.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    Ok(CommonSettings { seed, precision })
}

/// Flag beats config key `data` beats `$SPIKEGAN_DATA` beats `data/mnist`.
fn resolve_data_dir(r: &mut Resolver, flag: Option<PathBuf>) -> Result<PathBuf, Failure> {
    let env_default = std::env::var_os("SPIKEGAN_DATA")
        .map(|p| PathBuf::from(p).display().to_string())
        .unwrap_or_else(|| "data/mnist".to_string());
    let raw = r.get_str("data", flag.map(|p| p.display().to_string()), &env_default);
    let dir = PathBuf::from(raw);
    if !dir.is_dir() {
        return Err(Failure::Usage(format!(
            "data directory `{}` does not exist (set --data, config key `data`, or $SPIKEGAN_DATA)",
            dir.display()
        )));
    }
    Ok(dir)
}

fn parse_image_format(raw: &str) -> Result<GridFormat, Failure> {
    match raw {
        "pgm" => Ok(GridFormat::Pgm),
        "png" => Ok(GridFormat::Png),
        other => Err(Failure::Usage(format!(
            "bad value for `image-format`: `{other}` (expected pgm or png)"
        ))),
    }
}

fn parse_alternation(raw: &str) -> Result<Alternation, Failure> {
    match raw {
        "per-sample" => Ok(Alternation::PerSample),
        "per-epoch" => Ok(Alternation::PerEpoch),
        other => Err(Failure::Usage(format!(
            "bad value for `alternation`: `{other}` (expected per-sample or per-epoch)"
        ))),
    }
}

/// Deterministic run manifest: command, effective configuration, crate
/// versions. No clocks, so a rerun writes an identical file.
fn write_manifest(
    dir: &Path,
    command: &str,
    snapshot: &BTreeMap<String, String>,
) -> Result<(), Failure> {
    let manifest = serde_json::json!({
        "command": command,
        "config": snapshot,
        "versions": {
            "spikegan": spikegan::VERSION,
            "spikegan-cli": env!("CARGO_PKG_VERSION"),
        },
    });
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::Internal(format!("manifest serialization failed: {e}")))?;
    fs::write(&path, text + "\n")
        .map_err(|e| Failure::Data(format!("cannot write {}: {e}", path.display())))
}

fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::Data(format!("cannot create {}: {e}", dir.display())))
}

fn load_split(
    data: &Path,
    split: &str,
    limit: usize,
) -> Result<Dataset, Failure> {
    let (train, test) = load_mnist_dir(data).map_err(categorize)?;
    let mut ds = match split {
        "train" => train,
        "test" => test,
        other => {
            return Err(Failure::Usage(format!(
                "bad value for `split`: `{other}` (expected train or test)"
            )))
        }
    };
    if limit > 0 {
        ds.truncate(limit);
    }
    Ok(ds)
}

fn print_metrics(m: &RunMetrics, sentinel: u32) {
    println!("samples                {}", m.samples);
    println!(
        "accuracy               {:.4} ({}/{})",
        m.accuracy, m.correct, m.samples
    );
    println!(
        "mean decision time     {:.2} steps (silent = {sentinel})",
        m.mean_decision_time
    );
    println!("mean spikes to decide  {:.2}", m.mean_spikes_until_decision);
    println!("mean total spikes      {:.2}", m.mean_total_spikes);
    println!("neurons (with input)   {}", m.neuron_count);
    println!("mean firing fraction   {:.4}", m.mean_firing_fraction);
    println!("per-digit accuracy:");
    for d in &m.per_digit {
        if d.samples == 0 {
            continue;
        }
        println!(
            "  digit {}: {:.4} ({}/{}) decision {:.2} steps, {:.2} spikes",
            d.digit, d.accuracy, d.correct, d.samples, d.mean_decision_time, d.mean_spikes_until_decision
        );
    }
}

// ---------------------------------------------------------------------------
// train-classifier
// ---------------------------------------------------------------------------

fn cmd_train_classifier(a: &TrainClassifierArgs) -> CmdResult {
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let cs = resolve_common(&mut r, &a.common)?;
    match cs.precision {
        Precision::F32 => train_classifier_typed::<f32>(a, r, cs),
        Precision::F64 => train_classifier_typed::<f64>(a, r, cs),
    }
}

fn train_classifier_typed<T: Scalar>(
    a: &TrainClassifierArgs,
    mut r: Resolver,
    cs: CommonSettings,
) -> CmdResult {
    let data = resolve_data_dir(&mut r, a.data.clone())?;
    let out = PathBuf::from(r.get_str(
        "out",
        a.out.clone().map(|p| p.display().to_string()),
        "runs/classifier",
    ));
    let arch_raw = r.get_str("arch", a.arch.clone(), "784,400,10");
    let arch = parse_layer_list("arch", &arch_raw)?;
    let tmax = r.get("tmax", a.tmax, 256u32)?;
    let theta = r.get("theta", a.theta, 100.0f64)?;
    let gain = r.get("gain", a.gain, 8.0f64)?;
    let dft = TrainHyper::<f64>::default();
    let epochs = r.get("epochs", a.epochs, dft.epochs)?;
    let lr = r.get("lr", a.lr, dft.learning_rate)?;
    let l2 = r.get("l2", a.l2, dft.l2)?;
    let lr_decay = r.get("lr-decay", a.lr_decay, dft.lr_decay)?;
    let lr_decay_every = r.get("lr-decay-every", a.lr_decay_every, dft.lr_decay_every)?;
    let batch_size = r.get("batch-size", a.batch_size, dft.batch_size)?;
    let train_limit = r.get("train-limit", a.train_limit, 0usize)?;
    let test_limit = r.get("test-limit", a.test_limit, 0usize)?;
    let filters = r.get("filters", a.filters, 64usize)?;
    let filter_columns = r.get("filter-columns", a.filter_columns, 8usize)?;
    let format = parse_image_format(&r.get_str("image-format", a.image_format.clone(), "png"))?;
    let snapshot = r.finish()?;

    let cfg = SimConfig::new(tmax).map_err(categorize)?;
    let ccfg = ClassifierConfig::<T> {
        arch,
        theta: T::from_f64_lossy(theta),
        init_gain: gain,
        hyper: TrainHyper {
            learning_rate: T::from_f64_lossy(lr),
            l2: T::from_f64_lossy(l2),
            epochs,
            lr_decay: T::from_f64_lossy(lr_decay),
            lr_decay_every,
            batch_size,
        },
        seed: cs.seed,
    };

    let train = load_split(&data, "train", train_limit)?;
    let test = load_split(&data, "test", test_limit)?;
    info!(
        "training {} on {} samples, evaluating on {}",
        snapshot["arch"],
        train.len(),
        test.len()
    );

    ensure_out_dir(&out)?;
    write_manifest(&out, "train-classifier", &snapshot)?;

    let (layers, epoch_rows) = train_classifier(&train, &cfg, &ccfg).map_err(categorize)?;
    write_network_file(&out.join("model.ckpt"), &layers, &cfg).map_err(categorize)?;
    write_epoch_csv(&epoch_rows, &out.join("epochs.csv")).map_err(categorize)?;

    let metrics = eval_metrics(&layers, &test, &cfg).map_err(categorize)?;
    write_summary_csv(&metrics, &out.join("summary.csv")).map_err(categorize)?;
    write_per_digit_csv(&metrics, &out.join("per-digit.csv")).map_err(categorize)?;

    if filters > 0 {
        let hidden = layers[0].n_out();
        let name = match format {
            GridFormat::Pgm => "filters.pgm",
            GridFormat::Png => "filters.png",
        };
        export_filters(
            &layers,
            filters.min(hidden),
            filter_columns,
            cs.seed,
            &out.join(name),
            format,
        )
        .map_err(categorize)?;
    }

    println!("model + metrics written to {}", out.display());
    print_metrics(&metrics, cfg.sentinel());
    Ok(())
}

// ---------------------------------------------------------------------------
// train-gan
// ---------------------------------------------------------------------------

fn cmd_train_gan(a: &TrainGanArgs) -> CmdResult {
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let cs = resolve_common(&mut r, &a.common)?;
    match cs.precision {
        Precision::F32 => train_gan_typed::<f32>(a, r, cs),
        Precision::F64 => train_gan_typed::<f64>(a, r, cs),
    }
}

fn train_gan_typed<T: Scalar>(a: &TrainGanArgs, mut r: Resolver, cs: CommonSettings) -> CmdResult {
    let digit = r.require("digit", a.digit)?;
    if digit > 9 {
        return Err(Failure::Usage(format!(
            "--digit must be 0..=9, got {digit}"
        )));
    }
    let data = resolve_data_dir(&mut r, a.data.clone())?;
    let out = PathBuf::from(r.get_str(
        "out",
        a.out.clone().map(|p| p.display().to_string()),
        &format!("runs/gan-digit-{digit}"),
    ));
    let tmax = r.get("tmax", a.tmax, 256u32)?;
    let gdft = GanConfig::<f64>::default();
    let odft = GanTrainOptions::default();
    let noise_dim = r.get("noise-dim", a.noise_dim, gdft.noise_dim)?;
    let g_hidden = parse_layer_list(
        "g-hidden",
        &r.get_str("g-hidden", a.g_hidden.clone(), "400"),
    )?;
    let d_hidden = parse_layer_list(
        "d-hidden",
        &r.get_str("d-hidden", a.d_hidden.clone(), "400"),
    )?;
    let theta = r.get("theta", a.theta, 100.0f64)?;
    let gain = r.get("gain", a.gain, gdft.init_gain)?;
    let epochs = r.get("epochs", a.epochs, odft.epochs)?;
    let checkpoint_every = r.get("checkpoint-every", a.checkpoint_every, odft.checkpoint_every)?;
    let hdft = TrainHyper::<f64>::default();
    let g_lr = r.get("g-lr", a.g_lr, hdft.learning_rate)?;
    let d_lr = r.get("d-lr", a.d_lr, hdft.learning_rate)?;
    let g_l2 = r.get("g-l2", a.g_l2, hdft.l2)?;
    let d_l2 = r.get("d-l2", a.d_l2, hdft.l2)?;
    let alternation = parse_alternation(&r.get_str(
        "alternation",
        a.alternation.clone(),
        "per-sample",
    ))?;
    let grid_samples = r.get("grid-samples", a.grid_samples, odft.grid_samples)?;
    let grid_columns = r.get("grid-columns", a.grid_columns, odft.grid_columns)?;
    let train_limit = r.get("train-limit", a.train_limit, 0usize)?;
    let snapshot = r.finish()?;

    let cfg = SimConfig::new(tmax).map_err(categorize)?;
    let gcfg = GanConfig::<T> {
        noise_dim,
        g_hidden,
        d_hidden,
        image_width: 28,
        image_height: 28,
        i_max: 255,
        theta: T::from_f64_lossy(theta),
        init_gain: gain,
        g_hyper: TrainHyper {
            learning_rate: T::from_f64_lossy(g_lr),
            l2: T::from_f64_lossy(g_l2),
            epochs,
            ..TrainHyper::default()
        },
        d_hyper: TrainHyper {
            learning_rate: T::from_f64_lossy(d_lr),
            l2: T::from_f64_lossy(d_l2),
            epochs,
            ..TrainHyper::default()
        },
        alternation,
        seed: cs.seed,
    };

    let (train, _) = load_mnist_dir(&data).map_err(categorize)?;
    let mut reals = train.filter_digit(digit);
    if train_limit > 0 {
        reals.truncate(train_limit);
    }
    if reals.is_empty() {
        return Err(Failure::Usage(format!(
            "no training samples for digit {digit}"
        )));
    }
    info!("adversarial training on {} images of digit {digit}", reals.len());

    ensure_out_dir(&out)?;
    write_manifest(&out, "train-gan", &snapshot)?;

    let opts = GanTrainOptions {
        epochs,
        checkpoint_every,
        out_dir: Some(out.clone()),
        grid_samples,
        grid_columns,
    };
    let run = train_gan(&reals.images, &cfg, &gcfg, &opts).map_err(categorize)?;
    let last = run.losses.last().expect("at least one epoch");
    println!(
        "done: epoch {} losses: D real {:.1}, D fake {:.1}, G {:.1}",
        last.epoch, last.d_loss_real, last.d_loss_fake, last.g_loss
    );
    println!("checkpoints + grids + losses.csv in {}", out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn cmd_generate(a: &GenerateArgs) -> CmdResult {
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let cs = resolve_common(&mut r, &a.common)?;
    match cs.precision {
        Precision::F32 => generate_typed::<f32>(a, r, cs),
        Precision::F64 => generate_typed::<f64>(a, r, cs),
    }
}

fn generate_typed<T: Scalar>(a: &GenerateArgs, mut r: Resolver, cs: CommonSettings) -> CmdResult {
    let model = PathBuf::from(r.require(
        "model",
        a.model.clone().map(|p| p.display().to_string()),
    )?);
    let out = PathBuf::from(r.get_str(
        "out",
        a.out.clone().map(|p| p.display().to_string()),
        "runs/generated",
    ));
    let count = r.get("count", a.count, 64usize)?;
    let columns = r.get("columns", a.columns, 8usize)?;
    let width_flag = r.optional("width", a.width)?;
    let height_flag = r.optional("height", a.height)?;
    let i_max = r.get("i-max", a.i_max, 255u16)?;
    let snapshot = r.finish()?;

    let ck = read_gan_file::<T>(&model).map_err(categorize)?;
    let (state, cfg) = GanState::from_checkpoint(ck);
    let pixels = state.output_pixels();
    let (width, height) = match (width_flag, height_flag) {
        (Some(w), Some(h)) => (w, h),
        (None, None) => {
            let side = (pixels as f64).sqrt() as usize;
            if side * side != pixels {
                return Err(Failure::Usage(format!(
                    "generator emits {pixels} pixels, not a square; pass --width and --height"
                )));
            }
            (side, side)
        }
        _ => {
            return Err(Failure::Usage(
                "--width and --height must be given together".into(),
            ))
        }
    };
    if width * height != pixels {
        return Err(Failure::Usage(format!(
            "--width {width} x --height {height} != generator output {pixels}"
        )));
    }

    let batch =
        generate_samples(&state, count, cs.seed, &cfg, width, height, i_max).map_err(categorize)?;

    ensure_out_dir(&out)?;
    write_manifest(&out, "generate", &snapshot)?;
    write_image_grid(&batch.images, columns, &out.join("samples.pgm"), GridFormat::Pgm)
        .map_err(categorize)?;
    write_image_grid(&batch.images, columns, &out.join("samples.png"), GridFormat::Png)
        .map_err(categorize)?;

    let n = batch.images.len() as f64;
    let g_mean = batch.g_spikes.iter().map(|&s| s as f64).sum::<f64>() / n;
    let gd_mean = batch.gd_spikes.iter().map(|&s| s as f64).sum::<f64>() / n;
    println!("{count} samples written to {}", out.display());
    println!(
        "discriminator votes real: {}/{} ({:.1}%)",
        batch.fooled,
        count,
        100.0 * batch.fooled as f64 / n
    );
    println!("mean generator spikes per sample: {g_mean:.1}");
    println!("mean generator+discriminator spikes per sample: {gd_mean:.1}");
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

fn cmd_eval(a: &EvalArgs) -> CmdResult {
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let cs = resolve_common(&mut r, &a.common)?;
    match cs.precision {
        Precision::F32 => eval_typed::<f32>(a, r),
        Precision::F64 => eval_typed::<f64>(a, r),
    }
}

fn eval_typed<T: Scalar>(a: &EvalArgs, mut r: Resolver) -> CmdResult {
    let model = PathBuf::from(r.require(
        "model",
        a.model.clone().map(|p| p.display().to_string()),
    )?);
    let data = resolve_data_dir(&mut r, a.data.clone())?;
    let split = r.get_str("split", a.split.clone(), "test");
    let limit = r.get("limit", a.limit, 0usize)?;
    let out = r
        .optional("out", a.out.clone().map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let snapshot = r.finish()?;

    let (layers, cfg) = read_network_file::<T>(&model).map_err(categorize)?;
    let ds = load_split(&data, &split, limit)?;
    let metrics = eval_metrics(&layers, &ds, &cfg).map_err(categorize)?;
    print_metrics(&metrics, cfg.sentinel());

    if let Some(o) = out {
        ensure_out_dir(&o)?;
        write_manifest(&o, "eval", &snapshot)?;
        write_summary_csv(&metrics, &o.join("summary.csv")).map_err(categorize)?;
        write_per_digit_csv(&metrics, &o.join("per-digit.csv")).map_err(categorize)?;
        println!("CSVs written to {}", o.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// coding-report
// ---------------------------------------------------------------------------

fn cmd_coding_report(a: &CodingReportArgs) -> CmdResult {
    let mut r = Resolver::load(a.common.config.as_deref())?;
    let _cs = resolve_common(&mut r, &a.common)?;
    let data = resolve_data_dir(&mut r, a.data.clone())?;
    let split = r.get_str("split", a.split.clone(), "train");
    let limit = r.get("limit", a.limit, 0usize)?;
    let out = r
        .optional("out", a.out.clone().map(|p| p.display().to_string()))?
        .map(PathBuf::from);
    let snapshot = r.finish()?;

    let ds = load_split(&data, &split, limit)?;
    let report = coding_cost_report(&ds.images).map_err(categorize)?;

    println!("images                 {}", report.images);
    println!("mean spikes per image:");
    println!("  count coding         {:.1}", report.count_coding);
    println!("  inverted count       {:.1}", report.inverted_count_coding);
    println!("  first-spike coding   {:.1}", report.ttfs_coding);
    println!(
        "first-spike vs count:    {:.1}x fewer spikes",
        report.count_coding / report.ttfs_coding
    );
    println!(
        "first-spike vs inverted: {:.1}x fewer spikes",
        report.inverted_count_coding / report.ttfs_coding
    );

    if let Some(o) = out {
        ensure_out_dir(&o)?;
        write_manifest(&o, "coding-report", &snapshot)?;
        let rows = vec![vec![
            report.images.to_string(),
            format!("{:.3}", report.count_coding),
            format!("{:.3}", report.inverted_count_coding),
            format!("{:.3}", report.ttfs_coding),
        ]];
        write_csv(
            &o.join("coding.csv"),
            &["images", "count_coding", "inverted_count_coding", "ttfs_coding"],
            &rows,
        )
        .map_err(categorize)?;
        println!("CSV written to {}", o.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------

fn run(cli: Cli) -> CmdResult {
    match &cli.cmd {
        Cmd::TrainClassifier(a) => cmd_train_classifier(a),
        Cmd::TrainGan(a) => cmd_train_gan(a),
        Cmd::Generate(a) => cmd_generate(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::CodingReport(a) => cmd_coding_report(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
