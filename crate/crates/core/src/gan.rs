//! Adversarial pair of spiking networks: a generator that turns noise
//! spike trains into images, and a discriminator that times its
//! fake/real verdict. Training alternates between them; the generator
//! learns through the frozen discriminator.

use crate::backprop::{
    delta_through_network, init_network_with, make_targets, normalize_delta, output_delta,
    squared_temporal_loss, train_step, train_step_from_output_delta, LayerInit, TrainHyper,
    STREAM_EPOCH_BASE, STREAM_FIXED_NOISE, STREAM_GENERATE, STREAM_INIT_PRIMARY,
    STREAM_INIT_SECONDARY,
};
use crate::checkpoint::{write_gan_file, GanCheckpoint};
use crate::codec::{decode_ttfs, encode_ttfs, sample_noise, AnalogImage};
use crate::error::{Error, Result};
use crate::io::{write_csv, write_image_grid, GridFormat};
use crate::scalar::Scalar;
use crate::sim::{network_forward, FiringTimes, LayerParams, SimConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// Discriminator output neuron voting "this is generated".
pub const FAKE_NEURON: usize = 0;
/// Discriminator output neuron voting "this is data".
pub const REAL_NEURON: usize = 1;

/// How discriminator and generator updates interleave.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alternation {
    /// One discriminator step (one real, one fake) then one generator
    /// step, per training sample.
    PerSample,
    /// A full discriminator sweep over the data, then as many
    /// generator steps.
    PerEpoch,
}

/// Architecture and training knobs of the adversarial pair.
#[derive(Clone, Debug)]
pub struct GanConfig<T> {
    pub noise_dim: usize,
    /// Hidden widths of the generator (its output width is the image).
    pub g_hidden: Vec<usize>,
    /// Hidden widths of the discriminator (its output is fake/real).
    pub d_hidden: Vec<usize>,
    pub image_width: usize,
    pub image_height: usize,
    pub i_max: u16,
    /// One init recipe per generator weight layer
    /// (`g_hidden.len() + 1` entries).
    pub g_inits: Vec<LayerInit<T>>,
    /// One init recipe per discriminator weight layer
    /// (`d_hidden.len() + 1` entries).
    pub d_inits: Vec<LayerInit<T>>,
    pub g_hyper: TrainHyper<T>,
    pub d_hyper: TrainHyper<T>,
    pub alternation: Alternation,
    pub seed: u64,
}

impl<T: Scalar> Default for GanConfig<T> {
    fn default() -> Self {
        let theta = T::from_f64_lossy(100.0);
        GanConfig {
            noise_dim: 100,
            g_hidden: vec![400],
            d_hidden: vec![400],
            image_width: 28,
            image_height: 28,
            i_max: 255,
            g_inits: vec![LayerInit::positive(theta, 8.0); 2],
            d_inits: vec![LayerInit::positive(theta, 8.0); 2],
            g_hyper: TrainHyper::default(),
            d_hyper: TrainHyper::default(),
            alternation: Alternation::PerSample,
            seed: 7,
        }
    }
}

impl<T: Scalar> GanConfig<T> {
    pub fn pixels(&self) -> usize {
        self.image_width * self.image_height
    }

    fn g_arch(&self) -> Vec<usize> {
        let mut a = vec![self.noise_dim];
        a.extend(&self.g_hidden);
        a.push(self.pixels());
        a
    }

    fn d_arch(&self) -> Vec<usize> {
        let mut a = vec![self.pixels()];
        a.extend(&self.d_hidden);
        a.push(2);
        a
    }

    fn validate(&self) -> Result<()> {
        if self.noise_dim == 0 {
            return Err(Error::InvalidParameter("noise_dim must be >= 1".into()));
        }
        if self.pixels() == 0 {
            return Err(Error::InvalidParameter("image size must be >= 1".into()));
        }
        if self.g_inits.len() != self.g_hidden.len() + 1 {
            return Err(Error::DimMismatch {
                context: "generator init recipes vs weight layers",
                expected: self.g_hidden.len() + 1,
                got: self.g_inits.len(),
            });
        }
        if self.d_inits.len() != self.d_hidden.len() + 1 {
            return Err(Error::DimMismatch {
                context: "discriminator init recipes vs weight layers",
                expected: self.d_hidden.len() + 1,
                got: self.d_inits.len(),
            });
        }
        self.g_hyper.validate()?;
        self.d_hyper.validate()
    }
}

/// The live training state: both networks plus where training stands.
#[derive(Clone, Debug)]
pub struct GanState<T> {
    pub generator: Vec<LayerParams<T>>,
    pub discriminator: Vec<LayerParams<T>>,
    /// Completed training epochs.
    pub epoch: u32,
    pub noise_dim: usize,
    pub seed: u64,
}

impl<T: Scalar> GanState<T> {
    /// Fresh pair with deterministic initialization: the generator and
    /// discriminator draw from separate streams of the master seed.
    pub fn new(gcfg: &GanConfig<T>) -> Result<Self> {
        gcfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
        rng.set_stream(STREAM_INIT_PRIMARY);
        let generator = init_network_with(&gcfg.g_arch(), &gcfg.g_inits, &mut rng)?;
        rng.set_stream(STREAM_INIT_SECONDARY);
        let discriminator = init_network_with(&gcfg.d_arch(), &gcfg.d_inits, &mut rng)?;
        Ok(GanState {
            generator,
            discriminator,
            epoch: 0,
            noise_dim: gcfg.noise_dim,
            seed: gcfg.seed,
        })
    }

    pub fn to_checkpoint(&self, cfg: &SimConfig) -> GanCheckpoint<T> {
        GanCheckpoint {
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
            epoch: self.epoch,
            noise_dim: self.noise_dim as u32,
            seed: self.seed,
            cfg: *cfg,
        }
    }

    pub fn from_checkpoint(ck: GanCheckpoint<T>) -> (Self, SimConfig) {
        (
            GanState {
                generator: ck.generator,
                discriminator: ck.discriminator,
                epoch: ck.epoch,
                noise_dim: ck.noise_dim as usize,
                seed: ck.seed,
            },
            ck.cfg,
        )
    }

    /// Pixels the generator emits (width of its output layer).
    pub fn output_pixels(&self) -> usize {
        self.generator
            .last()
            .map(|l| l.n_out())
            .unwrap_or(0)
    }
}

/// Mean discriminator loss over one step, split by sample kind.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiscriminatorLoss {
    pub real: f64,
    pub fake: f64,
}

/// One discriminator update sweep: for each real sample, learn
/// `real -> REAL_NEURON`, then draw a noise vector, run the (frozen)
/// generator, and learn `fake -> FAKE_NEURON`. Returns mean losses.
pub fn discriminator_step<T: Scalar, R: Rng + ?Sized>(
    state: &mut GanState<T>,
    reals: &[FiringTimes],
    cfg: &SimConfig,
    lr: T,
    l2: T,
    rng: &mut R,
) -> Result<DiscriminatorLoss> {
    if reals.is_empty() {
        return Err(Error::EmptyDataset("discriminator step"));
    }
    let mut loss_real = 0f64;
    let mut loss_fake = 0f64;
    for real in reals {
        let pass = network_forward(&state.discriminator, real, cfg)?;
        let targets = make_targets(pass.output_times(), REAL_NEURON, cfg)?;
        loss_real += squared_temporal_loss::<T>(pass.output_times(), &targets)?.to_f64_lossy();
        train_step(&mut state.discriminator, &pass.traces, &targets, lr, l2)?;

        let noise = sample_noise(state.noise_dim, cfg, rng);
        let g_pass = network_forward(&state.generator, &noise, cfg)?;
        let pass = network_forward(&state.discriminator, g_pass.output_times(), cfg)?;
        let targets = make_targets(pass.output_times(), FAKE_NEURON, cfg)?;
        loss_fake += squared_temporal_loss::<T>(pass.output_times(), &targets)?.to_f64_lossy();
        train_step(&mut state.discriminator, &pass.traces, &targets, lr, l2)?;
    }
    Ok(DiscriminatorLoss {
        real: loss_real / reals.len() as f64,
        fake: loss_fake / reals.len() as f64,
    })
}

/// One generator update sweep: push each noise vector through both
/// networks, demand the discriminator call it real, and backpropagate
/// through the frozen discriminator into the generator only. Returns
/// the mean adversarial loss.
pub fn generator_step<T: Scalar>(
    state: &mut GanState<T>,
    noise_batch: &[FiringTimes],
    cfg: &SimConfig,
    lr: T,
    l2: T,
) -> Result<f64> {
    if noise_batch.is_empty() {
        return Err(Error::EmptyDataset("generator step"));
    }
    let mut loss = 0f64;
    for noise in noise_batch {
        let g_pass = network_forward(&state.generator, noise, cfg)?;
        let d_pass = network_forward(&state.discriminator, g_pass.output_times(), cfg)?;
        let targets = make_targets(d_pass.output_times(), REAL_NEURON, cfg)?;
        loss += squared_temporal_loss::<T>(d_pass.output_times(), &targets)?.to_f64_lossy();

        let mut top: Vec<T> = output_delta(d_pass.output_times(), &targets)?;
        normalize_delta(&mut top);
        let boundary = delta_through_network(&top, &state.discriminator, &d_pass.traces)?;
        train_step_from_output_delta(&mut state.generator, &g_pass.traces, boundary, lr, l2)?;
    }
    Ok(loss / noise_batch.len() as f64)
}

/// Mean losses of one training epoch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GanEpochLoss {
    pub epoch: u32,
    pub d_loss_real: f64,
    pub d_loss_fake: f64,
    pub g_loss: f64,
}

/// Artifact and schedule options for a training run.
#[derive(Clone, Debug)]
pub struct GanTrainOptions {
    pub epochs: u32,
    /// Write a checkpoint + preview grid every this many epochs (the
    /// initial and final states are always written); 0 = only those.
    pub checkpoint_every: u32,
    /// Where checkpoints, grids, and loss curves go; None = keep
    /// everything in memory only.
    pub out_dir: Option<PathBuf>,
    /// Number of fixed-noise preview tiles per grid.
    pub grid_samples: usize,
    pub grid_columns: usize,
}

impl Default for GanTrainOptions {
    fn default() -> Self {
        GanTrainOptions {
            epochs: 50,
            checkpoint_every: 10,
            out_dir: None,
            grid_samples: 64,
            grid_columns: 8,
        }
    }
}

/// A finished (or aborted-and-rescued) training run.
#[derive(Clone, Debug)]
pub struct GanRun<T> {
    pub state: GanState<T>,
    pub losses: Vec<GanEpochLoss>,
}

fn checkpoint_paths(dir: &Path, epoch: u32) -> (PathBuf, PathBuf, PathBuf) {
    (
        dir.join(format!("gan-epoch-{epoch:03}.ckpt")),
        dir.join(format!("samples-epoch-{epoch:03}.pgm")),
        dir.join(format!("samples-epoch-{epoch:03}.png")),
    )
}

fn write_snapshot<T: Scalar>(
    state: &GanState<T>,
    fixed_noise: &[FiringTimes],
    cfg: &SimConfig,
    gcfg: &GanConfig<T>,
    opts: &GanTrainOptions,
) -> Result<()> {
    let Some(dir) = opts.out_dir.as_deref() else {
        return Ok(());
    };
    let (ckpt, pgm, png) = checkpoint_paths(dir, state.epoch);
    write_gan_file(&ckpt, &state.to_checkpoint(cfg))?;
    let tiles = fixed_noise
        .iter()
        .map(|z| {
            let pass = network_forward(&state.generator, z, cfg)?;
            decode_ttfs(
                pass.output_times(),
                cfg,
                gcfg.i_max,
                gcfg.image_width,
                gcfg.image_height,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    write_image_grid(&tiles, opts.grid_columns, &pgm, GridFormat::Pgm)?;
    write_image_grid(&tiles, opts.grid_columns, &png, GridFormat::Png)
}

/// Train an adversarial pair on one image class. Checkpoints (with
/// fixed-noise preview grids) are written before training and on the
/// configured schedule, so a diverging run leaves its last good state
/// on disk.
pub fn train_gan<T: Scalar>(
    reals: &[AnalogImage],
    cfg: &SimConfig,
    gcfg: &GanConfig<T>,
    opts: &GanTrainOptions,
) -> Result<GanRun<T>> {
    if reals.is_empty() {
        return Err(Error::EmptyDataset("adversarial training"));
    }
    if opts.epochs == 0 {
        return Err(Error::InvalidParameter("epochs must be >= 1".into()));
    }
    for img in reals {
        if img.pixels.len() != gcfg.pixels() {
            return Err(Error::DimMismatch {
                context: "training image vs configured size",
                expected: gcfg.pixels(),
                got: img.pixels.len(),
            });
        }
    }

    let mut state = GanState::new(gcfg)?;
    let encoded: Vec<FiringTimes> = reals
        .iter()
        .map(|img| encode_ttfs(img, cfg))
        .collect::<Result<_>>()?;

    let mut grid_rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
    grid_rng.set_stream(STREAM_FIXED_NOISE);
    let fixed_noise: Vec<FiringTimes> = (0..opts.grid_samples)
        .map(|_| sample_noise(gcfg.noise_dim, cfg, &mut grid_rng))
        .collect();

    write_snapshot(&state, &fixed_noise, cfg, gcfg, opts)?;

    let mut losses = Vec::with_capacity(opts.epochs as usize);
    let mut order: Vec<usize> = (0..encoded.len()).collect();

    for epoch in 0..opts.epochs {
        let d_lr = gcfg.d_hyper.lr_at(epoch);
        let g_lr = gcfg.g_hyper.lr_at(epoch);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
        shuffle_rng.set_stream(STREAM_EPOCH_BASE * (epoch as u64 + 1));
        order.shuffle(&mut shuffle_rng);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(gcfg.seed);
        noise_rng.set_stream(STREAM_EPOCH_BASE * (epoch as u64 + 1) + 1);

        let mut d_real = 0f64;
        let mut d_fake = 0f64;
        let mut g_loss = 0f64;

        match gcfg.alternation {
            Alternation::PerSample => {
                for &idx in &order {
                    let real = std::slice::from_ref(&encoded[idx]);
                    let dl = discriminator_step(
                        &mut state,
                        real,
                        cfg,
                        d_lr,
                        gcfg.d_hyper.l2,
                        &mut noise_rng,
                    )?;
                    d_real += dl.real;
                    d_fake += dl.fake;
                    let z = sample_noise(gcfg.noise_dim, cfg, &mut noise_rng);
                    g_loss +=
                        generator_step(&mut state, &[z], cfg, g_lr, gcfg.g_hyper.l2)?;
                }
                let n = order.len() as f64;
                d_real /= n;
                d_fake /= n;
                g_loss /= n;
            }
            Alternation::PerEpoch => {
                let batch: Vec<FiringTimes> =
                    order.iter().map(|&i| encoded[i].clone()).collect();
                let dl = discriminator_step(
                    &mut state,
                    &batch,
                    cfg,
                    d_lr,
                    gcfg.d_hyper.l2,
                    &mut noise_rng,
                )?;
                d_real = dl.real;
                d_fake = dl.fake;
                let zs: Vec<FiringTimes> = (0..order.len())
                    .map(|_| sample_noise(gcfg.noise_dim, cfg, &mut noise_rng))
                    .collect();
                g_loss = generator_step(&mut state, &zs, cfg, g_lr, gcfg.g_hyper.l2)?;
            }
        }

        state.epoch = epoch + 1;
        let row = GanEpochLoss {
            epoch: state.epoch,
            d_loss_real: d_real,
            d_loss_fake: d_fake,
            g_loss,
        };
        log::info!(
            "gan epoch {:>3}: d_real {:>10.2}  d_fake {:>10.2}  g {:>10.2}",
            row.epoch,
            row.d_loss_real,
            row.d_loss_fake,
            row.g_loss
        );
        losses.push(row);

        let due = (opts.checkpoint_every != 0 && state.epoch % opts.checkpoint_every == 0)
            || state.epoch == opts.epochs;
        if due {
            write_snapshot(&state, &fixed_noise, cfg, gcfg, opts)?;
        }
    }

    if let Some(dir) = opts.out_dir.as_deref() {
        write_gan_loss_csv(&losses, &dir.join("losses.csv"))?;
    }

    Ok(GanRun { state, losses })
}

/// Write per-epoch adversarial losses as CSV.
pub fn write_gan_loss_csv(losses: &[GanEpochLoss], path: &Path) -> Result<()> {
    let rows = losses
        .iter()
        .map(|l| {
            vec![
                l.epoch.to_string(),
                format!("{:.4}", l.d_loss_real),
                format!("{:.4}", l.d_loss_fake),
                format!("{:.4}", l.g_loss),
            ]
        })
        .collect::<Vec<_>>();
    write_csv(path, &["epoch", "d_loss_real", "d_loss_fake", "g_loss"], &rows)
}

/// Images sampled from a trained generator, with their spike budgets.
#[derive(Clone, Debug)]
pub struct GeneratedBatch {
    pub images: Vec<AnalogImage>,
    /// Spikes in the generator per sample (noise input included).
    pub g_spikes: Vec<u32>,
    /// Spikes in generator + discriminator per sample (the generated
    /// image is counted twice: as generator output and discriminator
    /// input, matching the two populations that physically fire).
    pub gd_spikes: Vec<u32>,
    /// How many samples the discriminator itself voted "real".
    pub fooled: usize,
}

/// Draw `n` samples from the generator (fresh noise from `seed`),
/// decode them to images, and account spikes; the discriminator is
/// run on each sample for the combined budget and its verdict.
pub fn generate_samples<T: Scalar>(
    state: &GanState<T>,
    n: usize,
    seed: u64,
    cfg: &SimConfig,
    width: usize,
    height: usize,
    i_max: u16,
) -> Result<GeneratedBatch> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    if width * height != state.output_pixels() {
        return Err(Error::DimMismatch {
            context: "requested image size vs generator output",
            expected: state.output_pixels(),
            got: width * height,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_GENERATE);
    let mut images = Vec::with_capacity(n);
    let mut g_spikes = Vec::with_capacity(n);
    let mut gd_spikes = Vec::with_capacity(n);
    let mut fooled = 0usize;
    for _ in 0..n {
        let z = sample_noise(state.noise_dim, cfg, &mut rng);
        let g_pass = network_forward(&state.generator, &z, cfg)?;
        let d_pass = network_forward(&state.discriminator, g_pass.output_times(), cfg)?;
        images.push(decode_ttfs(g_pass.output_times(), cfg, i_max, width, height)?);
        g_spikes.push(g_pass.total_spikes);
        gd_spikes.push(g_pass.total_spikes + d_pass.total_spikes);
        if d_pass.output_times().argmin_index() == REAL_NEURON {
            fooled += 1;
        }
    }
    Ok(GeneratedBatch {
        images,
        g_spikes,
        gd_spikes,
        fooled,
    })
}
