//! Binary checkpoint container for trained networks.
//!
//! One fixed little-endian layout, two payload kinds: a plain network
//! (classifier) or a generator/discriminator pair with its training
//! position. Weights are stored as f64 regardless of the in-memory
//! scalar so a file round-trips exactly for both float widths. Writes
//! go through a temp file and an atomic rename.

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::scalar::Scalar;
use crate::sim::{LayerParams, SimConfig};
use std::fs;
use std::path::Path;

/// File magic, first 8 bytes of every checkpoint.
pub const MAGIC: &[u8; 8] = b"SPIKEGAN";
/// Current format version.
pub const VERSION: u32 = 1;
/// Payload kind: a single feed-forward network.
pub const KIND_NETWORK: u32 = 1;
/// Payload kind: generator + discriminator with training position.
pub const KIND_GAN: u32 = 2;

/// Serialized GAN training state.
#[derive(Clone, Debug)]
pub struct GanCheckpoint<T> {
    pub generator: Vec<LayerParams<T>>,
    pub discriminator: Vec<LayerParams<T>>,
    /// Number of completed training epochs.
    pub epoch: u32,
    pub noise_dim: u32,
    /// Master seed of the training run.
    pub seed: u64,
    pub cfg: SimConfig,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn new(kind: u32) -> Self {
        let mut buf = Vec::with_capacity(64);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&kind.to_le_bytes());
        Writer { buf }
    }

    fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn layers<T: Scalar>(&mut self, layers: &[LayerParams<T>]) {
        self.u32(layers.len() as u32);
        for l in layers {
            self.u32(l.n_out() as u32);
            self.u32(l.n_in() as u32);
            self.f64(l.threshold().to_f64_lossy());
            for &w in l.weights().data() {
                self.f64(w.to_f64_lossy());
            }
        }
    }

    fn commit(self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, &self.buf).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if self.bytes.len() < end {
            return Err(Error::Truncated {
                needed: end,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn open(bytes: &'a [u8], expected_kind: u32) -> Result<Reader<'a>> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(8)?;
        if magic != MAGIC {
            let found = u32::from_le_bytes(bytes[..4.min(bytes.len())].try_into().unwrap_or([0; 4]));
            return Err(Error::BadMagic {
                expected: u32::from_le_bytes(MAGIC[..4].try_into().unwrap()),
                found,
                offset: 0,
            });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let kind = r.u32()?;
        if kind != expected_kind {
            return Err(Error::WrongCheckpointKind {
                expected: expected_kind,
                found: kind,
            });
        }
        Ok(r)
    }

    fn layers<T: Scalar>(&mut self) -> Result<Vec<LayerParams<T>>> {
        let n = self.u32()? as usize;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let n_out = self.u32()? as usize;
            let n_in = self.u32()? as usize;
            let theta = T::from_f64_lossy(self.f64()?);
            let mut data = Vec::with_capacity(n_out * n_in);
            for _ in 0..n_out * n_in {
                data.push(T::from_f64_lossy(self.f64()?));
            }
            layers.push(LayerParams::new(Mat::from_vec(n_out, n_in, data)?, theta)?);
        }
        Ok(layers)
    }

    fn done(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::DimMismatch {
                context: "checkpoint trailing bytes",
                expected: self.pos,
                got: self.bytes.len(),
            });
        }
        Ok(())
    }
}

/// Save a plain network with its simulation window.
pub fn write_network_file<T: Scalar>(
    path: &Path,
    layers: &[LayerParams<T>],
    cfg: &SimConfig,
) -> Result<()> {
    let mut w = Writer::new(KIND_NETWORK);
    w.u32(cfg.t_max());
    w.u32(std::mem::size_of::<T>() as u32);
    w.layers(layers);
    w.commit(path)
}

/// Load a plain network and its simulation window.
pub fn read_network_file<T: Scalar>(path: &Path) -> Result<(Vec<LayerParams<T>>, SimConfig)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::open(&bytes, KIND_NETWORK)?;
    let cfg = SimConfig::new(r.u32()?)?;
    let _scalar_width = r.u32()?;
    let layers = r.layers()?;
    r.done()?;
    Ok((layers, cfg))
}

/// Save GAN training state.
pub fn write_gan_file<T: Scalar>(path: &Path, ck: &GanCheckpoint<T>) -> Result<()> {
    let mut w = Writer::new(KIND_GAN);
    w.u32(ck.cfg.t_max());
    w.u32(std::mem::size_of::<T>() as u32);
    w.u32(ck.epoch);
    w.u32(ck.noise_dim);
    w.u64(ck.seed);
    w.layers(&ck.generator);
    w.layers(&ck.discriminator);
    w.commit(path)
}

/// Load GAN training state.
pub fn read_gan_file<T: Scalar>(path: &Path) -> Result<GanCheckpoint<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader::open(&bytes, KIND_GAN)?;
    let cfg = SimConfig::new(r.u32()?)?;
    let _scalar_width = r.u32()?;
    let epoch = r.u32()?;
    let noise_dim = r.u32()?;
    let seed = r.u64()?;
    let generator = r.layers()?;
    let discriminator = r.layers()?;
    r.done()?;
    Ok(GanCheckpoint {
        generator,
        discriminator,
        epoch,
        noise_dim,
        seed,
        cfg,
    })
}
