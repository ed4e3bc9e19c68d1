//! Conversion between analog images and first-spike times.
//!
//! Bright pixels spike early, dark pixels late, absent/zero intensity
//! maps to the latest step or (on decode) comes back from the sentinel
//! as black. One spike per pixel, which is the whole point: a full
//! image costs exactly `width * height` spikes.

use crate::error::{Error, Result};
use crate::sim::{FiringTimes, SimConfig};
use rand::Rng;

/// Grayscale image with an explicit intensity ceiling (255 for MNIST).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnalogImage {
    pub pixels: Vec<u16>,
    pub width: usize,
    pub height: usize,
    pub i_max: u16,
}

impl AnalogImage {
    pub fn new(pixels: Vec<u16>, width: usize, height: usize, i_max: u16) -> Result<Self> {
        if i_max == 0 {
            return Err(Error::InvalidParameter("i_max must be >= 1".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::DimMismatch {
                context: "image pixel buffer",
                expected: width * height,
                got: pixels.len(),
            });
        }
        if let Some(&p) = pixels.iter().find(|&&p| p > i_max) {
            return Err(Error::InvalidParameter(format!(
                "pixel value {p} exceeds i_max {i_max}"
            )));
        }
        Ok(AnalogImage {
            pixels,
            width,
            height,
            i_max,
        })
    }

    /// Pixels scaled to 0..=255 for display.
    pub fn luma8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| ((p as f64 * 255.0 / self.i_max as f64).round()) as u8)
            .collect()
    }
}

/// Encode an image as one spike per pixel: intensity `i_max` fires at
/// step 0, intensity 0 at the last step of the window.
pub fn encode_ttfs(img: &AnalogImage, cfg: &SimConfig) -> Result<FiringTimes> {
    let i_max = img.i_max as f64;
    let last = cfg.last_step() as f64;
    let mut times = Vec::with_capacity(img.pixels.len());
    for &p in &img.pixels {
        if p > img.i_max {
            return Err(Error::InvalidParameter(format!(
                "pixel value {p} exceeds i_max {}",
                img.i_max
            )));
        }
        let t = ((i_max - p as f64) / i_max * last).round();
        times.push(t as u32);
    }
    FiringTimes::new(times, cfg)
}

/// Inverse of [`encode_ttfs`]: early spikes become bright pixels. The
/// sentinel (never fired) decodes to intensity 0.
pub fn decode_ttfs(
    times: &FiringTimes,
    cfg: &SimConfig,
    i_max: u16,
    width: usize,
    height: usize,
) -> Result<AnalogImage> {
    if times.len() != width * height {
        return Err(Error::DimMismatch {
            context: "spike vector vs image size",
            expected: width * height,
            got: times.len(),
        });
    }
    let last = cfg.last_step() as f64;
    let mut pixels = Vec::with_capacity(times.len());
    for &t in times.iter() {
        if t > cfg.sentinel() {
            return Err(Error::InvalidParameter(format!(
                "firing time {t} exceeds sentinel {}",
                cfg.sentinel()
            )));
        }
        let p = if t >= cfg.sentinel() {
            0
        } else {
            (i_max as f64 * (1.0 - t as f64 / last)).round() as u16
        };
        pixels.push(p);
    }
    AnalogImage::new(pixels, width, height, i_max)
}

/// Random spike vector for the generator input: each entry uniform on
/// `0..=t_max` *inclusive*, so a noise neuron stays silent with
/// probability `1/(t_max+1)`.
pub fn sample_noise<R: Rng + ?Sized>(dim: usize, cfg: &SimConfig, rng: &mut R) -> FiringTimes {
    let times = (0..dim)
        .map(|_| rng.random_range(0..=cfg.sentinel()))
        .collect();
    FiringTimes::from_vec_unchecked(times)
}

/// Average spikes per image under three input codings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodingCostReport {
    pub images: usize,
    /// Count coding: intensity expressed as `i_max - p` spikes per pixel.
    pub count_coding: f64,
    /// Inverted count coding: `p` spikes per pixel.
    pub inverted_count_coding: f64,
    /// First-spike coding: exactly one spike per pixel.
    pub ttfs_coding: f64,
}

/// Mean per-image spike cost of the three codings over a dataset.
pub fn coding_cost_report(images: &[AnalogImage]) -> Result<CodingCostReport> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("coding cost report"));
    }
    let mut count = 0f64;
    let mut inverted = 0f64;
    let mut pixels = 0f64;
    for img in images {
        let sum: u64 = img.pixels.iter().map(|&p| p as u64).sum();
        let n = img.pixels.len() as u64;
        inverted += sum as f64;
        count += (n * img.i_max as u64 - sum) as f64;
        pixels += n as f64;
    }
    let m = images.len() as f64;
    Ok(CodingCostReport {
        images: images.len(),
        count_coding: count / m,
        inverted_count_coding: inverted / m,
        ttfs_coding: pixels / m,
    })
}
