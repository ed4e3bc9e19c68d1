//! Dataset files in, artifacts out: IDX parsing, grayscale image
//! grids (PGM and PNG), and CSV tables.

use crate::codec::AnalogImage;
use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::Path;

/// Magic number of IDX3 image files.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Magic number of IDX1 label files.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Truncated {
            needed: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Load an IDX3 file of 8-bit grayscale images.
pub fn load_idx_images(path: &Path) -> Result<Vec<AnalogImage>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_be_u32(&bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            found: magic,
            offset: 0,
        });
    }
    let n = read_be_u32(&bytes, 4)? as usize;
    let rows = read_be_u32(&bytes, 8)? as usize;
    let cols = read_be_u32(&bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::DimMismatch {
            context: "idx image dimensions",
            expected: 1,
            got: rows.min(cols),
        });
    }
    let needed = 16usize + n * rows * cols;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::DimMismatch {
            context: "idx payload length",
            expected: needed,
            got: bytes.len(),
        });
    }
    bytes[16..]
        .chunks_exact(rows * cols)
        .map(|chunk| {
            AnalogImage::new(
                chunk.iter().map(|&b| b as u16).collect(),
                cols,
                rows,
                255,
            )
        })
        .collect()
}

/// Load an IDX1 file of digit labels (each must be 0..=9).
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = read_be_u32(&bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            found: magic,
            offset: 0,
        });
    }
    let n = read_be_u32(&bytes, 4)? as usize;
    let needed = 8usize + n;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::DimMismatch {
            context: "idx payload length",
            expected: needed,
            got: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    if let Some((index, &value)) = labels.iter().enumerate().find(|&(_, &v)| v > 9) {
        return Err(Error::LabelOutOfRange { index, value });
    }
    Ok(labels)
}

/// Paired images and labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub images: Vec<AnalogImage>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(images: Vec<AnalogImage>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::PairMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        Ok(Dataset { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Just the samples of one digit class.
    pub fn filter_digit(&self, digit: u8) -> Dataset {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for (img, &lbl) in self.images.iter().zip(&self.labels) {
            if lbl == digit {
                images.push(img.clone());
                labels.push(lbl);
            }
        }
        Dataset { images, labels }
    }

    /// Truncate to at most `n` samples (handy for smoke runs).
    pub fn truncate(&mut self, n: usize) {
        self.images.truncate(n);
        self.labels.truncate(n);
    }
}

/// Load a paired image/label file set.
pub fn load_dataset(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    Dataset::new(load_idx_images(images_path)?, load_idx_labels(labels_path)?)
}

/// Load train and test splits from a directory using the conventional
/// MNIST file names.
pub fn load_mnist_dir(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_dataset(
        &dir.join("train-images-idx3-ubyte"),
        &dir.join("train-labels-idx1-ubyte"),
    )?;
    let test = load_dataset(
        &dir.join("t10k-images-idx3-ubyte"),
        &dir.join("t10k-labels-idx1-ubyte"),
    )?;
    Ok((train, test))
}

/// Output format for image grids.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridFormat {
    Pgm,
    Png,
}

/// Separator width between grid tiles, in pixels.
pub const GRID_SEPARATOR: usize = 2;
/// Gray level of the separator/background.
pub const GRID_GRAY: u8 = 128;

/// Compose equally sized images into one canvas with 2-pixel gray
/// separators. Returns `(width, height, pixels)` row-major.
pub fn render_grid(images: &[AnalogImage], columns: usize) -> Result<(usize, usize, Vec<u8>)> {
    if images.is_empty() {
        return Err(Error::EmptyDataset("image grid"));
    }
    if columns == 0 {
        return Err(Error::InvalidParameter("grid needs >= 1 column".into()));
    }
    let (w, h) = (images[0].width, images[0].height);
    if let Some(bad) = images.iter().find(|i| i.width != w || i.height != h) {
        return Err(Error::DimMismatch {
            context: "grid tile size",
            expected: w * h,
            got: bad.width * bad.height,
        });
    }
    let rows = images.len().div_ceil(columns);
    let canvas_w = columns * w + (columns - 1) * GRID_SEPARATOR;
    let canvas_h = rows * h + (rows - 1) * GRID_SEPARATOR;
    let mut canvas = vec![GRID_GRAY; canvas_w * canvas_h];
    for (idx, img) in images.iter().enumerate() {
        let (gr, gc) = (idx / columns, idx % columns);
        let top = gr * (h + GRID_SEPARATOR);
        let left = gc * (w + GRID_SEPARATOR);
        let luma = img.luma8();
        for r in 0..h {
            let dst = (top + r) * canvas_w + left;
            canvas[dst..dst + w].copy_from_slice(&luma[r * w..(r + 1) * w]);
        }
    }
    Ok((canvas_w, canvas_h, canvas))
}

/// Render and write an image grid in the requested format.
pub fn write_image_grid(
    images: &[AnalogImage],
    columns: usize,
    path: &Path,
    format: GridFormat,
) -> Result<()> {
    let (w, h, pixels) = render_grid(images, columns)?;
    match format {
        GridFormat::Pgm => write_pgm(path, w, h, &pixels),
        GridFormat::Png => write_png(path, w, h, pixels),
    }
}

/// Binary PGM (P5), maxval 255.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::DimMismatch {
            context: "pgm pixel buffer",
            expected: width * height,
            got: pixels.len(),
        });
    }
    let mut out = Vec::with_capacity(pixels.len() + 32);
    write!(out, "P5\n{width} {height}\n255\n").expect("vec write");
    out.extend_from_slice(pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn write_png(path: &Path, width: usize, height: usize, pixels: Vec<u8>) -> Result<()> {
    let img = image::GrayImage::from_raw(width as u32, height as u32, pixels)
        .expect("buffer length checked by render_grid");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::ImageEncode(e.to_string()))
}

/// Read a binary PGM (P5) file back: `(width, height, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    // Header: "P5", then width, height, maxval as ASCII separated by
    // whitespace, then exactly one whitespace byte before the raster.
    let mut fields = Vec::new();
    let mut pos = 0usize;
    while fields.len() < 4 && pos < bytes.len() {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        fields.push(&bytes[start..pos]);
    }
    if fields.len() < 4 || fields[0] != b"P5" {
        return Err(Error::InvalidParameter("not a binary PGM (P5) file".into()));
    }
    let parse = |f: &[u8]| -> Result<usize> {
        std::str::from_utf8(f)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::InvalidParameter("bad PGM header field".into()))
    };
    let (w, h, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
    if maxval != 255 {
        return Err(Error::InvalidParameter(format!(
            "unsupported PGM maxval {maxval}"
        )));
    }
    pos += 1; // single whitespace after maxval
    let needed = pos + w * h;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            found: bytes.len(),
        });
    }
    Ok((w, h, bytes[pos..needed].to_vec()))
}

/// Write a CSV table: header row plus stringified rows, UTF-8 with LF
/// line endings.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
