//! Reader for IDX3 image files (the MNIST distribution format).
//!
//! Layout: big-endian `u32` magic `0x00000803`, image count, rows, columns,
//! then `count·rows·cols` unsigned bytes in row-major order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use eot_core::Measure;
use ndarray::Array1;

use crate::error::{BenchError, Result};

pub const IDX3_MAGIC: u32 = 0x0000_0803;
const HEADER_LEN: usize = 16;

/// One image turned into a probability measure over its pixels.
#[derive(Debug, Clone)]
pub struct ImageMeasure {
    pub height: usize,
    pub width: usize,
    pub measure: Measure,
    pub source_id: usize,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let word = bytes.get(offset..offset + 4).ok_or_else(|| BenchError::Format {
        offset,
        message: format!("header truncated (file is {} bytes)", bytes.len()),
    })?;
    Ok(u32::from_be_bytes(word.try_into().expect("4-byte slice")))
}

/// Number of images, rows and columns declared by an IDX3 header.
pub fn idx_header(bytes: &[u8]) -> Result<(usize, usize, usize)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX3_MAGIC {
        return Err(BenchError::Format {
            offset: 0,
            message: format!("bad magic {magic:#010x}, expected {IDX3_MAGIC:#010x}"),
        });
    }
    Ok((read_u32(bytes, 4)? as usize, read_u32(bytes, 8)? as usize, read_u32(bytes, 12)? as usize))
}

/// Decodes image `index` from in-memory IDX3 bytes.
pub fn parse_idx(bytes: &[u8], index: usize) -> Result<ImageMeasure> {
    let (count, height, width) = idx_header(bytes)?;
    if index >= count {
        return Err(BenchError::Input(format!("image index {index} out of range (file holds {count})")));
    }
    let pixels = height * width;
    let start = HEADER_LEN + index * pixels;
    let raw = bytes.get(start..start + pixels).ok_or_else(|| BenchError::Format {
        offset: bytes.len(),
        message: format!("pixel data truncated: image {index} needs bytes {start}..{}", start + pixels),
    })?;
    let weights = Array1::from_iter(raw.iter().map(|&p| p as f64));
    let measure = Measure::normalised(weights)
        .map_err(|e| BenchError::Input(format!("image {index} at byte {start}: {e}")))?;
    Ok(ImageMeasure {
        height,
        width,
        measure,
        source_id: index,
    })
}

pub fn load_idx(path: &Path, index: usize) -> Result<ImageMeasure> {
    let bytes = std::fs::read(path).map_err(|e| BenchError::io(path, e))?;
    parse_idx(&bytes, index)
}

/// `path:index` reference to one image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSelector {
    pub path: PathBuf,
    pub index: usize,
}

impl ImageSelector {
    pub fn load(&self) -> Result<ImageMeasure> {
        load_idx(&self.path, self.index)
    }
}

impl FromStr for ImageSelector {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        let (path, index) = s
            .rsplit_once(':')
            .ok_or_else(|| BenchError::Input(format!("expected <file>:<index>, got '{s}'")))?;
        let index = index
            .parse()
            .map_err(|_| BenchError::Input(format!("image index '{index}' is not a count")))?;
        if path.is_empty() {
            return Err(BenchError::Input(format!("missing file in '{s}'")));
        }
        Ok(Self {
            path: PathBuf::from(path),
            index,
        })
    }
}

impl fmt::Display for ImageSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.path.display(), self.index)
    }
}

/// Encodes images as IDX3 bytes; used to build fixtures.
pub fn encode_idx(height: usize, width: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + images.len() * height * width);
    for word in [IDX3_MAGIC, images.len() as u32, height as u32, width as u32] {
        out.extend_from_slice(&word.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), height * width, "image size does not match the header");
        out.extend_from_slice(img);
    }
    out
}
