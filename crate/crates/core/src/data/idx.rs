use std::path::Path;

use nalgebra::DMatrix;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw image tensor: `count` images of `rows × cols` unsigned bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn format_err(field: &'static str, detail: impl Into<String>) -> Error {
    Error::Format { field, detail: detail.into() }
}

fn read_u32(bytes: &[u8], at: usize, field: &'static str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(field, format!("file ends at byte {} inside the header", bytes.len())))
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0, "magic")?;
    if magic != expected {
        return Err(format_err(
            "magic",
            format!("expected {expected:#010x}, found {magic:#010x}"),
        ));
    }
    Ok(())
}

fn dim(bytes: &[u8], at: usize, field: &'static str) -> Result<usize> {
    Ok(read_u32(bytes, at, field)? as usize)
}

pub fn decode_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = dim(bytes, 4, "image count")?;
    let rows = dim(bytes, 8, "image rows")?;
    let cols = dim(bytes, 12, "image cols")?;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| format_err("image payload", "dimensions overflow"))?;
    let payload = &bytes[16..];
    if payload.len() != len {
        return Err(format_err(
            "image payload",
            format!("expected {len} bytes for {count}x{rows}x{cols}, found {}", payload.len()),
        ));
    }
    Ok(IdxImages { count, rows, cols, pixels: payload.to_vec() })
}

pub fn decode_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = dim(bytes, 4, "label count")?;
    let payload = &bytes[8..];
    if payload.len() != count {
        return Err(format_err(
            "label payload",
            format!("expected {count} bytes, found {}", payload.len()),
        ));
    }
    Ok(payload.to_vec())
}

pub fn encode_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Image `j` becomes column `j` of `X` (its bytes in file order, over 255);
/// labels become one-hot columns of `Y` with one row per class, where the
/// class count is the largest label plus one.
pub fn dataset_from_idx<T: Scalar>(images: &IdxImages, labels: &[u8]) -> Result<Dataset<T>> {
    if images.count != labels.len() {
        return Err(format_err(
            "count",
            format!("{} images but {} labels", images.count, labels.len()),
        ));
    }
    let d = images.rows * images.cols;
    let scale = lit::<T>(255.0);
    let x = DMatrix::from_iterator(
        d,
        images.count,
        images.pixels.iter().map(|&b| lit::<T>(f64::from(b)) / scale),
    );
    let classes = labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0);
    let mut y = DMatrix::zeros(classes, images.count);
    for (j, &l) in labels.iter().enumerate() {
        y[(l as usize, j)] = T::one();
    }
    let labels = labels.iter().map(|&l| l as usize).collect();
    Dataset::new(x, y, Some(labels), classes)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn load_idx<T: Scalar>(images_path: &Path, labels_path: &Path) -> Result<Dataset<T>> {
    let images = decode_images(&read(images_path)?)?;
    let labels = decode_labels(&read(labels_path)?)?;
    dataset_from_idx(&images, &labels)
}
