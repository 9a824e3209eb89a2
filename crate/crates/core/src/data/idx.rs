//! The big-endian IDX container used by MNIST and Fashion-MNIST.

use std::path::Path;

use super::{Dataset, Standardization};
use crate::numkit::Matrix;
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw unsigned-byte images: `count` images of `rows × cols` pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// Pixels scaled to `[0, 1]`, one image per row.
    pub fn to_matrix(&self) -> Matrix {
        let data = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Matrix::from_vec(self.count, self.rows * self.cols, data)
            .expect("pixel count checked on read")
    }
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes(b.try_into().expect("4 bytes")))
        .ok_or_else(|| Error::Format {
            offset,
            message: "file ends inside the header".into(),
        })
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let got = be_u32(bytes, 0)?;
    if got != want {
        return Err(Error::Format {
            offset: 0,
            message: format!("magic number {got:#010x}, expected {want:#010x}"),
        });
    }
    Ok(())
}

fn check_body(bytes: &[u8], header: usize, expected: usize) -> Result<()> {
    let body = bytes.len() - header;
    if body != expected {
        return Err(Error::Format {
            offset: header + body.min(expected),
            message: format!("expected {expected} data bytes, found {body}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    check_body(bytes, 16, count * rows * cols)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = be_u32(bytes, 4)? as usize;
    check_body(bytes, 8, count)?;
    Ok(bytes[8..].to_vec())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read(path.as_ref())?)
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read(path.as_ref())?)
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &IdxImages) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.count as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// Image/label pair as a dataset: pixels divided by 255, then standardized.
pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    n_out: usize,
    standardization: Standardization,
) -> Result<Dataset> {
    let images = read_idx_images(images_path.as_ref())?;
    let labels = read_idx_labels(labels_path.as_ref())?;
    if labels.len() != images.count {
        return Err(Error::Format {
            offset: 4,
            message: format!("{} labels for {} images", labels.len(), images.count),
        });
    }
    let mut inputs = images.to_matrix();
    standardization.apply(&mut inputs);
    let labels = labels.into_iter().map(usize::from).collect();
    let name = images_path
        .as_ref()
        .file_name()
        .map_or_else(|| "idx".to_string(), |n| n.to_string_lossy().into_owned());
    Dataset::new(inputs, labels, n_out, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_bytes(count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        for v in [IMAGES_MAGIC, count, rows, cols] {
            b.extend_from_slice(&v.to_be_bytes());
        }
        b.extend_from_slice(pixels);
        b
    }

    #[test]
    fn parses_header_and_pixels() {
        let img = parse_idx_images(&image_bytes(2, 2, 2, &[0, 1, 2, 3, 4, 5, 6, 7])).unwrap();
        assert_eq!((img.count, img.rows, img.cols), (2, 2, 2));
        assert_eq!(img.to_matrix().shape(), (2, 4));
    }

    #[test]
    fn bad_magic_reports_offset_zero() {
        let mut b = image_bytes(1, 1, 1, &[0]);
        b[3] = 0x01;
        match parse_idx_images(&b) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn truncated_files_are_format_errors() {
        let b = image_bytes(2, 2, 2, &[0, 1, 2]);
        assert!(matches!(
            parse_idx_images(&b),
            Err(Error::Format { offset: 19, .. })
        ));
        assert!(matches!(
            parse_idx_images(&b[..10]),
            Err(Error::Format { offset: 8, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&[0, 0, 8]),
            Err(Error::Format { offset: 0, .. })
        ));
    }
}
