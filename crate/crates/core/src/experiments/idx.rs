//! Reader for the big-endian IDX image and label format.

use std::path::Path;

use super::{Dataset, ExperimentError, Provenance, Targets};
use crate::numerics::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32, ExperimentError> {
    let chunk = bytes
        .get(offset..offset + 4)
        .ok_or(ExperimentError::Truncated { path: path.to_string(), expected: offset + 4, found: bytes.len() })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("4 bytes")))
}

fn check_magic(bytes: &[u8], expected: u32, path: &str) -> Result<(), ExperimentError> {
    let found = read_u32(bytes, 0, path)?;
    if found != expected {
        return Err(ExperimentError::WrongMagic { path: path.to_string(), expected, found });
    }
    Ok(())
}

/// Parses an image file into `count × (rows·cols)` pixels scaled to `[0, 1]`.
pub fn parse_idx_images(bytes: &[u8], path: &str) -> Result<(usize, usize, Vec<f64>), ExperimentError> {
    check_magic(bytes, IMAGE_MAGIC, path)?;
    let count = read_u32(bytes, 4, path)? as usize;
    let rows = read_u32(bytes, 8, path)? as usize;
    let cols = read_u32(bytes, 12, path)? as usize;
    let pixels = rows * cols;
    let expected = 16 + count * pixels;
    if bytes.len() < expected {
        return Err(ExperimentError::Truncated { path: path.to_string(), expected, found: bytes.len() });
    }
    let data = bytes[16..expected].iter().map(|&b| f64::from(b) / 255.0).collect();
    Ok((count, pixels, data))
}

pub fn parse_idx_labels(bytes: &[u8], path: &str) -> Result<Vec<usize>, ExperimentError> {
    check_magic(bytes, LABEL_MAGIC, path)?;
    let count = read_u32(bytes, 4, path)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(ExperimentError::Truncated { path: path.to_string(), expected, found: bytes.len() });
    }
    Ok(bytes[8..expected].iter().map(|&b| usize::from(b)).collect())
}

fn read_file(path: &Path) -> Result<Vec<u8>, ExperimentError> {
    std::fs::read(path)
        .map_err(|e| ExperimentError::Io { path: path.display().to_string(), message: e.to_string() })
}

/// Loads an image/label file pair, keeping at most `limit` samples. The class
/// count is one more than the largest label present.
pub fn load_idx(images: &Path, labels: &Path, limit: Option<usize>) -> Result<Dataset, ExperimentError> {
    let image_bytes = read_file(images)?;
    let label_bytes = read_file(labels)?;
    let (count, pixels, data) = parse_idx_images(&image_bytes, &images.display().to_string())?;
    let mut classes = parse_idx_labels(&label_bytes, &labels.display().to_string())?;
    if classes.len() != count {
        return Err(ExperimentError::CountMismatch { images: count, labels: classes.len() });
    }
    let keep = limit.map_or(count, |l| l.min(count));
    if keep == 0 || pixels == 0 {
        return Err(ExperimentError::InvalidDataset("idx file holds no samples".into()));
    }
    classes.truncate(keep);
    let n_classes = classes.iter().max().map_or(1, |&m| m + 1).max(2);
    let inputs = Matrix::new(keep, pixels, data[..keep * pixels].to_vec())
        .map_err(|e| ExperimentError::InvalidDataset(e.to_string()))?;
    Dataset::new(inputs, Targets::Classes { labels: classes, classes: n_classes }, Provenance::IdxImage, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(magic: u32, count: u32, rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        for v in [magic, count, rows, cols] {
            out.extend_from_slice(&v.to_be_bytes());
        }
        out.extend_from_slice(pixels);
        out
    }

    fn label_file(labels: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        out.extend_from_slice(labels);
        out
    }

    #[test]
    fn hand_built_image() {
        let bytes = image_file(2051, 1, 2, 2, &[0, 255, 0, 255]);
        let (count, pixels, data) = parse_idx_images(&bytes, "x").unwrap();
        assert_eq!((count, pixels), (1, 4));
        assert_eq!(data, vec![0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_magic_and_truncation() {
        let bytes = image_file(2052, 1, 2, 2, &[0, 255, 0, 255]);
        assert!(matches!(parse_idx_images(&bytes, "x"), Err(ExperimentError::WrongMagic { found: 2052, .. })));
        let bytes = image_file(2051, 2, 2, 2, &[0, 255, 0, 255]);
        assert!(matches!(parse_idx_images(&bytes, "x"), Err(ExperimentError::Truncated { .. })));
        assert!(matches!(parse_idx_labels(&[0, 0], "y"), Err(ExperimentError::Truncated { .. })));
    }

    #[test]
    fn load_with_limit_and_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img");
        let lab = dir.path().join("lab");
        let pixels: Vec<u8> = (0..20 * 4).map(|i| (i % 256) as u8).collect();
        std::fs::write(&img, image_file(2051, 20, 2, 2, &pixels)).unwrap();
        std::fs::write(&lab, label_file(&[1; 20])).unwrap();
        let ds = load_idx(&img, &lab, Some(10)).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!(ds.input_dim(), 4);
        std::fs::write(&lab, label_file(&[1; 19])).unwrap();
        assert!(matches!(load_idx(&img, &lab, None), Err(ExperimentError::CountMismatch { images: 20, labels: 19 })));
    }
}
