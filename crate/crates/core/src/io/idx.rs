//! MNIST-style IDX files (big-endian headers, unsigned-byte payloads).

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sets::LabeledSet;

pub const IMAGES_MAGIC: u32 = 2051;
pub const LABELS_MAGIC: u32 = 2049;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn u32(&mut self) -> Result<u32> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Truncated(format!(
                "{} file: need {} bytes at offset {}, have {}",
                self.what,
                n,
                self.pos,
                self.bytes.len()
            ))),
        }
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }
}

/// Parse in-memory IDX images and labels; pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<LabeledSet> {
    let mut img = Reader { bytes: images, pos: 0, what: "images" };
    img.magic(IMAGES_MAGIC)?;
    let count = img.u32()? as usize;
    let rows = img.u32()? as usize;
    let cols = img.u32()? as usize;

    let mut lab = Reader { bytes: labels, pos: 0, what: "labels" };
    lab.magic(LABELS_MAGIC)?;
    let label_count = lab.u32()? as usize;
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let pixels_per = rows * cols;
    let pixels = img.take(count * pixels_per)?;
    let label_bytes = lab.take(count)?;
    let features = Array2::from_shape_vec((count, pixels_per), pixels.iter().map(|&p| f64::from(p) / 255.0).collect())
        .expect("shape matches byte count");
    LabeledSet::new_unit_box(features, label_bytes.iter().map(|&l| usize::from(l)).collect())
}

pub fn load_mnist_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledSet> {
    let images = std::fs::read(images_path)?;
    let labels = std::fs::read(labels_path)?;
    parse_idx(&images, &labels)
}

/// Encode raw pixels and labels as an IDX (images, labels) byte pair.
pub fn encode_idx(rows: u32, cols: u32, pixels: &[u8], labels: &[u8]) -> Result<(Vec<u8>, Vec<u8>)> {
    let per = (rows * cols) as usize;
    if per == 0 || pixels.len() != per * labels.len() {
        return Err(Error::BadParams(format!(
            "{} pixels do not form {} images of {rows}x{cols}",
            pixels.len(),
            labels.len()
        )));
    }
    let count = labels.len() as u32;
    let mut images = Vec::with_capacity(16 + pixels.len());
    for word in [IMAGES_MAGIC, count, rows, cols] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    images.extend_from_slice(pixels);
    let mut lab = Vec::with_capacity(8 + labels.len());
    for word in [LABELS_MAGIC, count] {
        lab.extend_from_slice(&word.to_be_bytes());
    }
    lab.extend_from_slice(labels);
    Ok((images, lab))
}

pub fn write_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    rows: u32,
    cols: u32,
    pixels: &[u8],
    labels: &[u8],
) -> Result<()> {
    let (images, lab) = encode_idx(rows, cols, pixels, labels)?;
    std::fs::write(images_path, images)?;
    std::fs::write(labels_path, lab)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn be(words: &[u32]) -> Vec<u8> {
        words.iter().flat_map(|w| w.to_be_bytes()).collect()
    }

    #[test]
    fn hand_built_fixture() {
        let mut images = be(&[2051, 1, 2, 2]);
        images.extend_from_slice(&[0, 255, 128, 0]);
        let mut labels = be(&[2049, 1]);
        labels.push(7);
        let set = parse_idx(&images, &labels).unwrap();
        assert_eq!(set.row(0).to_vec(), vec![0.0, 1.0, 128.0 / 255.0, 0.0]);
        assert_eq!(set.labels(), &[7]);
    }

    #[test]
    fn count_mismatch() {
        let mut images = be(&[2051, 1, 1, 1]);
        images.push(0);
        let mut labels = be(&[2049, 2]);
        labels.extend_from_slice(&[1, 2]);
        assert!(matches!(
            parse_idx(&images, &labels),
            Err(Error::CountMismatch { images: 1, labels: 2 })
        ));
    }

    #[test]
    fn wrong_magic() {
        let images = be(&[2050, 0, 1, 1]);
        let labels = be(&[2049, 0]);
        assert!(matches!(
            parse_idx(&images, &labels),
            Err(Error::BadMagic { expected: 2051, found: 2050 })
        ));
    }

    #[test]
    fn truncated_payload() {
        let mut images = be(&[2051, 2, 2, 2]);
        images.extend_from_slice(&[1, 2, 3]);
        let labels = be(&[2049, 2]);
        assert!(matches!(parse_idx(&images, &labels), Err(Error::Truncated(_))));
        assert!(matches!(parse_idx(&[0, 0], &labels), Err(Error::Truncated(_))));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("img"), dir.path().join("lab"));
        write_idx(&ip, &lp, 1, 3, &[0, 51, 255, 255, 0, 102], &[3, 9]).unwrap();
        let set = load_mnist_idx(&ip, &lp).unwrap();
        assert_eq!(set.row(1).to_vec(), vec![1.0, 0.0, 0.4]);
        assert_eq!(set.labels(), &[3, 9]);
    }

    proptest! {
        #[test]
        fn encode_then_parse_is_identity(
            rows in 1u32..4, cols in 1u32..4,
            seed in proptest::collection::vec(any::<u8>(), 0..5 * 16),
        ) {
            let per = (rows * cols) as usize;
            let n = seed.len() / per.max(1);
            let pixels = &seed[..n * per];
            let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
            let (img, lab) = encode_idx(rows, cols, pixels, &labels).unwrap();
            let set = parse_idx(&img, &lab).unwrap();
            let back: Vec<u8> = set.features().iter().map(|v| (v * 255.0).round() as u8).collect();
            prop_assert_eq!(back, pixels.to_vec());
            prop_assert_eq!(set.labels().iter().map(|&l| l as u8).collect::<Vec<_>>(), labels);
        }
    }
}
