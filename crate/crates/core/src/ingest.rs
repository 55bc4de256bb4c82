//! MNIST ingestion: IDX parsing and writing, per-class subsampling and
//! conversion of digit images to measures.

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::measure::{image_to_measure, DiscreteMeasure, GridImage};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Digit images with their labels. Images are unit-spaced with origin at the
/// origin, so pixel `(r, c)` sits at `(r + 0.5, c + 0.5)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<GridImage>,
    pub labels: Vec<u8>,
    /// Position of each item in the set it was drawn from.
    pub source_indices: Vec<usize>,
    /// SHA-256 (hex) of the image file bytes followed by the label file bytes.
    pub digest: String,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of items per label.
    pub fn class_counts(&self) -> BTreeMap<u8, usize> {
        let mut counts = BTreeMap::new();
        for &l in &self.labels {
            *counts.entry(l).or_insert(0) += 1;
        }
        counts
    }

    /// Raw intensities of every image, one vector per image.
    pub fn pixel_vectors(&self) -> Vec<Vec<f64>> {
        self.images.iter().map(|img| img.values().to_vec()).collect()
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(Error::TruncatedFile {
            needed: self.pos.saturating_add(n),
            available: self.bytes.len(),
        })?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let found = self.u32()?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }
}

/// Parses IDX image and label files already read into memory.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<LabeledImageSet> {
    let mut r = Reader { bytes: image_bytes, pos: 0 };
    r.magic(IMAGE_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    let pixels = r.take(count.saturating_mul(rows).saturating_mul(cols))?;

    let mut l = Reader { bytes: label_bytes, pos: 0 };
    l.magic(LABEL_MAGIC)?;
    let label_count = l.u32()? as usize;
    if label_count != count {
        return Err(Error::CountMismatch { images: count, labels: label_count });
    }
    let labels = l.take(label_count)?.to_vec();
    if let Some(bad) = labels.iter().find(|&&v| v > 9) {
        return Err(Error::Parse(format!("label {bad} outside 0-9")));
    }

    let per_image = rows * cols;
    let images = (0..count)
        .map(|k| {
            let values = pixels[k * per_image..(k + 1) * per_image].iter().map(|&b| f64::from(b)).collect();
            GridImage::unit_spaced(values, vec![rows, cols])
        })
        .collect::<Result<Vec<_>>>()?;

    let mut hasher = Sha256::new();
    hasher.update(image_bytes);
    hasher.update(label_bytes);
    let digest = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

    Ok(LabeledImageSet { images, labels, source_indices: (0..count).collect(), digest })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let images = std::fs::read(ip).map_err(|e| Error::io(ip, e))?;
    let labels = std::fs::read(lp).map_err(|e| Error::io(lp, e))?;
    parse_idx(&images, &labels)
}

/// IDX encoding of the set as `(image bytes, label bytes)`. Pixel values must
/// be integers in `0..=255` and all images must share one 2-D shape.
pub fn to_idx_bytes(set: &LabeledImageSet) -> Result<(Vec<u8>, Vec<u8>)> {
    let shape = set.images.first().map_or(vec![0, 0], |img| img.shape().to_vec());
    if shape.len() != 2 {
        return Err(Error::InvalidImage(format!("IDX images must be 2-D, got shape {shape:?}")));
    }
    if set.images.len() != set.labels.len() {
        return Err(Error::CountMismatch { images: set.images.len(), labels: set.labels.len() });
    }
    let mut images = Vec::with_capacity(16 + set.images.len() * shape[0] * shape[1]);
    images.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    for n in [set.images.len(), shape[0], shape[1]] {
        images.extend_from_slice(&(n as u32).to_be_bytes());
    }
    for img in &set.images {
        if img.shape() != shape.as_slice() {
            return Err(Error::ShapeMismatch(format!("image shape {:?} differs from {shape:?}", img.shape())));
        }
        for &v in img.values() {
            if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                return Err(Error::InvalidImage(format!("pixel value {v} is not a byte")));
            }
            images.push(v as u8);
        }
    }
    let mut labels = Vec::with_capacity(8 + set.labels.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&(set.labels.len() as u32).to_be_bytes());
    labels.extend_from_slice(&set.labels);
    Ok((images, labels))
}

pub fn write_idx(set: &LabeledImageSet, images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<()> {
    let (images, labels) = to_idx_bytes(set)?;
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    std::fs::write(ip, images).map_err(|e| Error::io(ip, e))?;
    std::fs::write(lp, labels).map_err(|e| Error::io(lp, e))
}

/// Draws `per_class[label]` items of each label uniformly without
/// replacement. Classes are visited in ascending label order with one
/// ChaCha stream seeded by `seed`; the result lists classes in that order and
/// keeps the original order within a class.
pub fn subsample(set: &LabeledImageSet, per_class: &BTreeMap<u8, usize>, seed: u64) -> Result<LabeledImageSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    for (&label, &requested) in per_class {
        let pool: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == label).collect();
        if requested > pool.len() {
            return Err(Error::InsufficientClassSamples { label, requested, available: pool.len() });
        }
        let mut chosen: Vec<usize> = rand::seq::index::sample(&mut rng, pool.len(), requested)
            .into_iter()
            .map(|k| pool[k])
            .collect();
        chosen.sort_unstable();
        picked.extend(chosen);
    }
    Ok(LabeledImageSet {
        images: picked.iter().map(|&i| set.images[i].clone()).collect(),
        labels: picked.iter().map(|&i| set.labels[i]).collect(),
        source_indices: picked.iter().map(|&i| set.source_indices[i]).collect(),
        digest: set.digest.clone(),
    })
}

/// One measure per image, with raw intensities as masses. Blank images are
/// rejected with their position in the set.
pub fn to_measures(set: &LabeledImageSet) -> Result<Vec<DiscreteMeasure>> {
    set.images
        .par_iter()
        .enumerate()
        .map(|(i, img)| {
            image_to_measure(img).map_err(|e| match e {
                Error::AllZeroImage { .. } => Error::AllZeroImage { index: Some(i) },
                other => other,
            })
        })
        .collect()
}
