//! Labeled intensity images and the loaders that produce them.

mod augment;
mod idx;
mod imagedir;

pub use augment::{apply_affine, augment, AffineDraw, AugmentParams};
pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use imagedir::{load_image_dir, load_image_file, resize_bilinear};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Non-negative object intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pixels: Vec<f32>,
    height: usize,
    width: usize,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::arg(format!("image must be non-empty, got {height}x{width}")));
        }
        Error::check_len(height * width, pixels.len())?;
        if let Some(p) = pixels.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::arg(format!("pixel value {p} outside [0, 1]")));
        }
        Ok(Image {
            pixels,
            height,
            width,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Image {
            pixels: vec![0.0; height * width],
            height,
            width,
        }
    }

    pub fn from_bytes(height: usize, width: usize, bytes: &[u8]) -> Result<Self> {
        Error::check_len(height * width, bytes.len())?;
        let pixels = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Image::new(height, width, pixels)
    }

    /// Inverse of [`Image::from_bytes`]: `round(pixel * 255)`.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.pixels[row * self.width + col]
    }

    pub fn total_intensity(&self) -> f64 {
        self.pixels.iter().map(|&p| f64::from(p)).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub image: Image,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    class_names: Vec<String>,
    samples: Vec<LabeledSample>,
}

impl Dataset {
    /// Builds a dataset, checking that every image has the same shape and
    /// every label indexes into `class_names`.
    pub fn new(
        name: impl Into<String>,
        class_names: Vec<String>,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        let classes = class_names.len();
        if classes == 0 {
            return Err(Error::arg("dataset needs at least one class"));
        }
        if let Some(first) = samples.first() {
            let (h, w) = (first.image.height(), first.image.width());
            for (i, s) in samples.iter().enumerate() {
                if s.image.height() != h || s.image.width() != w {
                    return Err(Error::Consistency(format!(
                        "sample {i} is {}x{}, expected {h}x{w}",
                        s.image.height(),
                        s.image.width()
                    )));
                }
                if s.label >= classes {
                    return Err(Error::Consistency(format!(
                        "sample {i} has label {} but only {classes} classes exist",
                        s.label
                    )));
                }
            }
        }
        Ok(Dataset {
            name: name.into(),
            class_names,
            samples,
        })
    }

    /// Dataset whose class names are the decimal indices `0..classes`.
    pub fn with_numbered_classes(
        name: impl Into<String>,
        classes: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        Dataset::new(name, (0..classes).map(|k| k.to_string()).collect(), samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `(height, width)` of the images, `None` for an empty dataset.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.samples
            .first()
            .map(|s| (s.image.height(), s.image.width()))
    }

    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Training sets must show every class at least once.
    pub fn check_all_classes_present(&self) -> Result<()> {
        match self.label_counts().iter().position(|&c| c == 0) {
            Some(k) => Err(Error::Consistency(format!(
                "class {k} ({}) has no samples in {}",
                self.class_names[k], self.name
            ))),
            None => Ok(()),
        }
    }

    /// First `count` samples in file order.
    pub fn head(&self, count: usize) -> Result<Dataset> {
        if count > self.len() {
            return Err(Error::arg(format!(
                "requested {count} samples from a dataset of {}",
                self.len()
            )));
        }
        Ok(Dataset {
            name: self.name.clone(),
            class_names: self.class_names.clone(),
            samples: self.samples[..count].to_vec(),
        })
    }

    /// Appends the samples of `other`, which must share classes and shape.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.class_names != other.class_names {
            return Err(Error::Consistency("datasets have different classes".into()));
        }
        let mut samples = self.samples.clone();
        samples.extend_from_slice(&other.samples);
        Dataset::new(self.name.clone(), self.class_names.clone(), samples)
    }
}

/// Draws `count` samples uniformly without replacement.
///
/// The draw order is kept, so `subset(d, d.len(), seed)` is a seeded
/// permutation of `d`.
pub fn subset(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::arg("subset size must be positive"));
    }
    if count > dataset.len() {
        return Err(Error::arg(format!(
            "requested {count} samples from a dataset of {}",
            dataset.len()
        )));
    }
    let mut rng = rng_from_seed(seed);
    let picked = rand::seq::index::sample(&mut rng, dataset.len(), count);
    let samples = picked
        .iter()
        .map(|i| dataset.samples[i].clone())
        .collect();
    Ok(Dataset {
        name: dataset.name.clone(),
        class_names: dataset.class_names.clone(),
        samples,
    })
}
