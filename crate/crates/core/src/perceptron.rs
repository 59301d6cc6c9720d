//! Homogeneous linear classifiers trained with the delta rule.
//!
//! A classifier is a weight vector `w` over the image pixels. Its response to
//! an object `x` is the inner product `y = Σ wₙxₙ`, which is exactly what a
//! bucket detector records when `x` is lit by the pattern `w`. Training
//! applies `wₙ ← wₙ + r(T − y)xₙ` with `T = +1` for the positive class and
//! `T = −1` for the rest. There is no bias term.
//!
//! Multi-class problems use one classifier per class; the predicted class is
//! the one with the largest response.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::dataset::{augment, AugmentParams, Dataset, Image};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed};

/// Any weight beyond this magnitude aborts training.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("weight vector must be non-empty"));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::arg(format!("weight {w} is not finite")));
        }
        Ok(WeightVector(weights))
    }

    pub fn zeros(len: usize) -> Self {
        WeightVector(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Training target for one binary classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Positive,
    Negative,
}

impl Target {
    pub fn value(self) -> f64 {
        match self {
            Target::Positive => 1.0,
            Target::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Initial weights are drawn uniformly from `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
    pub augment: AugmentParams,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            epochs: 50,
            init_range: 0.01,
            seed: 42,
            augment: AugmentParams::default(),
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::arg(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::arg("epochs must be at least 1"));
        }
        if !(self.init_range.is_finite() && self.init_range > 0.0) {
            return Err(Error::arg(format!(
                "init range must be positive, got {}",
                self.init_range
            )));
        }
        self.augment.validate()
    }
}

/// Detector readings for one object, one value per pattern or classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSequence {
    pub values: Vec<f64>,
}

impl MeasurementSequence {
    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = k;
        }
    }
    best
}

/// Inner product with four independent f64 accumulators.
pub(crate) fn dot(weights: &[f64], pixels: &[f32]) -> f64 {
    debug_assert_eq!(weights.len(), pixels.len());
    let mut acc = [0.0f64; 4];
    let wc = weights.chunks_exact(4);
    let xc = pixels.chunks_exact(4);
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (w, x) in wc.zip(xc) {
        for i in 0..4 {
            acc[i] += w[i] * f64::from(x[i]);
        }
    }
    let mut tail = 0.0;
    for (w, x) in wr.iter().zip(xr) {
        tail += w * f64::from(*x);
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Single-pixel reading `y = Σ wₙxₙ`.
pub fn measure(weights: &WeightVector, image: &Image) -> Result<f64> {
    Error::check_len(weights.len(), image.len())?;
    Ok(dot(weights.as_slice(), image.pixels()))
}

/// One delta-rule step. `y` is computed once from the incoming weights and
/// used for every entry.
pub fn delta_update(
    weights: &WeightVector,
    image: &Image,
    target: Target,
    rate: f64,
) -> Result<WeightVector> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::arg(format!("learning rate must be positive, got {rate}")));
    }
    let mut w = weights.0.clone();
    Error::check_len(w.len(), image.len())?;
    delta_step(&mut w, image.pixels(), target.value(), rate);
    WeightVector::new(w)
}

/// In-place delta step; returns the largest weight magnitude afterwards
/// (NaN if any weight is NaN).
fn delta_step(w: &mut [f64], x: &[f32], target: f64, rate: f64) -> f64 {
    let y = dot(w, x);
    let gain = rate * (target - y);
    let mut peak = 0.0f64;
    for (wn, &xn) in w.iter_mut().zip(x) {
        *wn += gain * f64::from(xn);
        peak = peak.max(wn.abs());
    }
    if gain.is_nan() {
        f64::NAN
    } else {
        peak
    }
}

/// Trains the binary classifier for `positive_class` from a seeded uniform
/// initialization.
///
/// The generator seeded with `config.seed` supplies, in order: the initial
/// weights, then per epoch the shuffle permutation (when enabled) followed by
/// one augmentation draw per visited sample (when enabled).
pub fn train_binary(train: &Dataset, positive_class: usize, config: &TrainConfig) -> Result<WeightVector> {
    config.validate()?;
    let (h, w) = train
        .shape()
        .ok_or_else(|| Error::arg("training set is empty"))?;
    let mut rng = rng_from_seed(config.seed);
    let a = config.init_range;
    let init = (0..h * w).map(|_| rng.random_range(-a..=a)).collect();
    run_training(train, positive_class, config, init, rng)
}

/// Like [`train_binary`] but starting from the given weights. The seeded
/// generator is still used for shuffling and augmentation.
pub fn train_binary_from(
    train: &Dataset,
    positive_class: usize,
    config: &TrainConfig,
    init: WeightVector,
) -> Result<WeightVector> {
    config.validate()?;
    let rng = rng_from_seed(config.seed);
    run_training(train, positive_class, config, init.0, rng)
}

fn run_training(
    train: &Dataset,
    positive_class: usize,
    config: &TrainConfig,
    mut weights: Vec<f64>,
    mut rng: crate::rng::Rng,
) -> Result<WeightVector> {
    if train.is_empty() {
        return Err(Error::arg("training set is empty"));
    }
    if positive_class >= train.classes() {
        return Err(Error::arg(format!(
            "class {positive_class} out of range for {} classes",
            train.classes()
        )));
    }
    let samples = train.samples();
    Error::check_len(weights.len(), samples[0].image.len())?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let augmenting = config.augment.enabled;
    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        for &i in &order {
            let sample = &samples[i];
            let target = if sample.label == positive_class { 1.0 } else { -1.0 };
            let peak = if augmenting {
                let img = augment(&sample.image, &config.augment, &mut rng);
                delta_step(&mut weights, img.pixels(), target, config.learning_rate)
            } else {
                delta_step(&mut weights, sample.image.pixels(), target, config.learning_rate)
            };
            if !(peak <= DIVERGENCE_LIMIT) {
                return Err(Error::Divergence {
                    class: None,
                    epoch,
                    sample: i,
                });
            }
        }
    }
    Ok(WeightVector(weights))
}

/// One-vs-rest classifiers, one weight vector per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierEnsemble {
    classifiers: Vec<WeightVector>,
    class_names: Vec<String>,
    height: usize,
    width: usize,
    config: TrainConfig,
}

impl ClassifierEnsemble {
    pub fn new(
        classifiers: Vec<WeightVector>,
        class_names: Vec<String>,
        height: usize,
        width: usize,
        config: TrainConfig,
    ) -> Result<Self> {
        if classifiers.is_empty() {
            return Err(Error::arg("ensemble needs at least one classifier"));
        }
        if class_names.len() != classifiers.len() {
            return Err(Error::Consistency(format!(
                "{} class names for {} classifiers",
                class_names.len(),
                classifiers.len()
            )));
        }
        for c in &classifiers {
            Error::check_len(height * width, c.len())?;
        }
        Ok(ClassifierEnsemble {
            classifiers,
            class_names,
            height,
            width,
            config,
        })
    }

    pub fn classifiers(&self) -> &[WeightVector] {
        &self.classifiers
    }

    pub fn classes(&self) -> usize {
        self.classifiers.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }
}

/// Seed used for class `k` of an ensemble trained with `seed`.
pub fn class_seed(seed: u64, class: usize) -> u64 {
    derive_seed(seed, class as u64)
}

/// Trains one classifier per class; class `k` uses the sub-seed
/// [`class_seed`]`(config.seed, k)`. Classes train in parallel and are
/// collected in class order.
pub fn train_ensemble(train: &Dataset, config: &TrainConfig) -> Result<ClassifierEnsemble> {
    config.validate()?;
    let (h, w) = train
        .shape()
        .ok_or_else(|| Error::arg("training set is empty"))?;
    if train.classes() < 2 {
        return Err(Error::arg(format!(
            "one-vs-rest training needs at least 2 classes, got {}",
            train.classes()
        )));
    }
    train.check_all_classes_present()?;
    let classifiers = (0..train.classes())
        .into_par_iter()
        .map(|k| {
            let sub = TrainConfig {
                seed: class_seed(config.seed, k),
                ..*config
            };
            train_binary(train, k, &sub).map_err(|e| match e {
                Error::Divergence { epoch, sample, .. } => Error::Divergence {
                    class: Some(k),
                    epoch,
                    sample,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ClassifierEnsemble::new(classifiers, train.class_names().to_vec(), h, w, *config)
}

/// All K readings `yₖ = wₖ · x` and the winning class.
pub fn classify_raw(
    ensemble: &ClassifierEnsemble,
    image: &Image,
) -> Result<(usize, MeasurementSequence)> {
    Error::check_len(ensemble.pixels(), image.len())?;
    let values: Vec<f64> = ensemble
        .classifiers
        .iter()
        .map(|c| dot(c.as_slice(), image.pixels()))
        .collect();
    let seq = MeasurementSequence { values };
    Ok((seq.argmax(), seq))
}
