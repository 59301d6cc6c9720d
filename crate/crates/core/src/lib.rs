//! Linear classification with a single-pixel detector.
//!
//! An object image lit by an illumination pattern produces one detector
//! reading: the inner product of pattern and image. A pattern whose pixels
//! are the weights of a linear classifier therefore computes that
//! classifier's score optically. This crate trains such weights with the
//! delta rule ([`perceptron`]), turns them into non-negative projector
//! patterns ([`optics`]), simulates the detector with noise, and scores the
//! result ([`evaluation`]).
//!
//! ```no_run
//! use mlspi::{dataset, perceptron, optics, evaluation};
//!
//! let train = dataset::load_idx("train-images-idx3-ubyte", "train-labels-idx1-ubyte")?;
//! let test = dataset::load_idx("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;
//! let train = dataset::subset(&train, 20_000, 7)?;
//! let ensemble = perceptron::train_ensemble(&train, &perceptron::TrainConfig::default())?;
//! let patterns = optics::realize(&ensemble, None, None)?;
//! let model = evaluation::Model::Optical { patterns: &patterns, noise: optics::NoiseModel::NONE };
//! println!("{:.4}", evaluation::evaluate(&model, &test)?.accuracy);
//! # Ok::<(), mlspi::Error>(())
//! ```

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod kv;
pub mod model_io;
pub mod optics;
pub mod perceptron;
pub mod pgm;
pub mod rng;

pub use dataset::{AugmentParams, Dataset, Image, LabeledSample};
pub use error::{Error, Result};
pub use evaluation::{ConfusionMatrix, EvalReport, Model};
pub use optics::{NoiseKind, NoiseModel, RealizedPatternSet};
pub use perceptron::{ClassifierEnsemble, MeasurementSequence, Target, TrainConfig, WeightVector};
