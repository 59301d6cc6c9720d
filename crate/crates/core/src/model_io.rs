//! Ensemble model files.
//!
//! A model file is a `key = value` text file: format tag, shape, class names,
//! the full training configuration and one `weights.<k>` line per class.
//! Weights are written in shortest round-trip form, so `save` then `load`
//! reproduces every `f64` bit for bit.

use std::path::Path;

use crate::dataset::AugmentParams;
use crate::error::{Error, Result};
use crate::kv::{join_f64, split_f64, KeyValues};
use crate::perceptron::{ClassifierEnsemble, TrainConfig, WeightVector};

pub const MODEL_FORMAT: &str = "mlspi-ensemble/1";

pub(crate) fn push_train_config(kv: &mut KeyValues, prefix: &str, c: &TrainConfig) {
    kv.push_f64(format!("{prefix}.learning_rate"), c.learning_rate);
    kv.push(format!("{prefix}.epochs"), c.epochs);
    kv.push_f64(format!("{prefix}.init_range"), c.init_range);
    kv.push(format!("{prefix}.seed"), c.seed);
    kv.push(format!("{prefix}.shuffle"), c.shuffle);
    kv.push(format!("{prefix}.augment.enabled"), c.augment.enabled);
    kv.push(format!("{prefix}.augment.max_shift"), c.augment.max_shift);
    kv.push_f64(format!("{prefix}.augment.max_rotation"), c.augment.max_rotation);
    kv.push_f64(format!("{prefix}.augment.scale_low"), c.augment.scale_range.0);
    kv.push_f64(format!("{prefix}.augment.scale_high"), c.augment.scale_range.1);
}

fn read_train_config(kv: &KeyValues, prefix: &str) -> Result<TrainConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    Ok(TrainConfig {
        learning_rate: kv.parse(&key("learning_rate"))?,
        epochs: kv.parse(&key("epochs"))?,
        init_range: kv.parse(&key("init_range"))?,
        seed: kv.parse(&key("seed"))?,
        shuffle: kv.parse(&key("shuffle"))?,
        augment: AugmentParams {
            enabled: kv.parse(&key("augment.enabled"))?,
            max_shift: kv.parse(&key("augment.max_shift"))?,
            max_rotation: kv.parse(&key("augment.max_rotation"))?,
            scale_range: (
                kv.parse(&key("augment.scale_low"))?,
                kv.parse(&key("augment.scale_high"))?,
            ),
        },
    })
}

pub fn ensemble_to_kv(ensemble: &ClassifierEnsemble) -> KeyValues {
    let mut kv = KeyValues::new();
    kv.push("format", MODEL_FORMAT);
    kv.push("classes", ensemble.classes());
    kv.push("height", ensemble.height());
    kv.push("width", ensemble.width());
    kv.push("pixels", ensemble.pixels());
    for (k, name) in ensemble.class_names().iter().enumerate() {
        kv.push(format!("class.{k}"), name);
    }
    push_train_config(&mut kv, "train", ensemble.config());
    for (k, w) in ensemble.classifiers().iter().enumerate() {
        kv.push(format!("weights.{k}"), join_f64(w.as_slice()));
    }
    kv
}

pub fn ensemble_from_kv(kv: &KeyValues) -> Result<ClassifierEnsemble> {
    let format = kv.require("format")?;
    if format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "unsupported model format `{format}`, expected `{MODEL_FORMAT}`"
        )));
    }
    let classes: usize = kv.parse("classes")?;
    let height: usize = kv.parse("height")?;
    let width: usize = kv.parse("width")?;
    let pixels: usize = kv.parse("pixels")?;
    if pixels != height * width {
        return Err(Error::Format(format!(
            "pixels = {pixels} but height x width = {}",
            height * width
        )));
    }
    let config = read_train_config(kv, "train")?;
    let mut names = Vec::with_capacity(classes);
    let mut classifiers = Vec::with_capacity(classes);
    for k in 0..classes {
        names.push(kv.require(&format!("class.{k}"))?.to_string());
        let key = format!("weights.{k}");
        let w = split_f64(&key, kv.require(&key)?)?;
        if w.len() != pixels {
            return Err(Error::Format(format!(
                "{key} has {} values, expected {pixels}",
                w.len()
            )));
        }
        classifiers.push(WeightVector::new(w)?);
    }
    ClassifierEnsemble::new(classifiers, names, height, width, config)
}

pub fn save_ensemble(ensemble: &ClassifierEnsemble, path: impl AsRef<Path>) -> Result<()> {
    ensemble_to_kv(ensemble).write(path.as_ref(), "mlspi classifier ensemble")
}

pub fn load_ensemble(path: impl AsRef<Path>) -> Result<ClassifierEnsemble> {
    let path = path.as_ref();
    ensemble_from_kv(&KeyValues::read(path)?)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}
