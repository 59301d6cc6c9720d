//! Python bindings for `mlspi`.
//!
//! Images cross the boundary as flat row-major lists of floats in [0, 1].

use std::path::PathBuf;

use mlspi::dataset::{self, LabeledSample};
use mlspi::evaluation::{self, Model};
use mlspi::optics::{self, NoiseKind};
use mlspi::perceptron::{self, ClassifierEnsemble, Target, WeightVector};
use mlspi::{model_io, AugmentParams, Error, Image};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Divergence { .. } | Error::Degenerate(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn image(pixels: Vec<f32>, height: usize, width: usize) -> PyResult<Image> {
    Image::new(height, width, pixels).map_err(err)
}

fn target(t: i32) -> PyResult<Target> {
    match t {
        1 => Ok(Target::Positive),
        -1 => Ok(Target::Negative),
        _ => Err(PyValueError::new_err(format!("target must be 1 or -1, got {t}"))),
    }
}

/// Labelled images of one shape.
#[pyclass(name = "Dataset", module = "mlspi_py", skip_from_py_object)]
#[derive(Clone)]
struct PyDataset(mlspi::Dataset);

#[pymethods]
impl PyDataset {
    /// Builds a dataset from flat pixel lists; classes are numbered `0..classes`.
    #[new]
    #[pyo3(signature = (images, labels, height, width, classes=None, name="memory"))]
    fn new(
        images: Vec<Vec<f32>>,
        labels: Vec<usize>,
        height: usize,
        width: usize,
        classes: Option<usize>,
        name: &str,
    ) -> PyResult<Self> {
        if images.len() != labels.len() {
            return Err(PyValueError::new_err(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let classes = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
        let samples = images
            .into_iter()
            .zip(labels)
            .map(|(px, label)| Ok(LabeledSample { image: image(px, height, width)?, label }))
            .collect::<PyResult<Vec<_>>>()?;
        mlspi::Dataset::with_numbered_classes(name, classes, samples)
            .map(PyDataset)
            .map_err(err)
    }

    #[staticmethod]
    fn load_idx(images: PathBuf, labels: PathBuf) -> PyResult<Self> {
        dataset::load_idx(images, labels).map(PyDataset).map_err(err)
    }

    #[staticmethod]
    fn load_image_dir(root: PathBuf, height: usize, width: usize) -> PyResult<Self> {
        dataset::load_image_dir(root, (height, width))
            .map(PyDataset)
            .map_err(err)
    }

    fn subset(&self, count: usize, seed: u64) -> PyResult<Self> {
        dataset::subset(&self.0, count, seed).map(PyDataset).map_err(err)
    }

    fn image(&self, index: usize) -> PyResult<Vec<f32>> {
        self.sample(index).map(|s| s.image.pixels().to_vec())
    }

    fn label(&self, index: usize) -> PyResult<usize> {
        self.sample(index).map(|s| s.label)
    }

    fn label_counts(&self) -> Vec<usize> {
        self.0.label_counts()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.0.class_names().to_vec()
    }

    #[getter]
    fn shape(&self) -> Option<(usize, usize)> {
        self.0.shape()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, samples={}, classes={})",
            self.0.name(),
            self.0.len(),
            self.0.classes()
        )
    }
}

impl PyDataset {
    fn sample(&self, index: usize) -> PyResult<&LabeledSample> {
        self.0
            .samples()
            .get(index)
            .ok_or_else(|| PyValueError::new_err(format!("index {index} out of range")))
    }
}

/// Delta-rule training settings.
#[pyclass(name = "TrainConfig", module = "mlspi_py", get_all, set_all, from_py_object)]
#[derive(Clone)]
struct PyTrainConfig {
    learning_rate: f64,
    epochs: usize,
    init_range: f64,
    seed: u64,
    shuffle: bool,
    augment: bool,
}

#[pymethods]
impl PyTrainConfig {
    #[new]
    #[pyo3(signature = (learning_rate=1e-4, epochs=50, init_range=0.01, seed=42, shuffle=true, augment=false))]
    fn new(learning_rate: f64, epochs: usize, init_range: f64, seed: u64, shuffle: bool, augment: bool) -> Self {
        PyTrainConfig {
            learning_rate,
            epochs,
            init_range,
            seed,
            shuffle,
            augment,
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "TrainConfig(learning_rate={}, epochs={}, init_range={}, seed={}, shuffle={}, augment={})",
            self.learning_rate, self.epochs, self.init_range, self.seed, self.shuffle, self.augment
        )
    }
}

impl PyTrainConfig {
    fn to_core(&self) -> mlspi::TrainConfig {
        mlspi::TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            init_range: self.init_range,
            seed: self.seed,
            shuffle: self.shuffle,
            augment: AugmentParams {
                enabled: self.augment,
                ..AugmentParams::default()
            },
        }
    }
}

/// One-vs-rest linear classifiers.
#[pyclass(name = "Ensemble", module = "mlspi_py", skip_from_py_object)]
#[derive(Clone)]
struct PyEnsemble(ClassifierEnsemble);

#[pymethods]
impl PyEnsemble {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        model_io::load_ensemble(path).map(PyEnsemble).map_err(err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        model_io::save_ensemble(&self.0, path).map_err(err)
    }

    fn weights(&self, class_index: usize) -> PyResult<Vec<f64>> {
        self.0
            .classifiers()
            .get(class_index)
            .map(|w| w.as_slice().to_vec())
            .ok_or_else(|| PyValueError::new_err(format!("class {class_index} out of range")))
    }

    /// Returns `(class, readings)` for one flat image.
    fn classify(&self, pixels: Vec<f32>) -> PyResult<(usize, Vec<f64>)> {
        let img = image(pixels, self.0.height(), self.0.width())?;
        let (k, seq) = perceptron::classify_raw(&self.0, &img).map_err(err)?;
        Ok((k, seq.values))
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes()
    }

    #[getter]
    fn class_names(&self) -> Vec<String> {
        self.0.class_names().to_vec()
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.0.height(), self.0.width())
    }

    fn __repr__(&self) -> String {
        format!("Ensemble(classes={}, pixels={})", self.0.classes(), self.0.pixels())
    }
}

/// Detector noise; `kind` is one of none, additive-gaussian,
/// multiplicative-gaussian, poisson.
#[pyclass(name = "Noise", module = "mlspi_py", from_py_object)]
#[derive(Clone, Copy)]
struct PyNoise(mlspi::NoiseModel);

#[pymethods]
impl PyNoise {
    #[new]
    #[pyo3(signature = (kind="none", sigma=5e-4, photon_scale=1000.0, seed=0))]
    fn new(kind: &str, sigma: f64, photon_scale: f64, seed: u64) -> PyResult<Self> {
        let kind = match kind {
            "none" => NoiseKind::None,
            "additive-gaussian" => NoiseKind::AdditiveGaussian { sigma },
            "multiplicative-gaussian" => NoiseKind::MultiplicativeGaussian { sigma },
            "poisson" => NoiseKind::Poisson { photon_scale },
            other => return Err(PyValueError::new_err(format!("unknown noise kind `{other}`"))),
        };
        let model = mlspi::NoiseModel { kind, seed };
        model.validate().map_err(err)?;
        Ok(PyNoise(model))
    }

    fn __repr__(&self) -> String {
        format!("Noise({})", self.0)
    }
}

/// Non-negative projector patterns realized from an ensemble.
#[pyclass(name = "Patterns", module = "mlspi_py", skip_from_py_object)]
#[derive(Clone)]
struct PyPatterns(mlspi::RealizedPatternSet);

#[pymethods]
impl PyPatterns {
    #[staticmethod]
    fn load(directory: PathBuf) -> PyResult<Self> {
        optics::import_patterns(directory).map(PyPatterns).map_err(err)
    }

    /// Writes one PGM per class plus metadata; returns the file paths.
    fn export(&self, directory: PathBuf) -> PyResult<Vec<PathBuf>> {
        optics::export_patterns(&self.0, directory).map_err(err)
    }

    fn pattern(&self, class_index: usize) -> PyResult<Vec<f64>> {
        self.0
            .patterns()
            .get(class_index)
            .cloned()
            .ok_or_else(|| PyValueError::new_err(format!("class {class_index} out of range")))
    }

    /// Returns `(class, readings)`; pass `index` to pick the noise sub-stream.
    #[pyo3(signature = (pixels, noise=None, index=0))]
    fn classify(&self, pixels: Vec<f32>, noise: Option<PyNoise>, index: u64) -> PyResult<(usize, Vec<f64>)> {
        let img = image(pixels, self.0.height(), self.0.width())?;
        let noise = noise.map_or(mlspi::NoiseModel::NONE, |n| n.0.substream(index));
        let (k, seq) = optics::classify_optical(&self.0, &img, &noise).map_err(err)?;
        Ok((k, seq.values))
    }

    #[getter]
    fn offset(&self) -> f64 {
        self.0.offset()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale()
    }

    #[getter]
    fn quant_levels(&self) -> Option<u32> {
        self.0.quant_levels()
    }

    /// `(p_low, p_high, low, high)` when truncation was applied.
    #[getter]
    fn truncation(&self) -> Option<(f64, f64, f64, f64)> {
        self.0.truncation().map(|t| (t.p_low, t.p_high, t.low, t.high))
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes()
    }

    fn __repr__(&self) -> String {
        format!(
            "Patterns(classes={}, offset={}, scale={})",
            self.0.classes(),
            self.0.offset(),
            self.0.scale()
        )
    }
}

/// Detector reading `sum(w * x)`.
#[pyfunction]
fn measure(weights: Vec<f64>, pixels: Vec<f32>) -> PyResult<f64> {
    let n = pixels.len();
    let w = WeightVector::new(weights).map_err(err)?;
    perceptron::measure(&w, &image(pixels, 1, n)?).map_err(err)
}

/// One delta-rule step toward `target` (1 or -1).
#[pyfunction]
fn delta_update(weights: Vec<f64>, pixels: Vec<f32>, target: i32, rate: f64) -> PyResult<Vec<f64>> {
    let n = pixels.len();
    let w = WeightVector::new(weights).map_err(err)?;
    perceptron::delta_update(&w, &image(pixels, 1, n)?, self::target(target)?, rate)
        .map(WeightVector::into_inner)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (dataset, config=None))]
fn train(py: Python<'_>, dataset: &PyDataset, config: Option<PyTrainConfig>) -> PyResult<PyEnsemble> {
    let config = config.unwrap_or_else(|| PyTrainConfig::new(1e-4, 50, 0.01, 42, true, false)).to_core();
    let data = &dataset.0;
    py.detach(|| perceptron::train_ensemble(data, &config))
        .map(PyEnsemble)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (ensemble, truncation=None, quant_levels=None))]
fn realize(ensemble: &PyEnsemble, truncation: Option<(f64, f64)>, quant_levels: Option<u32>) -> PyResult<PyPatterns> {
    optics::realize(&ensemble.0, truncation, quant_levels)
        .map(PyPatterns)
        .map_err(err)
}

/// Scores an `Ensemble` (raw) or `Patterns` (optical) and returns
/// `(accuracy, confusion rows)`.
#[pyfunction]
#[pyo3(signature = (model, dataset, noise=None))]
fn evaluate(
    py: Python<'_>,
    model: &Bound<'_, PyAny>,
    dataset: &PyDataset,
    noise: Option<PyNoise>,
) -> PyResult<(f64, Vec<Vec<u64>>)> {
    let data = &dataset.0;
    let run = |m: Model<'_>| {
        py.detach(|| evaluation::confusion(&m, data))
            .map(|c| (c.accuracy(), c.rows()))
            .map_err(err)
    };
    if let Ok(e) = model.cast::<PyEnsemble>() {
        run(Model::Raw(&e.borrow().0))
    } else if let Ok(p) = model.cast::<PyPatterns>() {
        let p = p.borrow();
        run(Model::Optical {
            patterns: &p.0,
            noise: noise.map_or(mlspi::NoiseModel::NONE, |n| n.0),
        })
    } else {
        Err(PyValueError::new_err("model must be an Ensemble or Patterns"))
    }
}

#[pymodule]
fn mlspi_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyTrainConfig>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_class::<PyNoise>()?;
    m.add_class::<PyPatterns>()?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(delta_update, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(realize, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
