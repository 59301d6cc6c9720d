//! Projector-ready illumination patterns and the single-pixel detector.
//!
//! Trained weights are signed and unbounded, a projector emits intensities in
//! `[0, 1]`. [`realize`] maps every weight of every class through one shared
//! affine transform `v = (w + c) / a` with `c = −min` and `a = max − min`
//! taken over the pooled weights. For an object `x` the detector then reads
//! `y'ₖ = (yₖ + c·Σxₙ) / a`: the same increasing map for every class, so the
//! brightest reading still names the class the raw weights would pick.
//! Percentile truncation and quantization are optional and break that
//! guarantee, which is why they are off unless requested.

use std::fmt;
use std::path::{Path, PathBuf};

use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::dataset::Image;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::perceptron::{dot, ClassifierEnsemble, MeasurementSequence};
use crate::pgm::{read_pgm, write_pgm, GrayRaster};
use crate::rng::{derive_seed, rng_from_seed};

pub const PATTERN_FORMAT: &str = "mlspi-patterns/1";
pub const PATTERN_META_FILE: &str = "patterns.meta";

/// Percentile clamp applied to the pooled weights before normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub p_low: f64,
    pub p_high: f64,
    /// Weight value at `p_low`.
    pub low: f64,
    /// Weight value at `p_high`.
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealizedPatternSet {
    patterns: Vec<Vec<f64>>,
    full_scale: Vec<f64>,
    offset: f64,
    scale: f64,
    truncation: Option<Truncation>,
    quant_levels: Option<u32>,
    class_names: Vec<String>,
    height: usize,
    width: usize,
}

impl RealizedPatternSet {
    pub fn patterns(&self) -> &[Vec<f64>] {
        &self.patterns
    }

    pub fn classes(&self) -> usize {
        self.patterns.len()
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

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// The shared shift `c` added before scaling.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The shared divisor `a`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn truncation(&self) -> Option<Truncation> {
        self.truncation
    }

    pub fn quant_levels(&self) -> Option<u32> {
        self.quant_levels
    }

    /// Reading for an all-ones object under pattern `k`.
    pub fn full_scale(&self, k: usize) -> f64 {
        self.full_scale[k]
    }
}

/// Linear interpolation between closest ranks over sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let t = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * t
}

fn quantize(v: f64, levels: u32) -> f64 {
    let steps = f64::from(levels - 1);
    (v * steps).round() / steps
}

/// Turns signed weights into non-negative patterns in `[0, 1]`.
///
/// Steps, all over the pooled entries of every class: optional percentile
/// clamp, shared offset/scale normalization, optional rounding onto
/// `quant_levels` evenly spaced levels.
pub fn realize(
    ensemble: &ClassifierEnsemble,
    truncation: Option<(f64, f64)>,
    quant_levels: Option<u32>,
) -> Result<RealizedPatternSet> {
    if let Some((lo, hi)) = truncation {
        if !(0.0 <= lo && lo < hi && hi <= 100.0) {
            return Err(Error::arg(format!(
                "truncation percentiles must satisfy 0 <= low < high <= 100, got ({lo}, {hi})"
            )));
        }
    }
    if let Some(levels) = quant_levels {
        if levels < 2 {
            return Err(Error::arg(format!("quantization needs at least 2 levels, got {levels}")));
        }
    }

    let mut weights: Vec<Vec<f64>> = ensemble
        .classifiers()
        .iter()
        .map(|w| w.as_slice().to_vec())
        .collect();

    let truncation = truncation.map(|(p_low, p_high)| {
        let mut pooled: Vec<f64> = weights.iter().flatten().copied().collect();
        pooled.sort_by(f64::total_cmp);
        let t = Truncation {
            p_low,
            p_high,
            low: percentile(&pooled, p_low),
            high: percentile(&pooled, p_high),
        };
        for w in weights.iter_mut().flatten() {
            *w = w.clamp(t.low, t.high);
        }
        t
    });

    let (min, max) = weights
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &w| {
            (lo.min(w), hi.max(w))
        });
    if !(max > min) {
        return Err(Error::Degenerate(format!(
            "all pattern entries equal {min}; nothing to normalize"
        )));
    }
    let offset = -min;
    let scale = max - min;

    let patterns: Vec<Vec<f64>> = weights
        .into_iter()
        .map(|w| {
            w.into_iter()
                .map(|v| {
                    let v = ((v + offset) / scale).clamp(0.0, 1.0);
                    match quant_levels {
                        Some(levels) => quantize(v, levels),
                        None => v,
                    }
                })
                .collect()
        })
        .collect();

    Ok(RealizedPatternSet {
        full_scale: patterns.iter().map(|p| p.iter().sum()).collect(),
        patterns,
        offset,
        scale,
        truncation,
        quant_levels,
        class_names: ensemble.class_names().to_vec(),
        height: ensemble.height(),
        width: ensemble.width(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseKind {
    None,
    /// Adds `sigma · y_max · g`, `g` standard normal.
    AdditiveGaussian { sigma: f64 },
    /// Multiplies by `1 + sigma · g`.
    MultiplicativeGaussian { sigma: f64 },
    /// Photon counting with `photon_scale` expected counts at full scale.
    Poisson { photon_scale: f64 },
}

/// Detector noise. `y_max` is the full-scale reading of the pattern being
/// measured.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub seed: u64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        kind: NoiseKind::None,
        seed: 0,
    };

    pub fn additive(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            kind: NoiseKind::AdditiveGaussian { sigma },
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::None => Ok(()),
            NoiseKind::AdditiveGaussian { sigma } | NoiseKind::MultiplicativeGaussian { sigma } => {
                if sigma.is_finite() && sigma >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::arg(format!("noise sigma must be non-negative, got {sigma}")))
                }
            }
            NoiseKind::Poisson { photon_scale } => {
                if photon_scale.is_finite() && photon_scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::arg(format!(
                        "photon scale must be positive, got {photon_scale}"
                    )))
                }
            }
        }
    }

    /// Same channel on the independent sub-stream `index`.
    pub fn substream(&self, index: u64) -> NoiseModel {
        NoiseModel {
            kind: self.kind,
            seed: derive_seed(self.seed, index),
        }
    }

    fn apply(&self, y: f64, full_scale: f64, k: usize) -> f64 {
        let rng = || rng_from_seed(derive_seed(self.seed, k as u64));
        let noisy = match self.kind {
            NoiseKind::None => y,
            NoiseKind::AdditiveGaussian { sigma } => {
                let g: f64 = rng().sample(StandardNormal);
                y + sigma * full_scale * g
            }
            NoiseKind::MultiplicativeGaussian { sigma } => {
                let g: f64 = rng().sample(StandardNormal);
                y * (1.0 + sigma * g)
            }
            NoiseKind::Poisson { photon_scale } => {
                let mean = if full_scale > 0.0 {
                    photon_scale * y / full_scale
                } else {
                    0.0
                };
                if mean > 0.0 {
                    let count: f64 = Poisson::new(mean)
                        .expect("positive finite mean")
                        .sample(&mut rng());
                    count / photon_scale * full_scale
                } else {
                    0.0
                }
            }
        };
        noisy.max(0.0)
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            NoiseKind::None => write!(f, "none"),
            NoiseKind::AdditiveGaussian { sigma } => {
                write!(f, "additive-gaussian sigma={sigma} seed={}", self.seed)
            }
            NoiseKind::MultiplicativeGaussian { sigma } => {
                write!(f, "multiplicative-gaussian sigma={sigma} seed={}", self.seed)
            }
            NoiseKind::Poisson { photon_scale } => {
                write!(f, "poisson photon_scale={photon_scale} seed={}", self.seed)
            }
        }
    }
}

/// One detector reading per pattern. Pattern `k` draws its noise from
/// sub-stream `k` of `noise.seed`.
pub fn simulate_measurements(
    patterns: &RealizedPatternSet,
    image: &Image,
    noise: &NoiseModel,
) -> Result<MeasurementSequence> {
    Error::check_len(patterns.pixels(), image.len())?;
    let x = image.pixels();
    let values = patterns
        .patterns
        .iter()
        .zip(&patterns.full_scale)
        .enumerate()
        .map(|(k, (p, &full))| noise.apply(dot(p, x), full, k))
        .collect();
    Ok(MeasurementSequence { values })
}

pub fn classify_optical(
    patterns: &RealizedPatternSet,
    image: &Image,
    noise: &NoiseModel,
) -> Result<(usize, MeasurementSequence)> {
    let seq = simulate_measurements(patterns, image, noise)?;
    Ok((seq.argmax(), seq))
}

fn pattern_file_name(k: usize, classes: usize) -> String {
    let digits = classes.saturating_sub(1).to_string().len().max(2);
    format!("pattern_{k:0digits$}.pgm")
}

/// Writes one 8-bit PGM per pattern (`round(255 · entry)`) and a
/// `patterns.meta` sidecar. Returns the paths written.
pub fn export_patterns(patterns: &RealizedPatternSet, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::with_capacity(patterns.classes() + 1);

    let mut meta = KeyValues::new();
    meta.push("format", PATTERN_FORMAT);
    meta.push("classes", patterns.classes());
    meta.push("height", patterns.height);
    meta.push("width", patterns.width);
    meta.push_f64("offset", patterns.offset);
    meta.push_f64("scale", patterns.scale);
    match patterns.truncation {
        Some(t) => {
            meta.push_f64("truncation.p_low", t.p_low);
            meta.push_f64("truncation.p_high", t.p_high);
            meta.push_f64("truncation.low", t.low);
            meta.push_f64("truncation.high", t.high);
        }
        None => meta.push("truncation", "none"),
    }
    match patterns.quant_levels {
        Some(l) => meta.push("quant_levels", l),
        None => meta.push("quant_levels", "none"),
    }
    for (k, p) in patterns.patterns.iter().enumerate() {
        let file = pattern_file_name(k, patterns.classes());
        meta.push(format!("class.{k}"), &patterns.class_names[k]);
        meta.push(format!("file.{k}"), &file);
        let raster = GrayRaster {
            width: patterns.width,
            height: patterns.height,
            bytes: p.iter().map(|v| (v * 255.0).round() as u8).collect(),
        };
        let path = dir.join(&file);
        write_pgm(&path, &raster)?;
        written.push(path);
    }
    let meta_path = dir.join(PATTERN_META_FILE);
    meta.write(&meta_path, "mlspi realized illumination patterns")?;
    written.push(meta_path);
    Ok(written)
}

/// Reads a directory written by [`export_patterns`]. Entries are
/// `byte / 255`, snapped back onto the level grid when `quant_levels` was
/// recorded, which makes any quantized set round-trip exactly.
pub fn import_patterns(dir: impl AsRef<Path>) -> Result<RealizedPatternSet> {
    let dir = dir.as_ref();
    let meta = KeyValues::read(&dir.join(PATTERN_META_FILE))?;
    let format = meta.require("format")?;
    if format != PATTERN_FORMAT {
        return Err(Error::Format(format!("unsupported pattern format `{format}`")));
    }
    let classes: usize = meta.parse("classes")?;
    let height: usize = meta.parse("height")?;
    let width: usize = meta.parse("width")?;
    let quant_levels: Option<u32> = meta.parse_opt("quant_levels")?;
    let truncation = match meta.get("truncation") {
        Some("none") => None,
        _ => Some(Truncation {
            p_low: meta.parse("truncation.p_low")?,
            p_high: meta.parse("truncation.p_high")?,
            low: meta.parse("truncation.low")?,
            high: meta.parse("truncation.high")?,
        }),
    };
    let mut patterns = Vec::with_capacity(classes);
    let mut class_names = Vec::with_capacity(classes);
    for k in 0..classes {
        class_names.push(meta.require(&format!("class.{k}"))?.to_string());
        let path = dir.join(meta.require(&format!("file.{k}"))?);
        let raster = read_pgm(&path)?;
        if (raster.height, raster.width) != (height, width) {
            return Err(Error::Consistency(format!(
                "{} is {}x{}, metadata says {height}x{width}",
                path.display(),
                raster.height,
                raster.width
            )));
        }
        patterns.push(
            raster
                .bytes
                .iter()
                .map(|&b| {
                    let v = f64::from(b) / 255.0;
                    match quant_levels {
                        Some(l) => quantize(v, l),
                        None => v,
                    }
                })
                .collect::<Vec<f64>>(),
        );
    }
    Ok(RealizedPatternSet {
        full_scale: patterns.iter().map(|p| p.iter().sum()).collect(),
        patterns,
        offset: meta.parse("offset")?,
        scale: meta.parse("scale")?,
        truncation,
        quant_levels,
        class_names,
        height,
        width,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptron::{TrainConfig, WeightVector};
    use proptest::prelude::*;

    fn ensemble(ws: &[&[f64]], h: usize, w: usize) -> ClassifierEnsemble {
        ClassifierEnsemble::new(
            ws.iter().map(|w| WeightVector::new(w.to_vec()).unwrap()).collect(),
            (0..ws.len()).map(|k| k.to_string()).collect(),
            h,
            w,
            TrainConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn shared_affine_example() {
        let e = ensemble(&[&[-1.0, 1.0], &[0.0, 2.0]], 1, 2);
        let r = realize(&e, None, None).unwrap();
        assert_eq!(r.offset(), 1.0);
        assert_eq!(r.scale(), 3.0);
        let expect = [[0.0, 2.0 / 3.0], [1.0 / 3.0, 1.0]];
        for (p, q) in r.patterns().iter().zip(expect) {
            for (a, b) in p.iter().zip(q) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn constant_ensemble_is_degenerate() {
        let e = ensemble(&[&[0.5, 0.5], &[0.5, 0.5]], 1, 2);
        assert!(matches!(realize(&e, None, None), Err(Error::Degenerate(_))));
    }

    #[test]
    fn argument_checks() {
        let e = ensemble(&[&[-1.0, 1.0], &[0.0, 2.0]], 1, 2);
        assert!(realize(&e, Some((50.0, 50.0)), None).is_err());
        assert!(realize(&e, Some((-1.0, 50.0)), None).is_err());
        assert!(realize(&e, Some((1.0, 101.0)), None).is_err());
        assert!(realize(&e, None, Some(1)).is_err());
    }

    #[test]
    fn truncation_records_bounds() {
        let w: Vec<f64> = (0..=100).map(f64::from).collect();
        let e = ClassifierEnsemble::new(
            vec![WeightVector::new(w.clone()).unwrap(), WeightVector::new(w).unwrap()],
            vec!["a".into(), "b".into()],
            1,
            101,
            TrainConfig::default(),
        )
        .unwrap();
        let r = realize(&e, Some((10.0, 90.0)), None).unwrap();
        let t = r.truncation().unwrap();
        assert!((t.low - 10.0).abs() < 1e-12 && (t.high - 90.0).abs() < 1e-12);
        assert_eq!(r.offset(), -t.low);
        assert_eq!(r.patterns()[0][0], 0.0);
        assert_eq!(r.patterns()[0][100], 1.0);
    }

    #[test]
    fn two_levels_are_binary() {
        let e = ensemble(&[&[-1.0, 0.2, 0.9], &[0.4, -0.3, 2.0]], 1, 3);
        let r = realize(&e, None, Some(2)).unwrap();
        assert!(r.patterns().iter().flatten().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn noiseless_measurement_is_inner_product() {
        let e = ensemble(&[&[-1.0, 1.0, 0.3], &[0.0, 2.0, -0.5]], 1, 3);
        let r = realize(&e, None, None).unwrap();
        let img = Image::new(1, 3, vec![0.2, 0.9, 0.5]).unwrap();
        let seq = simulate_measurements(&r, &img, &NoiseModel::NONE).unwrap();
        for (k, p) in r.patterns().iter().enumerate() {
            let direct: f64 = p.iter().zip(img.pixels()).map(|(a, b)| a * f64::from(*b)).sum();
            assert!((seq.values[k] - direct).abs() < 1e-12);
        }
        let wrong = Image::zeros(1, 2);
        assert!(simulate_measurements(&r, &wrong, &NoiseModel::NONE).is_err());
    }

    #[test]
    fn zero_image_reads_zero() {
        let e = ensemble(&[&[-1.0, 1.0], &[0.0, 2.0]], 1, 2);
        let r = realize(&e, None, None).unwrap();
        let zero = Image::zeros(1, 2);
        for noise in [
            NoiseModel::NONE,
            NoiseModel {
                kind: NoiseKind::MultiplicativeGaussian { sigma: 0.3 },
                seed: 5,
            },
            NoiseModel {
                kind: NoiseKind::Poisson { photon_scale: 100.0 },
                seed: 5,
            },
        ] {
            let seq = simulate_measurements(&r, &zero, &noise).unwrap();
            assert_eq!(seq.values, vec![0.0, 0.0], "{noise}");
        }
        let (k, _) = classify_optical(&r, &zero, &NoiseModel::NONE).unwrap();
        assert_eq!(k, 0);
    }

    #[test]
    fn noise_is_reproducible_and_non_negative() {
        let e = ensemble(&[&[-1.0, 1.0, 0.3], &[0.0, 2.0, -0.5]], 1, 3);
        let r = realize(&e, None, None).unwrap();
        let img = Image::new(1, 3, vec![0.01, 0.02, 0.0]).unwrap();
        let noise = NoiseModel::additive(0.5, 77);
        let a = simulate_measurements(&r, &img, &noise).unwrap();
        let b = simulate_measurements(&r, &img, &noise).unwrap();
        assert_eq!(a, b);
        for s in 0..200 {
            let seq = simulate_measurements(&r, &img, &noise.substream(s)).unwrap();
            assert!(seq.values.iter().all(|&v| v >= 0.0));
        }
        assert!(NoiseModel::additive(-0.1, 0).validate().is_err());
        assert!(NoiseModel {
            kind: NoiseKind::Poisson { photon_scale: 0.0 },
            seed: 0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn additive_noise_spread_matches_sigma() {
        let e = ensemble(&[&[-1.0, 1.0, 0.3, 0.8], &[0.0, 2.0, -0.5, 0.1]], 2, 2);
        let r = realize(&e, None, None).unwrap();
        let img = Image::new(2, 2, vec![0.9, 0.8, 0.7, 0.9]).unwrap();
        let clean = simulate_measurements(&r, &img, &NoiseModel::NONE).unwrap().values[1];
        let noise = NoiseModel::additive(0.01, 2024);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| simulate_measurements(&r, &img, &noise.substream(i)).unwrap().values[1])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let expected = 0.01 * r.full_scale(1);
        assert!(clean > 10.0 * expected, "clamp at zero must not bias this check");
        assert!((var.sqrt() / expected - 1.0).abs() < 0.05, "sd {} vs {expected}", var.sqrt());
    }

    #[test]
    fn poisson_mean_converges() {
        let e = ensemble(&[&[-1.0, 1.0, 0.3, 0.8], &[0.0, 2.0, -0.5, 0.1]], 2, 2);
        let r = realize(&e, None, None).unwrap();
        let img = Image::new(2, 2, vec![0.2, 0.5, 0.7, 0.1]).unwrap();
        let clean = simulate_measurements(&r, &img, &NoiseModel::NONE).unwrap();
        let noise = NoiseModel {
            kind: NoiseKind::Poisson { photon_scale: 50.0 },
            seed: 9,
        };
        let m = 100_000u64;
        let mut sums = [0.0; 2];
        for i in 0..m {
            let seq = simulate_measurements(&r, &img, &noise.substream(i)).unwrap();
            sums[0] += seq.values[0];
            sums[1] += seq.values[1];
        }
        for k in 0..2 {
            let mean = sums[k] / m as f64;
            assert!(
                (mean / clean.values[k] - 1.0).abs() < 0.01,
                "k={k}: mean {mean} vs {}",
                clean.values[k]
            );
        }
    }

    #[test]
    fn export_import_quantized_is_exact() {
        let e = ensemble(&[&[-1.0, 1.0, 0.3, 0.77], &[0.0, 2.0, -0.5, 0.1]], 2, 2);
        let dir = tempfile::tempdir().unwrap();
        for levels in [256, 7, 2] {
            let r = realize(&e, Some((5.0, 95.0)), Some(levels)).unwrap();
            let files = export_patterns(&r, dir.path().join(levels.to_string())).unwrap();
            assert_eq!(files.len(), 3);
            assert!(files[0].ends_with("pattern_00.pgm"));
            let back = import_patterns(dir.path().join(levels.to_string())).unwrap();
            assert_eq!(back, r);
        }
    }

    #[test]
    fn export_endpoint_bytes() {
        let e = ensemble(&[&[-1.0, 1.0], &[0.0, 2.0]], 1, 2);
        let r = realize(&e, None, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        export_patterns(&r, dir.path()).unwrap();
        let p0 = read_pgm(dir.path().join("pattern_00.pgm")).unwrap();
        let p1 = read_pgm(dir.path().join("pattern_01.pgm")).unwrap();
        assert_eq!(p0.bytes, vec![0, 170]);
        assert_eq!(p1.bytes, vec![85, 255]);
    }

    proptest! {
        #[test]
        fn realized_entries_in_unit_range_and_on_grid(
            ws in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 6), 2..5),
            levels in prop::option::of(2u32..300),
            trunc in prop::option::of((0.0f64..40.0, 60.0f64..100.0)),
        ) {
            let refs: Vec<&[f64]> = ws.iter().map(Vec::as_slice).collect();
            let e = ensemble(&refs, 2, 3);
            let Ok(r) = realize(&e, trunc, levels) else { return Ok(()); };
            for &v in r.patterns().iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
                if let Some(l) = levels {
                    let steps = v * f64::from(l - 1);
                    prop_assert!((steps - steps.round()).abs() < 1e-9);
                }
            }
            let flat: Vec<f64> = r.patterns().iter().flatten().copied().collect();
            prop_assert!(flat.contains(&0.0));
            prop_assert!(flat.contains(&1.0));
        }
    }
}
