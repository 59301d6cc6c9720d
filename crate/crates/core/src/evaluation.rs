//! Test-set scoring: confusion matrices, accuracy, per-class precision and
//! recall, and the report files written for a run.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::dataset::{Dataset, Image};
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::optics::{classify_optical, NoiseModel, RealizedPatternSet};
use crate::perceptron::{classify_raw, ClassifierEnsemble};
use crate::pgm::{write_pgm, GrayRaster};

/// Side length, in pixels, of one cell in the heatmap raster.
pub const HEATMAP_CELL: usize = 16;

/// Rows are true labels, columns are predicted labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::Format("confusion matrix must be square".into()));
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth * self.classes + predicted] += 1;
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.classes..(truth + 1) * self.classes]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.classes).map(|k| self.row(k).to_vec()).collect()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        self.row(truth).iter().sum()
    }

    pub fn column_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|k| self.get(k, k)).sum()
    }

    /// `trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => self.trace() as f64 / n as f64,
        }
    }

    pub fn recall(&self, k: usize) -> Option<f64> {
        match self.row_sum(k) {
            0 => None,
            n => Some(self.get(k, k) as f64 / n as f64),
        }
    }

    pub fn precision(&self, k: usize) -> Option<f64> {
        match self.column_sum(k) {
            0 => None,
            n => Some(self.get(k, k) as f64 / n as f64),
        }
    }

    /// Each row divided by its sum (all-zero rows stay zero).
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        (0..self.classes)
            .map(|t| {
                let sum = self.row_sum(t);
                self.row(t)
                    .iter()
                    .map(|&c| if sum == 0 { 0.0 } else { c as f64 / sum as f64 })
                    .collect()
            })
            .collect()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Consistency(format!(
                "cannot add a {0}x{0} confusion matrix to a {1}x{1} one",
                other.classes, self.classes
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }
}

/// What to score: the signed weights directly, or realized patterns read
/// through a simulated detector.
#[derive(Debug, Clone, Copy)]
pub enum Model<'a> {
    Raw(&'a ClassifierEnsemble),
    Optical {
        patterns: &'a RealizedPatternSet,
        noise: NoiseModel,
    },
}

impl Model<'_> {
    pub fn classes(&self) -> usize {
        match self {
            Model::Raw(e) => e.classes(),
            Model::Optical { patterns, .. } => patterns.classes(),
        }
    }

    pub fn pixels(&self) -> usize {
        match self {
            Model::Raw(e) => e.pixels(),
            Model::Optical { patterns, .. } => patterns.pixels(),
        }
    }

    pub fn mode_name(&self) -> &'static str {
        match self {
            Model::Raw(_) => "raw",
            Model::Optical { .. } => "optical",
        }
    }

    /// Classifies the `index`-th test image. Optical noise for that image
    /// comes from sub-stream `index` of the noise seed.
    pub fn predict(&self, image: &Image, index: u64) -> Result<usize> {
        match self {
            Model::Raw(e) => classify_raw(e, image).map(|(k, _)| k),
            Model::Optical { patterns, noise } => {
                classify_optical(patterns, image, &noise.substream(index)).map(|(k, _)| k)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub precision: Vec<Option<f64>>,
    pub recall: Vec<Option<f64>>,
    pub mode: String,
    pub noise: String,
    pub dataset: String,
    pub samples: usize,
    pub class_names: Vec<String>,
    /// Effective configuration echoed into the summary.
    pub config: KeyValues,
}

impl EvalReport {
    pub fn from_confusion(
        confusion: ConfusionMatrix,
        model: &Model<'_>,
        test: &Dataset,
    ) -> EvalReport {
        let k = confusion.classes();
        EvalReport {
            accuracy: confusion.accuracy(),
            precision: (0..k).map(|c| confusion.precision(c)).collect(),
            recall: (0..k).map(|c| confusion.recall(c)).collect(),
            samples: confusion.total() as usize,
            confusion,
            mode: model.mode_name().to_string(),
            noise: match model {
                Model::Raw(_) => "none".to_string(),
                Model::Optical { noise, .. } => noise.to_string(),
            },
            dataset: test.name().to_string(),
            class_names: test.class_names().to_vec(),
            config: KeyValues::new(),
        }
    }
}

/// Confusion matrix of `model` over `test`. Samples are scored in parallel;
/// the result does not depend on scheduling.
pub fn confusion(model: &Model<'_>, test: &Dataset) -> Result<ConfusionMatrix> {
    if test.is_empty() {
        return Err(Error::arg("test set is empty"));
    }
    Error::check_len(model.pixels(), test.samples()[0].image.len())?;
    if test.classes() != model.classes() {
        return Err(Error::Consistency(format!(
            "model has {} classes, test set has {}",
            model.classes(),
            test.classes()
        )));
    }
    let predictions = test
        .samples()
        .par_iter()
        .enumerate()
        .map(|(i, s)| model.predict(&s.image, i as u64).map(|p| (s.label, p)))
        .collect::<Result<Vec<_>>>()?;
    let mut m = ConfusionMatrix::new(model.classes());
    for (t, p) in predictions {
        m.record(t, p);
    }
    Ok(m)
}

pub fn evaluate(model: &Model<'_>, test: &Dataset) -> Result<EvalReport> {
    let m = confusion(model, test)?;
    Ok(EvalReport::from_confusion(m, model, test))
}

pub fn confusion_to_csv(m: &ConfusionMatrix, class_names: &[String]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(class_names.iter().cloned());
    w.write_record(&header).map_err(to_err)?;
    for (t, name) in class_names.iter().enumerate() {
        let mut rec = vec![name.clone()];
        rec.extend(m.row(t).iter().map(u64::to_string));
        w.write_record(&rec).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Parses a CSV written by [`confusion_to_csv`]: `(class names, matrix)`.
pub fn confusion_from_csv(text: &str) -> Result<(Vec<String>, ConfusionMatrix)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    let header = r.headers().map_err(to_err)?.clone();
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(to_err)?;
        let row = rec
            .iter()
            .skip(1)
            .map(|c| {
                c.parse::<u64>()
                    .map_err(|_| Error::Format(format!("bad count `{c}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.len() != names.len() {
        return Err(Error::Format(format!(
            "{} header classes but {} rows",
            names.len(),
            rows.len()
        )));
    }
    Ok((names, ConfusionMatrix::from_rows(rows)?))
}

pub fn heatmap(m: &ConfusionMatrix) -> GrayRaster {
    let k = m.classes();
    let side = k * HEATMAP_CELL;
    let norm = m.row_normalized();
    let mut bytes = vec![0u8; side * side];
    for (y, row) in bytes.chunks_exact_mut(side).enumerate() {
        let t = y / HEATMAP_CELL;
        for (x, px) in row.iter_mut().enumerate() {
            *px = (norm[t][x / HEATMAP_CELL] * 255.0).round() as u8;
        }
    }
    GrayRaster {
        width: side,
        height: side,
        bytes,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

pub fn summary_text(report: &EvalReport) -> String {
    let mut s = String::new();
    let m = &report.confusion;
    let _ = writeln!(s, "dataset: {}", report.dataset);
    let _ = writeln!(s, "mode: {}", report.mode);
    let _ = writeln!(s, "noise: {}", report.noise);
    let _ = writeln!(s, "samples: {}", report.samples);
    let _ = writeln!(s, "correct: {}", m.trace());
    let _ = writeln!(s, "accuracy: {:.4}", report.accuracy);
    let _ = writeln!(s);
    let _ = writeln!(s, "class\tprecision\trecall\tsupport");
    for (k, name) in report.class_names.iter().enumerate() {
        let _ = writeln!(
            s,
            "{name}\t{}\t{}\t{}",
            fmt_opt(report.precision[k]),
            fmt_opt(report.recall[k]),
            m.row_sum(k)
        );
    }
    if !report.config.entries().is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "[config]");
        s.push_str(&report.config.to_text());
    }
    s
}

/// Writes `confusion.csv`, `summary.txt` and `confusion.pgm` (row-normalized
/// heatmap) into `dir`, creating it if needed.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("confusion.csv");
    let csv = confusion_to_csv(&report.confusion, &report.class_names)?;
    std::fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;
    let summary_path = dir.join("summary.txt");
    std::fs::write(&summary_path, summary_text(report)).map_err(|e| Error::io(&summary_path, e))?;
    let heat_path = dir.join("confusion.pgm");
    write_pgm(&heat_path, &heatmap(&report.confusion))?;
    Ok(vec![csv_path, summary_path, heat_path])
}
