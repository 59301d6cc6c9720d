//! Run configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use mlspi::rng::derive_seed;
use mlspi::{AugmentParams, NoiseKind, NoiseModel, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Sub-stream ids used to derive per-purpose seeds from the global seed.
pub const TRAIN_SUBSET_STREAM: u64 = 1;
pub const TEST_SUBSET_STREAM: u64 = 2;
pub const NOISE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub train: TrainSection,
    pub realize: RealizeSection,
    pub noise: NoiseSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            train: TrainSection::default(),
            realize: RealizeSection::default(),
            noise: NoiseSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DataKind {
    Idx,
    ImageDir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub kind: DataKind,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub train_dir: Option<PathBuf>,
    pub test_dir: Option<PathBuf>,
    /// Resize target for image directories.
    pub height: usize,
    pub width: usize,
    /// Training images drawn from the training file; all when unset.
    pub train_count: Option<usize>,
    /// Size of the small random test subset reported next to the full set.
    pub test_count: Option<usize>,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            kind: DataKind::Idx,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            train_dir: None,
            test_dir: None,
            height: 28,
            width: 28,
            train_count: None,
            test_count: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub init_range: f64,
    pub shuffle: bool,
    pub augment: AugmentSection,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSection {
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            init_range: d.init_range,
            shuffle: d.shuffle,
            augment: AugmentSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AugmentSection {
    pub enabled: bool,
    pub max_shift: u32,
    pub max_rotation: f64,
    pub scale_low: f64,
    pub scale_high: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let d = AugmentParams::default();
        AugmentSection {
            enabled: d.enabled,
            max_shift: d.max_shift,
            max_rotation: d.max_rotation,
            scale_low: d.scale_range.0,
            scale_high: d.scale_range.1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RealizeSection {
    /// Percentile pair `[low, high]` for clamping pooled weights.
    pub truncation: Option<[f64; 2]>,
    /// Levels for exported patterns; 256 when unset. Use 0 to disable.
    pub quant_levels: Option<u32>,
    /// Levels applied when realizing in memory for optical evaluation.
    pub simulate_quant_levels: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKindName {
    None,
    AdditiveGaussian,
    MultiplicativeGaussian,
    Poisson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub kind: NoiseKindName,
    pub sigma: f64,
    pub photon_scale: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            kind: NoiseKindName::None,
            sigma: 5e-4,
            photon_scale: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub steps: usize,
    /// Accuracy to locate in the sweep (reported as the closest sigma).
    pub target: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            sigma_min: 0.0,
            sigma_max: 2e-3,
            steps: 41,
            target: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            init_range: t.init_range,
            seed: self.seed,
            shuffle: t.shuffle,
            augment: AugmentParams {
                enabled: t.augment.enabled,
                max_shift: t.augment.max_shift,
                max_rotation: t.augment.max_rotation,
                scale_range: (t.augment.scale_low, t.augment.scale_high),
            },
        }
    }

    pub fn noise_model(&self) -> NoiseModel {
        self.noise_with_sigma(self.noise.sigma)
    }

    pub fn noise_with_sigma(&self, sigma: f64) -> NoiseModel {
        let kind = match self.noise.kind {
            NoiseKindName::None => NoiseKind::None,
            NoiseKindName::AdditiveGaussian => NoiseKind::AdditiveGaussian { sigma },
            NoiseKindName::MultiplicativeGaussian => NoiseKind::MultiplicativeGaussian { sigma },
            NoiseKindName::Poisson => NoiseKind::Poisson {
                photon_scale: self.noise.photon_scale,
            },
        };
        NoiseModel {
            kind,
            seed: derive_seed(self.seed, NOISE_STREAM),
        }
    }

    pub fn train_subset_seed(&self) -> u64 {
        derive_seed(self.seed, TRAIN_SUBSET_STREAM)
    }

    pub fn test_subset_seed(&self) -> u64 {
        derive_seed(self.seed, TEST_SUBSET_STREAM)
    }

    pub fn export_quant_levels(&self) -> Option<u32> {
        match self.realize.quant_levels {
            None => Some(256),
            Some(0) => None,
            Some(l) => Some(l),
        }
    }

    pub fn truncation(&self) -> Option<(f64, f64)> {
        self.realize.truncation.map(|[lo, hi]| (lo, hi))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train_config()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        self.noise_model()
            .validate()
            .map_err(|e| CliError::Usage(e.to_string()))?;
        if let Some([lo, hi]) = self.realize.truncation {
            if !(0.0 <= lo && lo < hi && hi <= 100.0) {
                return Err(CliError::Usage(format!(
                    "truncation percentiles must satisfy 0 <= low < high <= 100, got [{lo}, {hi}]"
                )));
            }
        }
        if matches!(self.realize.quant_levels, Some(1)) {
            return Err(CliError::Usage("quant_levels must be 0 (off) or at least 2".into()));
        }
        if self.data.height == 0 || self.data.width == 0 {
            return Err(CliError::Usage("image size must be non-empty".into()));
        }
        if matches!(self.data.train_count, Some(0)) || matches!(self.data.test_count, Some(0)) {
            return Err(CliError::Usage("subset sizes must be positive".into()));
        }
        if self.sweep.steps == 0 || !(self.sweep.sigma_max >= self.sweep.sigma_min) {
            return Err(CliError::Usage("sweep needs steps >= 1 and sigma_max >= sigma_min".into()));
        }
        Ok(())
    }

    /// Flattened `dotted.key = value` view for report echoes.
    pub fn echo(&self) -> mlspi::kv::KeyValues {
        let mut kv = mlspi::kv::KeyValues::new();
        let value = toml::Value::try_from(self).expect("config serializes");
        flatten("", &value, &mut kv);
        kv
    }
}

fn flatten(prefix: &str, value: &toml::Value, kv: &mut mlspi::kv::KeyValues) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, kv);
            }
        }
        other => kv.push(prefix, other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_fills_defaults() {
        let c: RunConfig = toml::from_str(
            r#"
            seed = 7
            [train]
            epochs = 3
            [train.augment]
            enabled = true
            [realize]
            truncation = [1.0, 99.0]
            "#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.train.epochs, 3);
        assert!(c.train.augment.enabled);
        assert_eq!(c.train.augment.max_shift, 2);
        assert_eq!(c.train_config().learning_rate, 1e-4);
        assert_eq!(c.truncation(), Some((1.0, 99.0)));
        assert_eq!(c.export_quant_levels(), Some(256));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
    }

    #[test]
    fn zero_epochs_invalid() {
        let mut c = RunConfig::default();
        c.train.epochs = 0;
        assert!(matches!(c.validate(), Err(CliError::Usage(_))));
    }

    #[test]
    fn echo_is_flat() {
        let kv = RunConfig::default().echo();
        assert_eq!(kv.get("train.epochs"), Some("50"));
        assert_eq!(kv.get("noise.kind"), Some("\"none\""));
    }
}
