#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use sha2::{Digest, Sha256};

pub fn mlspi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mlspi"))
        .args(args)
        .output()
        .expect("spawn mlspi")
}

/// Runs and asserts success, returning stdout.
pub fn mlspi_ok(args: &[&str]) -> String {
    let out = mlspi(args);
    assert!(
        out.status.success(),
        "mlspi {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn sha256(path: impl AsRef<Path>) -> String {
    let bytes = std::fs::read(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()));
    format!("{:x}", Sha256::digest(bytes))
}

/// Value of `key=` in a space-separated summary line.
pub fn field<'a>(line: &'a str, key: &str) -> &'a str {
    line.split_whitespace()
        .find_map(|t| t.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .unwrap_or_else(|| panic!("no {key} in `{line}`"))
}

pub struct IdxSet {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl IdxSet {
    pub fn args(&self) -> Vec<String> {
        vec![
            "--train-images".into(),
            self.train_images.display().to_string(),
            "--train-labels".into(),
            self.train_labels.display().to_string(),
            "--test-images".into(),
            self.test_images.display().to_string(),
            "--test-labels".into(),
            self.test_labels.display().to_string(),
        ]
    }
}

/// Noisy copies of ten random 8x8 binary prototypes, written as IDX files.
pub fn synthetic_idx(dir: &Path) -> IdxSet {
    let mut rng = mlspi::rng::rng_from_seed(5);
    let protos: Vec<Vec<u8>> = (0..10)
        .map(|_| (0..64).map(|_| if rng.random_bool(0.3) { 230 } else { 10 }).collect())
        .collect();
    let mut make = |n: usize, name: &str| {
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = i % 10;
            images.push(
                protos[l]
                    .iter()
                    .map(|&p| (i32::from(p) + rng.random_range(-10..=10)).clamp(0, 255) as u8)
                    .collect::<Vec<u8>>(),
            );
            labels.push(l as u8);
        }
        let ip = dir.join(format!("{name}-images"));
        let lp = dir.join(format!("{name}-labels"));
        mlspi::dataset::write_idx_images(&ip, 8, 8, &images).unwrap();
        mlspi::dataset::write_idx_labels(&lp, &labels).unwrap();
        (ip, lp)
    };
    let (train_images, train_labels) = make(200, "train");
    let (test_images, test_labels) = make(50, "test");
    IdxSet {
        train_images,
        train_labels,
        test_images,
        test_labels,
    }
}
