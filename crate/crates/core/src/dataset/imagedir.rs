use std::fs;
use std::path::{Path, PathBuf};

use super::{Dataset, Image, LabeledSample};
use crate::error::{Error, Result};

/// Reads any raster the `image` crate decodes and converts it to intensities:
/// RGB channels scaled to `[0, 1]` and averaged with equal weight (alpha is
/// ignored).
pub fn load_image_file(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Decode {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let rgb = decoded.to_rgb32f();
    let (w, h) = rgb.dimensions();
    let pixels = rgb
        .pixels()
        .map(|p| {
            let mean = (f64::from(p[0]) + f64::from(p[1]) + f64::from(p[2])) / 3.0;
            mean.clamp(0.0, 1.0) as f32
        })
        .collect();
    Image::new(h as usize, w as usize, pixels)
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize_bilinear(image: &Image, height: usize, width: usize) -> Result<Image> {
    if height == 0 || width == 0 {
        return Err(Error::arg("target size must be non-empty"));
    }
    if (height, width) == (image.height(), image.width()) {
        return Ok(image.clone());
    }
    let (sh, sw) = (image.height(), image.width());
    let sy = sh as f64 / height as f64;
    let sx = sw as f64 / width as f64;
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let fy = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (sh - 1) as f64);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(sh - 1);
        let ty = fy - y0 as f64;
        for x in 0..width {
            let fx = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(sw - 1);
            let tx = fx - x0 as f64;
            let p = |r: usize, c: usize| f64::from(image.get(r, c));
            let top = p(y0, x0) * (1.0 - tx) + p(y0, x1) * tx;
            let bottom = p(y1, x0) * (1.0 - tx) + p(y1, x1) * tx;
            let v = top * (1.0 - ty) + bottom * ty;
            out.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Image::new(height, width, out)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<Vec<_>>>()?;
    entries.retain(|p| {
        !p.file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'))
    });
    entries.sort();
    Ok(entries)
}

/// Loads a class-per-subdirectory image tree.
///
/// Class indices follow the lexicographic order of the subdirectory names.
/// Every image is converted to grayscale and resized to `size` (height,
/// width) bilinearly.
pub fn load_image_dir(root: impl AsRef<Path>, size: (usize, usize)) -> Result<Dataset> {
    let root = root.as_ref();
    let class_dirs: Vec<PathBuf> = sorted_entries(root)?
        .into_iter()
        .filter(|p| p.is_dir())
        .collect();
    if class_dirs.is_empty() {
        return Err(Error::Consistency(format!(
            "{} has no class subdirectories",
            root.display()
        )));
    }
    let mut class_names = Vec::with_capacity(class_dirs.len());
    let mut samples = Vec::new();
    for (label, dir) in class_dirs.iter().enumerate() {
        class_names.push(dir.file_name().unwrap().to_string_lossy().into_owned());
        let files: Vec<PathBuf> = sorted_entries(dir)?
            .into_iter()
            .filter(|p| p.is_file())
            .collect();
        if files.is_empty() {
            return Err(Error::Consistency(format!(
                "category directory {} is empty",
                dir.display()
            )));
        }
        for file in files {
            let image = resize_bilinear(&load_image_file(&file)?, size.0, size.1)?;
            samples.push(LabeledSample { image, label });
        }
    }
    let name = root
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(name, class_names, samples)
}
