//! IDX files as distributed for MNIST and Fashion-MNIST.
//!
//! Both files are big-endian. Images: magic `0x00000803`, count, rows, cols,
//! then `count * rows * cols` unsigned bytes row-major. Labels: magic
//! `0x00000801`, count, then `count` unsigned bytes.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, Image, LabeledSample};
use crate::error::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

struct Reader<'a> {
    path: &'a Path,
    inner: io::BufReader<File>,
}

impl<'a> Reader<'a> {
    fn open(path: &'a Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Reader {
            path,
            inner: io::BufReader::new(file),
        })
    }

    fn u32(&mut self) -> Result<u32> {
        let mut buf = [0u8; 4];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::io(self.path, e))?;
        Ok(u32::from_be_bytes(buf))
    }

    fn bytes(&mut self, len: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::io(self.path, e))?;
        Ok(buf)
    }

    fn magic(&mut self, expected: u32) -> Result<()> {
        let magic = self.u32()?;
        if magic != expected {
            return Err(Error::Format(format!(
                "{}: magic number {magic:#010x}, expected {expected:#010x}",
                self.path.display()
            )));
        }
        Ok(())
    }
}

/// Raw image bytes: `(rows, cols, one byte vector per image)`.
pub fn read_idx_images(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(IMAGES_MAGIC)?;
    let count = r.u32()? as usize;
    let rows = r.u32()? as usize;
    let cols = r.u32()? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format(format!(
            "{}: zero-sized images ({rows}x{cols})",
            path.as_ref().display()
        )));
    }
    let flat = r.bytes(count * rows * cols)?;
    let images = flat.chunks_exact(rows * cols).map(<[u8]>::to_vec).collect();
    Ok((rows, cols, images))
}

pub fn read_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let mut r = Reader::open(path.as_ref())?;
    r.magic(LABELS_MAGIC)?;
    let count = r.u32()? as usize;
    r.bytes(count)
}

/// Loads an image/label IDX pair, mapping each byte to `byte / 255`.
///
/// The class count is `max(label) + 1`, with a floor of 10 so that small
/// subsets of ten-class data keep their full label space.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let images_path = images_path.as_ref();
    let (rows, cols, images) = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path.as_ref())?;
    if images.len() != labels.len() {
        return Err(Error::Consistency(format!(
            "{} holds {} images but {} holds {} labels",
            images_path.display(),
            images.len(),
            labels_path.as_ref().display(),
            labels.len()
        )));
    }
    let classes = labels
        .iter()
        .map(|&l| usize::from(l) + 1)
        .max()
        .unwrap_or(0)
        .max(10);
    let samples = images
        .iter()
        .zip(&labels)
        .map(|(bytes, &label)| {
            Ok(LabeledSample {
                image: Image::from_bytes(rows, cols, bytes)?,
                label: usize::from(label),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let name = images_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::with_numbered_classes(name, classes, samples)
}

pub fn write_idx_images(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    images: &[Vec<u8>],
) -> Result<()> {
    let path = path.as_ref();
    if let Some(bad) = images.iter().find(|im| im.len() != rows * cols) {
        return Err(Error::Dimension {
            expected: rows * cols,
            actual: bad.len(),
        });
    }
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&IMAGES_MAGIC.to_be_bytes())?;
        for v in [images.len(), rows, cols] {
            w.write_all(&(v as u32).to_be_bytes())?;
        }
        for im in images {
            w.write_all(im)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let write = || -> io::Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(&LABELS_MAGIC.to_be_bytes())?;
        w.write_all(&(labels.len() as u32).to_be_bytes())?;
        w.write_all(labels)?;
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_image_pair() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        write_idx_images(&ip, 2, 2, &[vec![0, 255, 128, 0]]).unwrap();
        write_idx_labels(&lp, &[3]).unwrap();
        let d = load_idx(&ip, &lp).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.shape(), Some((2, 2)));
        assert_eq!(d.samples()[0].label, 3);
        assert_eq!(d.samples()[0].image.pixels(), &[0.0, 1.0, 128.0 / 255.0, 0.0]);
    }

    #[test]
    fn count_mismatch_is_consistency_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        write_idx_images(&ip, 1, 1, &[vec![1], vec![2], vec![3]]).unwrap();
        write_idx_labels(&lp, &[0, 1]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Consistency(_))));
    }

    #[test]
    fn bad_magic_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        write_idx_images(&ip, 1, 1, &[vec![1]]).unwrap();
        write_idx_labels(&lp, &[0]).unwrap();
        // labels file passed as images
        assert!(matches!(load_idx(&lp, &ip), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let ip = dir.path().join("img");
        let lp = dir.path().join("lbl");
        write_idx_images(&ip, 2, 2, &[vec![1, 2, 3, 4], vec![5, 6, 7, 8]]).unwrap();
        write_idx_labels(&lp, &[0, 1]).unwrap();
        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 3]).unwrap();
        match load_idx(&ip, &lp) {
            Err(Error::Io { source, .. }) => {
                assert_eq!(source.kind(), io::ErrorKind::UnexpectedEof)
            }
            other => panic!("expected I/O error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_idx("/nonexistent/images", "/nonexistent/labels").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/images"));
    }
}
