//! Binary PGM (`P5`, maxval 255) for pattern export and heatmaps.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub bytes: Vec<u8>,
}

pub fn encode_pgm(raster: &GrayRaster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", raster.width, raster.height).into_bytes();
    out.extend_from_slice(&raster.bytes);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, raster: &GrayRaster) -> Result<()> {
    let path = path.as_ref();
    if raster.bytes.len() != raster.width * raster.height {
        return Err(Error::Dimension {
            expected: raster.width * raster.height,
            actual: raster.bytes.len(),
        });
    }
    std::fs::write(path, encode_pgm(raster)).map_err(|e| Error::io(path, e))
}

pub fn decode_pgm(data: &[u8]) -> Result<GrayRaster> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        // skip whitespace and comments
        loop {
            match data.get(pos) {
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(b'#') => {
                    while data.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(_) => break,
                None => return Err(Error::Format("PGM header ends early".into())),
            }
        }
        let start = pos;
        while data.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&data[start..pos]).into_owned())
    };
    let magic = token()?;
    if magic != "P5" {
        return Err(Error::Format(format!("expected P5 magic, found `{magic}`")));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse()
            .map_err(|_| Error::Format(format!("bad PGM {what} `{t}`")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let body = data.get(pos..).unwrap_or_default();
    if body.len() != width * height {
        return Err(Error::Format(format!(
            "PGM raster holds {} bytes, expected {}",
            body.len(),
            width * height
        )));
    }
    Ok(GrayRaster {
        width,
        height,
        bytes: body.to_vec(),
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayRaster> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pgm(&data).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_comment() {
        let r = GrayRaster {
            width: 3,
            height: 2,
            bytes: vec![0, 10, 255, 32, 9, 13],
        };
        let enc = encode_pgm(&r);
        assert_eq!(&enc[..11], b"P5\n3 2\n255\n");
        assert_eq!(decode_pgm(&enc).unwrap(), r);
        let mut commented = b"P5\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(&r.bytes);
        assert_eq!(decode_pgm(&commented).unwrap(), r);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(decode_pgm(b"P2\n1 1\n255\n0").is_err());
        assert!(decode_pgm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(decode_pgm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn readable_by_image_crate() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.pgm");
        let r = GrayRaster {
            width: 2,
            height: 2,
            bytes: vec![0, 64, 128, 255],
        };
        write_pgm(&p, &r).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.into_raw(), r.bytes);
    }
}
