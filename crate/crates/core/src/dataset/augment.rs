use rand::Rng;

use super::Image;
use crate::error::{Error, Result};

/// Random translation, rotation and isotropic scaling of training images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub enabled: bool,
    /// Maximum shift per axis, in pixels.
    pub max_shift: u32,
    /// Maximum rotation magnitude, in degrees.
    pub max_rotation: f64,
    /// Inclusive `(low, high)` range of scale factors.
    pub scale_range: (f64, f64),
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            enabled: false,
            max_shift: 2,
            max_rotation: 10.0,
            scale_range: (0.9, 1.1),
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.scale_range;
        if !(self.max_rotation.is_finite() && self.max_rotation >= 0.0) {
            return Err(Error::arg(format!(
                "max_rotation must be a non-negative number, got {}",
                self.max_rotation
            )));
        }
        if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
            return Err(Error::arg(format!(
                "scale_range must satisfy 0 < low <= high, got [{lo}, {hi}]"
            )));
        }
        Ok(())
    }

    /// Draws one transform: shift x, shift y, angle, scale, in that order.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> AffineDraw {
        let s = self.max_shift as i32;
        let shift_x = rng.random_range(-s..=s);
        let shift_y = rng.random_range(-s..=s);
        let angle_deg = rng.random_range(-self.max_rotation..=self.max_rotation);
        let scale = rng.random_range(self.scale_range.0..=self.scale_range.1);
        AffineDraw {
            shift_x,
            shift_y,
            angle_deg,
            scale,
        }
    }
}

/// One concrete augmentation: integer shift, then rotation, then scaling,
/// both about the image center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineDraw {
    /// Columns to move right.
    pub shift_x: i32,
    /// Rows to move down.
    pub shift_y: i32,
    pub angle_deg: f64,
    pub scale: f64,
}

impl AffineDraw {
    pub const IDENTITY: AffineDraw = AffineDraw {
        shift_x: 0,
        shift_y: 0,
        angle_deg: 0.0,
        scale: 1.0,
    };
}

pub fn augment<R: Rng + ?Sized>(image: &Image, params: &AugmentParams, rng: &mut R) -> Image {
    if !params.enabled {
        return image.clone();
    }
    apply_affine(image, &params.draw(rng))
}

fn shift(image: &Image, dx: i32, dy: i32) -> Vec<f32> {
    let (h, w) = (image.height() as i64, image.width() as i64);
    let mut out = vec![0.0f32; image.len()];
    for r in 0..h {
        let sr = r - i64::from(dy);
        if !(0..h).contains(&sr) {
            continue;
        }
        for c in 0..w {
            let sc = c - i64::from(dx);
            if (0..w).contains(&sc) {
                out[(r * w + c) as usize] = image.pixels()[(sr * w + sc) as usize];
            }
        }
    }
    out
}

/// Applies `draw` with a single bilinear resampling for the rotation and
/// scale (they commute about a shared center). Out-of-frame samples are 0.
pub fn apply_affine(image: &Image, draw: &AffineDraw) -> Image {
    let (h, w) = (image.height(), image.width());
    let shifted = shift(image, draw.shift_x, draw.shift_y);
    if draw.angle_deg == 0.0 && draw.scale == 1.0 {
        return Image::new(h, w, shifted).expect("shift keeps shape and range");
    }

    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let (sin, cos) = draw.angle_deg.to_radians().sin_cos();
    let inv_scale = 1.0 / draw.scale;
    let at = |r: i64, c: i64| -> f64 {
        if r < 0 || c < 0 || r >= h as i64 || c >= w as i64 {
            0.0
        } else {
            f64::from(shifted[r as usize * w + c as usize])
        }
    };

    let mut out = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            // inverse map: undo scale, then undo rotation
            let dy = (r as f64 - cy) * inv_scale;
            let dx = (c as f64 - cx) * inv_scale;
            let sx = cx + cos * dx + sin * dy;
            let sy = cy - sin * dx + cos * dy;
            let x0 = sx.floor();
            let y0 = sy.floor();
            let tx = sx - x0;
            let ty = sy - y0;
            let (x0, y0) = (x0 as i64, y0 as i64);
            let v = (at(y0, x0) * (1.0 - tx) + at(y0, x0 + 1) * tx) * (1.0 - ty)
                + (at(y0 + 1, x0) * (1.0 - tx) + at(y0 + 1, x0 + 1) * tx) * ty;
            out.push(v.clamp(0.0, 1.0) as f32);
        }
    }
    Image::new(h, w, out).expect("resampling keeps shape and range")
}
