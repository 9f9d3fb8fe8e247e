//! Pixel-budget resizing: images above `max_pixels` are scaled uniformly so
//! the result fits the budget while keeping the aspect ratio.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{resize_image, RgbImage};

/// Default budget, 1728x1728 pixels.
pub const DEFAULT_MAX_PIXELS: u64 = 1728 * 1728;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResizePolicy {
    pub max_pixels: u64,
}

impl Default for ResizePolicy {
    fn default() -> Self {
        Self {
            max_pixels: DEFAULT_MAX_PIXELS,
        }
    }
}

impl ResizePolicy {
    pub fn new(max_pixels: u64) -> Result<Self> {
        if max_pixels == 0 {
            return Err(Error::InvalidParam("max_pixels must be >= 1".into()));
        }
        Ok(Self { max_pixels })
    }
}

impl FromStr for ResizePolicy {
    type Err = Error;

    /// Accepts `"NxM"` (the product is the budget) or a plain pixel count.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidParam(format!("invalid max size {s:?}")))
        };
        let pixels = match s.split_once(['x', 'X', '*']) {
            Some((a, b)) => parse(a)?
                .checked_mul(parse(b)?)
                .ok_or_else(|| Error::InvalidParam(format!("max size {s:?} overflows")))?,
            None => parse(s)?,
        };
        Self::new(pixels)
    }
}

impl fmt::Display for ResizePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.max_pixels)
    }
}

/// Largest `n` with `n * n * den <= num`, i.e. `floor(sqrt(num / den))`
/// computed exactly in integers.
fn isqrt_ratio(num: u128, den: u128) -> u64 {
    // Float estimate, then correct by at most a few steps either way.
    let mut n = ((num as f64) / (den as f64)).sqrt().floor() as u128;
    while n > 0 && n * n * den > num {
        n -= 1;
    }
    while (n + 1) * (n + 1) * den <= num {
        n += 1;
    }
    n as u64
}

/// Output dimensions for an `h x w` input under `policy`, and the scale `r`.
///
/// With `r = sqrt(max / (h*w))`, returns `(floor(r*h), floor(r*w))`. Both
/// floors are evaluated exactly: `floor(r*h)` is the largest `n` with
/// `n^2 * w <= max * h`.
pub fn target_dims(h: usize, w: usize, policy: &ResizePolicy) -> (usize, usize, f64) {
    let area = h as u128 * w as u128;
    let max = policy.max_pixels as u128;
    if area <= max {
        return (h, w, 1.0);
    }
    let out_h = isqrt_ratio(max * h as u128, w as u128) as usize;
    let out_w = isqrt_ratio(max * w as u128, h as u128) as usize;
    let r = (policy.max_pixels as f64 / area as f64).sqrt();
    (out_h, out_w, r)
}

/// Returns the (possibly resized) image and the scale factor applied.
pub fn flexible_resize(img: &RgbImage, policy: &ResizePolicy) -> Result<(RgbImage, f64)> {
    let (out_h, out_w, r) = target_dims(img.height(), img.width(), policy);
    if r == 1.0 && out_h == img.height() && out_w == img.width() {
        return Ok((img.clone(), 1.0));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::DegenerateOutput {
            height: out_h,
            width: out_w,
        });
    }
    Ok((resize_image(img, out_h, out_w), r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_policy() {
        assert_eq!("960x960".parse::<ResizePolicy>().unwrap().max_pixels, 921_600);
        assert_eq!("1000".parse::<ResizePolicy>().unwrap().max_pixels, 1000);
        assert!("0".parse::<ResizePolicy>().is_err());
        assert!("abc".parse::<ResizePolicy>().is_err());
        assert!("12x".parse::<ResizePolicy>().is_err());
    }

    #[test]
    fn under_cap_is_noop() {
        let p: ResizePolicy = "960x960".parse().unwrap();
        let img = RgbImage::filled(720, 1280, [9, 9, 9]);
        let (out, r) = flexible_resize(&img, &p).unwrap();
        assert_eq!(r, 1.0);
        assert_eq!(out, img);

        let exact = ResizePolicy::new(720 * 1280).unwrap();
        assert_eq!(target_dims(720, 1280, &exact), (720, 1280, 1.0));
    }

    #[test]
    fn square_over_cap() {
        let (h, w, r) = target_dims(2000, 2000, &ResizePolicy::default());
        assert_eq!((h, w), (1728, 1728));
        assert!((r - 0.864).abs() < 1e-12);
        let img = RgbImage::filled(2000, 2000, [1, 2, 3]);
        let (out, _) = flexible_resize(&img, &ResizePolicy::default()).unwrap();
        assert_eq!((out.height(), out.width()), (1728, 1728));
    }

    #[test]
    fn degenerate_output() {
        let img = RgbImage::filled(1, 400, [0, 0, 0]);
        let p = ResizePolicy::new(100).unwrap();
        assert!(matches!(flexible_resize(&img, &p), Err(Error::DegenerateOutput { .. })));
    }

    #[test]
    fn isqrt_exact() {
        for n in 0..2000u128 {
            assert_eq!(isqrt_ratio(n, 1), (n as f64).sqrt().floor() as u64);
        }
        assert_eq!(isqrt_ratio(1728 * 1728 * 2000, 2000), 1728);
    }
}
