//! Raster primitives shared by pixel slimming and the flexible resizer.
//!
//! Everything here is a pure function of its inputs. Rasters are row-major
//! and carry their own dimensions; constructors validate buffer lengths.

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major, 3 bytes per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != 3 * height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} bytes for {height}x{width} RGB, got {}",
                3 * height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Solid-color image.
    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let data = rgb
            .iter()
            .copied()
            .cycle()
            .take(3 * height * width)
            .collect();
        Self {
            height,
            width,
            data,
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> [u8; 3]) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(3 * height * width);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [u8; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn put_pixel(&mut self, row: usize, col: usize, rgb: [u8; 3]) {
        let i = 3 * (row * self.width + col);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// One row as a byte slice of length `3 * width`.
    pub fn row(&self, row: usize) -> &[u8] {
        let stride = 3 * self.width;
        &self.data[row * stride..(row + 1) * stride]
    }
}

/// 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::ShapeMismatch(format!(
                "image dimensions must be positive, got {height}x{width}"
            )));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "expected {} bytes for {height}x{width} gray, got {}",
                height * width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(height > 0 && width > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(height * width);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }
}

/// Per-pixel nonnegative gradient magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl GradientMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "gradient map {height}x{width} with {} entries",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::InvalidParam(format!(
                "gradient entries must be nonnegative, found {v}"
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }

    pub fn row(&self, row: usize) -> &[f32] {
        &self.data[row * self.width..(row + 1) * self.width]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobelAxis {
    /// Horizontal derivative (responds to vertical edges).
    X,
    /// Vertical derivative (responds to horizontal edges).
    Y,
}

/// Raw signed Sobel response, same shape as its source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SobelResponse {
    pub height: usize,
    pub width: usize,
    pub data: Vec<i32>,
}

impl SobelResponse {
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.data[row * self.width + col]
    }
}

/// Rec. 601 luma, rounded half up.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| {
            let y = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
            ((y + 500) / 1000).min(255) as u8
        })
        .collect();
    GrayImage {
        height: img.height,
        width: img.width,
        data,
    }
}

fn check_sobel_size(img: &GrayImage) -> Result<()> {
    if img.height < 3 || img.width < 3 {
        return Err(Error::ImageTooSmall {
            height: img.height,
            width: img.width,
        });
    }
    Ok(())
}

/// Visits every pixel with its 3x3 neighbourhood (edge-replicated) and the
/// pair of signed Sobel responses `(gx, gy)`.
#[inline]
fn for_each_sobel(img: &GrayImage, mut f: impl FnMut(usize, i32, i32)) {
    let (h, w) = (img.height, img.width);
    let px = &img.data;
    for r in 0..h {
        let up = &px[r.saturating_sub(1) * w..][..w];
        let mid = &px[r * w..][..w];
        let down = &px[(r + 1).min(h - 1) * w..][..w];
        let base = r * w;
        for c in 0..w {
            let l = c.saturating_sub(1);
            let rt = (c + 1).min(w - 1);
            let (ul, uc, ur) = (up[l] as i32, up[c] as i32, up[rt] as i32);
            let (ml, mr) = (mid[l] as i32, mid[rt] as i32);
            let (dl, dc, dr) = (down[l] as i32, down[c] as i32, down[rt] as i32);
            let gx = (ur + 2 * mr + dr) - (ul + 2 * ml + dl);
            let gy = (dl + 2 * dc + dr) - (ul + 2 * uc + ur);
            f(base + c, gx, gy);
        }
    }
}

/// 3x3 Sobel along one axis with edge replication at the borders.
pub fn sobel(img: &GrayImage, axis: SobelAxis) -> Result<SobelResponse> {
    check_sobel_size(img)?;
    let mut data = vec![0i32; img.height * img.width];
    for_each_sobel(img, |i, gx, gy| {
        data[i] = match axis {
            SobelAxis::X => gx,
            SobelAxis::Y => gy,
        };
    });
    Ok(SobelResponse {
        height: img.height,
        width: img.width,
        data,
    })
}

/// `max(|sobel_x|, |sobel_y|)` per pixel, with entries below `noise_thresh` zeroed.
pub fn gradient_map(img: &GrayImage, noise_thresh: f32) -> Result<GradientMap> {
    check_sobel_size(img)?;
    if !(noise_thresh >= 0.0) {
        return Err(Error::InvalidParam(format!(
            "noise threshold must be >= 0, got {noise_thresh}"
        )));
    }
    let mut data = vec![0f32; img.height * img.width];
    for_each_sobel(img, |i, gx, gy| {
        let g = gx.abs().max(gy.abs()) as f32;
        data[i] = if g < noise_thresh { 0.0 } else { g };
    });
    Ok(GradientMap {
        height: img.height,
        width: img.width,
        data,
    })
}

/// Bilinear resize of a gradient map. Downscaling widens the triangle filter
/// so every source line contributes (area-weighted), which keeps thin strokes
/// from vanishing between samples.
pub fn resize_map(map: &GradientMap, out_h: usize, out_w: usize) -> GradientMap {
    assert!(out_h > 0 && out_w > 0, "target dimensions must be positive");
    if out_h == map.height && out_w == map.width {
        return map.clone();
    }
    let data = resample(&map.data, map.height, map.width, 1, out_h, out_w);
    // Weights are nonnegative, so only rounding noise could go below zero.
    let data = data.into_iter().map(|v| v.max(0.0)).collect();
    GradientMap {
        height: out_h,
        width: out_w,
        data,
    }
}

/// Bilinear resize of an RGB image, per channel, rounded and clamped to 8 bits.
pub fn resize_image(img: &RgbImage, out_h: usize, out_w: usize) -> RgbImage {
    assert!(out_h > 0 && out_w > 0, "target dimensions must be positive");
    if out_h == img.height && out_w == img.width {
        return img.clone();
    }
    let src: Vec<f32> = img.data.iter().map(|&v| v as f32).collect();
    let out = resample(&src, img.height, img.width, 3, out_h, out_w);
    let data = out
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    RgbImage {
        height: out_h,
        width: out_w,
        data,
    }
}

/// Contributing source span and normalized weights for one output sample.
#[derive(Debug, Clone)]
struct Taps {
    start: usize,
    weights: Vec<f64>,
}

fn triangle_taps(in_len: usize, out_len: usize) -> Vec<Taps> {
    let scale = in_len as f64 / out_len as f64;
    let filter_scale = scale.max(1.0);
    let support = filter_scale;
    (0..out_len)
        .map(|o| {
            let center = (o as f64 + 0.5) * scale;
            let lo = ((center - support).floor().max(0.0)) as usize;
            let hi = ((center + support).ceil() as usize).min(in_len);
            let mut weights: Vec<f64> = (lo..hi)
                .map(|i| {
                    let x = (i as f64 + 0.5 - center) / filter_scale;
                    (1.0 - x.abs()).max(0.0)
                })
                .collect();
            // Trim zero-weight taps on both ends.
            let first = weights.iter().position(|&w| w > 0.0).unwrap_or(0);
            let last = weights
                .iter()
                .rposition(|&w| w > 0.0)
                .map_or(weights.len(), |p| p + 1);
            weights.truncate(last);
            weights.drain(..first);
            let sum: f64 = weights.iter().sum();
            if sum > 0.0 {
                weights.iter_mut().for_each(|w| *w /= sum);
            }
            Taps {
                start: lo + first,
                weights,
            }
        })
        .collect()
}

/// Separable triangle-filter resample of an interleaved plane with `ch` channels.
fn resample(src: &[f32], h: usize, w: usize, ch: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    // Horizontal pass: h x out_w.
    let horiz = if out_w == w {
        src.to_vec()
    } else {
        let taps = triangle_taps(w, out_w);
        let mut tmp = vec![0f32; h * out_w * ch];
        for r in 0..h {
            let src_row = &src[r * w * ch..(r + 1) * w * ch];
            let dst_row = &mut tmp[r * out_w * ch..(r + 1) * out_w * ch];
            for (o, t) in taps.iter().enumerate() {
                for k in 0..ch {
                    let mut acc = 0f64;
                    for (i, &wt) in t.weights.iter().enumerate() {
                        acc += wt * src_row[(t.start + i) * ch + k] as f64;
                    }
                    dst_row[o * ch + k] = acc as f32;
                }
            }
        }
        tmp
    };
    if out_h == h {
        return horiz;
    }
    // Vertical pass: out_h x out_w.
    let taps = triangle_taps(h, out_h);
    let row_len = out_w * ch;
    let mut out = vec![0f32; out_h * row_len];
    let mut acc = vec![0f64; row_len];
    for (o, t) in taps.iter().enumerate() {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (i, &wt) in t.weights.iter().enumerate() {
            let src_row = &horiz[(t.start + i) * row_len..][..row_len];
            for (a, &v) in acc.iter_mut().zip(src_row) {
                *a += wt * v as f64;
            }
        }
        for (d, &a) in out[o * row_len..][..row_len].iter_mut().zip(&acc) {
            *d = a as f32;
        }
    }
    out
}
