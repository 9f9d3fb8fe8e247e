//! Adaptive pixel slimming: find contiguous low-gradient row and column
//! bands on a size-normalized gradient map and cut them out of the source
//! image.
//!
//! Pipeline: luma -> Sobel max-magnitude with noise floor -> bilinear
//! resize to `norm_size x norm_size` -> per-row and per-column gradient sums
//! -> runs below `value_thresh` longer than `run_thresh` -> map the runs back
//! to source coordinates (shrinking, never growing) -> remove.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{gradient_map, resize_map, to_grayscale, GradientMap, RgbImage};

/// Normalized map side length.
pub const DEFAULT_NORM_SIZE: usize = 2048;
/// Gradient values below this are treated as background texture.
pub const DEFAULT_NOISE_THRESH: f32 = 50.0;
/// A redundant run must be strictly longer than this many normalized lines.
pub const DEFAULT_RUN_THRESH: usize = 10;
/// Profile-sum threshold below which a normalized line counts as redundant.
///
/// Chosen with `examples/calibrate_value_thresh.rs`: the smallest candidate
/// (the grid starts at the noise floor) that recovers every planted blank
/// band on the seeded synthetic corpus without removing any line that
/// overlaps rendered text. Every candidate up to about 2e5 qualifies there.
pub const DEFAULT_VALUE_THRESH: f64 = 50.0;
/// Per-axis cap on the fraction of lines that may be removed.
pub const DEFAULT_MAX_REMOVAL_FRAC: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApsParams {
    pub norm_size: usize,
    pub noise_thresh: f32,
    pub run_thresh: usize,
    pub value_thresh: f64,
    pub max_removal_frac: f64,
}

impl Default for ApsParams {
    fn default() -> Self {
        Self {
            norm_size: DEFAULT_NORM_SIZE,
            noise_thresh: DEFAULT_NOISE_THRESH,
            run_thresh: DEFAULT_RUN_THRESH,
            value_thresh: DEFAULT_VALUE_THRESH,
            max_removal_frac: DEFAULT_MAX_REMOVAL_FRAC,
        }
    }
}

impl ApsParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParam(msg));
        if self.norm_size < 64 {
            return bad(format!("norm_size must be >= 64, got {}", self.norm_size));
        }
        if !(self.noise_thresh >= 0.0) {
            return bad(format!("noise_thresh must be >= 0, got {}", self.noise_thresh));
        }
        if self.run_thresh < 1 {
            return bad("run_thresh must be >= 1".into());
        }
        if !(self.value_thresh >= 0.0) {
            return bad(format!("value_thresh must be >= 0, got {}", self.value_thresh));
        }
        if !(self.max_removal_frac > 0.0 && self.max_removal_frac < 1.0) {
            return bad(format!(
                "max_removal_frac must be in (0, 1), got {}",
                self.max_removal_frac
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Rows,
    Cols,
}

/// Half-open interval `[start, end)`; serialized as `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Band {
    pub start: usize,
    pub end: usize,
}

impl Band {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, i: usize) -> bool {
        self.start <= i && i < self.end
    }

    pub fn overlaps(&self, other: &Band) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for Band {
    fn from([start, end]: [usize; 2]) -> Self {
        Self { start, end }
    }
}

impl From<Band> for [usize; 2] {
    fn from(b: Band) -> Self {
        [b.start, b.end]
    }
}

/// Sorted, disjoint, non-empty intervals along one axis of an image.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BandSet {
    pub axis: Axis,
    pub intervals: Vec<Band>,
}

impl BandSet {
    pub fn empty(axis: Axis) -> Self {
        Self {
            axis,
            intervals: Vec::new(),
        }
    }

    /// Validates ordering, disjointness and bounds against `dim`.
    pub fn new(axis: Axis, intervals: Vec<Band>, dim: usize) -> Result<Self> {
        let mut prev_end = 0;
        for (k, b) in intervals.iter().enumerate() {
            if b.is_empty() || b.end > dim || (k > 0 && b.start < prev_end) {
                return Err(Error::ShapeMismatch(format!(
                    "invalid {axis:?} band {:?} (dim {dim}, previous end {prev_end})",
                    [b.start, b.end]
                )));
            }
            prev_end = b.end;
        }
        Ok(Self { axis, intervals })
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn total_width(&self) -> usize {
        self.intervals.iter().map(Band::len).sum()
    }

    pub fn covers(&self, i: usize) -> bool {
        // Intervals are sorted; binary search on start.
        let idx = self.intervals.partition_point(|b| b.start <= i);
        idx > 0 && self.intervals[idx - 1].contains(i)
    }

    /// Per-line mask of length `dim`, `true` where a band covers the line.
    pub fn mask(&self, dim: usize) -> Vec<bool> {
        let mut m = vec![false; dim];
        for b in &self.intervals {
            m[b.start..b.end.min(dim)].iter_mut().for_each(|v| *v = true);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlimResult {
    pub image: RgbImage,
    pub row_bands: BandSet,
    pub col_bands: BandSet,
    pub original_pixels: usize,
    pub slimmed_pixels: usize,
    pub reduction: f64,
    pub guard_fired: bool,
}

/// Gradient sum along each line of a `norm_size x norm_size` map.
/// `Axis::Rows` yields one entry per row, `Axis::Cols` one per column.
pub fn profile_sums(map: &GradientMap, axis: Axis, norm_size: usize) -> Result<Vec<f64>> {
    if map.height() != norm_size || map.width() != norm_size {
        return Err(Error::ShapeMismatch(format!(
            "expected a {norm_size}x{norm_size} normalized map, got {}x{}",
            map.height(),
            map.width()
        )));
    }
    Ok(line_sums(map, axis))
}

fn line_sums(map: &GradientMap, axis: Axis) -> Vec<f64> {
    match axis {
        Axis::Rows => (0..map.height())
            .map(|r| map.row(r).iter().map(|&v| v as f64).sum())
            .collect(),
        Axis::Cols => {
            let mut sums = vec![0f64; map.width()];
            for r in 0..map.height() {
                for (s, &v) in sums.iter_mut().zip(map.row(r)) {
                    *s += v as f64;
                }
            }
            sums
        }
    }
}

/// Maximal runs of `profile[k] < value_thresh` whose length is strictly
/// greater than `run_thresh`.
pub fn icr(profile: &[f64], value_thresh: f64, run_thresh: usize) -> Vec<Band> {
    let mut out = Vec::new();
    let mut run_start = None;
    for (k, &v) in profile.iter().enumerate() {
        match (v < value_thresh, run_start) {
            (true, None) => run_start = Some(k),
            (false, Some(s)) => {
                if k - s > run_thresh {
                    out.push(Band::new(s, k));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = run_start {
        if profile.len() - s > run_thresh {
            out.push(Band::new(s, profile.len()));
        }
    }
    out
}

/// Maps normalized intervals onto `orig_dim` source lines. Start is rounded
/// up and end down, so a source line is only kept in a band when it lies
/// entirely inside the normalized interval.
pub fn denormalize_bands(intervals: &[Band], norm_size: usize, orig_dim: usize, axis: Axis) -> BandSet {
    let (n, d) = (norm_size as u64, orig_dim as u64);
    let intervals = intervals
        .iter()
        .map(|b| {
            let start = (b.start as u64 * d).div_ceil(n);
            let end = b.end as u64 * d / n;
            Band::new(start as usize, end as usize)
        })
        .filter(|b| !b.is_empty())
        .collect();
    BandSet { axis, intervals }
}

/// Keeps every row and column not covered by a band, in original order.
pub fn remove_bands(img: &RgbImage, rows: &BandSet, cols: &BandSet) -> Result<RgbImage> {
    let row_mask = rows.mask(img.height());
    let col_mask = cols.mask(img.width());
    let kept_rows: Vec<usize> = (0..img.height()).filter(|&r| !row_mask[r]).collect();
    let kept_cols: Vec<usize> = (0..img.width()).filter(|&c| !col_mask[c]).collect();
    if kept_rows.is_empty() {
        return Err(Error::EmptyResult { axis: "rows" });
    }
    if kept_cols.is_empty() {
        return Err(Error::EmptyResult { axis: "cols" });
    }
    if rows.is_empty() && cols.is_empty() {
        return Ok(img.clone());
    }
    // Column removal as a list of contiguous kept spans so rows copy in slices.
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for &c in &kept_cols {
        match spans.last_mut() {
            Some((_, end)) if *end == c => *end = c + 1,
            _ => spans.push((c, c + 1)),
        }
    }
    let mut data = Vec::with_capacity(3 * kept_rows.len() * kept_cols.len());
    for &r in &kept_rows {
        let row = img.row(r);
        for &(s, e) in &spans {
            data.extend_from_slice(&row[3 * s..3 * e]);
        }
    }
    RgbImage::new(kept_rows.len(), kept_cols.len(), data)
}

/// Detected bands before removal.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub row_bands: BandSet,
    pub col_bands: BandSet,
    pub guard_fired: bool,
}

/// Runs detection only; `aps` is this followed by `remove_bands`.
pub fn detect(img: &RgbImage, params: &ApsParams) -> Result<Detection> {
    params.validate()?;
    let gray = to_grayscale(img);
    let grad = gradient_map(&gray, params.noise_thresh)?;
    let norm = resize_map(&grad, params.norm_size, params.norm_size);

    let row_profile = profile_sums(&norm, Axis::Rows, params.norm_size)?;
    let col_profile = profile_sums(&norm, Axis::Cols, params.norm_size)?;

    let row_runs = icr(&row_profile, params.value_thresh, params.run_thresh);
    let col_runs = icr(&col_profile, params.value_thresh, params.run_thresh);
    let row_bands = denormalize_bands(&row_runs, params.norm_size, img.height(), Axis::Rows);
    let col_bands = denormalize_bands(&col_runs, params.norm_size, img.width(), Axis::Cols);

    let too_many = |removed: usize, dim: usize| removed as f64 > params.max_removal_frac * dim as f64;
    if too_many(row_bands.total_width(), img.height()) || too_many(col_bands.total_width(), img.width()) {
        return Ok(Detection {
            row_bands: BandSet::empty(Axis::Rows),
            col_bands: BandSet::empty(Axis::Cols),
            guard_fired: true,
        });
    }
    Ok(Detection {
        row_bands,
        col_bands,
        guard_fired: false,
    })
}

pub fn aps(img: &RgbImage, params: &ApsParams) -> Result<SlimResult> {
    let det = detect(img, params)?;
    let image = remove_bands(img, &det.row_bands, &det.col_bands)?;
    let original_pixels = img.pixel_count();
    let slimmed_pixels = image.pixel_count();
    Ok(SlimResult {
        image,
        row_bands: det.row_bands,
        col_bands: det.col_bands,
        original_pixels,
        slimmed_pixels,
        reduction: 1.0 - slimmed_pixels as f64 / original_pixels as f64,
        guard_fired: det.guard_fired,
    })
}

/// Light blue used to tint removed bands in overlays.
pub const OVERLAY_TINT: [u8; 3] = [110, 190, 255];
pub const OVERLAY_ALPHA: f32 = 0.55;

/// The original image with every removed row and column tinted.
pub fn overlay(img: &RgbImage, rows: &BandSet, cols: &BandSet) -> RgbImage {
    let row_mask = rows.mask(img.height());
    let col_mask = cols.mask(img.width());
    let blend = |v: u8, t: u8| ((1.0 - OVERLAY_ALPHA) * v as f32 + OVERLAY_ALPHA * t as f32).round() as u8;
    let mut out = img.clone();
    for r in 0..img.height() {
        for c in 0..img.width() {
            if row_mask[r] || col_mask[c] {
                let p = img.pixel(r, c);
                out.put_pixel(
                    r,
                    c,
                    [blend(p[0], OVERLAY_TINT[0]), blend(p[1], OVERLAY_TINT[1]), blend(p[2], OVERLAY_TINT[2])],
                );
            }
        }
    }
    out
}

/// Per-image JSON report written by the `aps` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApsReport {
    pub input: String,
    pub orig: [usize; 2],
    pub slimmed: [usize; 2],
    pub row_bands: Vec<Band>,
    pub col_bands: Vec<Band>,
    pub reduction: f64,
    pub guard_fired: bool,
}

impl ApsReport {
    pub fn new(input: impl Into<String>, original: &RgbImage, result: &SlimResult) -> Self {
        Self {
            input: input.into(),
            orig: [original.height(), original.width()],
            slimmed: [result.image.height(), result.image.width()],
            row_bands: result.row_bands.intervals.clone(),
            col_bands: result.col_bands.intervals.clone(),
            reduction: result.reduction,
            guard_fired: result.guard_fired,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn indexed(h: usize, w: usize) -> RgbImage {
        RgbImage::from_fn(h, w, |r, c| [r as u8, c as u8, 7])
    }

    #[test]
    fn params_validation() {
        assert!(ApsParams::default().validate().is_ok());
        let bad = [
            ApsParams { norm_size: 63, ..Default::default() },
            ApsParams { noise_thresh: -1.0, ..Default::default() },
            ApsParams { run_thresh: 0, ..Default::default() },
            ApsParams { value_thresh: f64::NAN, ..Default::default() },
            ApsParams { max_removal_frac: 1.0, ..Default::default() },
            ApsParams { max_removal_frac: 0.0, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn profile_sums_examples() {
        let n = 64;
        let z = GradientMap::zeros(n, n);
        assert!(profile_sums(&z, Axis::Rows, n).unwrap().iter().all(|&v| v == 0.0));

        let mut data = vec![0f32; n * n];
        data[3 * n + 5] = 7.0;
        let m = GradientMap::new(n, n, data).unwrap();
        let rows = profile_sums(&m, Axis::Rows, n).unwrap();
        let cols = profile_sums(&m, Axis::Cols, n).unwrap();
        for k in 0..n {
            assert_eq!(rows[k], if k == 3 { 7.0 } else { 0.0 });
            assert_eq!(cols[k], if k == 5 { 7.0 } else { 0.0 });
        }

        let mut data = vec![0f32; n * n];
        for c in 0..n {
            data[10 * n + c] = 1020.0;
            data[40 * n + c] = 1020.0;
        }
        let m = GradientMap::new(n, n, data).unwrap();
        let rows = profile_sums(&m, Axis::Rows, n).unwrap();
        let nonzero: Vec<usize> = (0..n).filter(|&k| rows[k] != 0.0).collect();
        assert_eq!(nonzero, vec![10, 40]);
        assert_eq!(rows[10], 1020.0 * n as f64);

        assert!(matches!(
            profile_sums(&GradientMap::zeros(64, 65), Axis::Rows, 64),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn icr_examples() {
        assert!(icr(&[5.0; 30], 5.0, 3).is_empty());

        let mut p = vec![100.0; 100];
        p[40..60].iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(icr(&p, 1.0, 10), vec![Band::new(40, 60)]);

        let mut p = vec![100.0; 50];
        p[10..20].iter_mut().for_each(|v| *v = 0.0);
        assert!(icr(&p, 1.0, 10).is_empty(), "run of exactly t_c is excluded");
        p[20] = 0.0;
        assert_eq!(icr(&p, 1.0, 10), vec![Band::new(10, 21)]);

        // Runs touching either end.
        let mut p = vec![0.0; 40];
        p[15..25].iter_mut().for_each(|v| *v = 9.0);
        assert_eq!(icr(&p, 1.0, 10), vec![Band::new(0, 15), Band::new(25, 40)]);
    }

    #[test]
    fn denormalize_examples() {
        let b = [Band::new(3, 17), Band::new(100, 2048)];
        assert_eq!(denormalize_bands(&b, 2048, 2048, Axis::Rows).intervals, b.to_vec());

        let out = denormalize_bands(&[Band::new(512, 1024)], 2048, 1000, Axis::Cols);
        assert_eq!(out.intervals, vec![Band::new(250, 500)]);

        // [1, 3) of 2048 onto 500 lines covers (0.24, 0.73): no whole line.
        assert!(denormalize_bands(&[Band::new(1, 3)], 2048, 500, Axis::Rows).is_empty());
    }

    #[test]
    fn remove_bands_examples() {
        let img = indexed(10, 10);
        let none_r = BandSet::empty(Axis::Rows);
        let none_c = BandSet::empty(Axis::Cols);
        assert_eq!(remove_bands(&img, &none_r, &none_c).unwrap(), img);

        let rows = BandSet::new(Axis::Rows, vec![Band::new(2, 5)], 10).unwrap();
        let out = remove_bands(&img, &rows, &none_c).unwrap();
        assert_eq!((out.height(), out.width()), (7, 10));
        let kept: Vec<u8> = (0..7).map(|r| out.pixel(r, 0)[0]).collect();
        assert_eq!(kept, vec![0, 1, 5, 6, 7, 8, 9]);

        let cols = BandSet::new(Axis::Cols, vec![Band::new(0, 3)], 10).unwrap();
        let out = remove_bands(&img, &rows, &cols).unwrap();
        assert_eq!((out.height(), out.width()), (7, 7));
        for (i, &r) in [0u8, 1, 5, 6, 7, 8, 9].iter().enumerate() {
            for (j, c) in (3u8..10).enumerate() {
                assert_eq!(out.pixel(i, j), [r, c, 7]);
            }
        }

        let all = BandSet::new(Axis::Rows, vec![Band::new(0, 10)], 10).unwrap();
        assert!(matches!(
            remove_bands(&img, &all, &none_c),
            Err(Error::EmptyResult { axis: "rows" })
        ));
    }

    #[test]
    fn bandset_validation_and_cover() {
        assert!(BandSet::new(Axis::Rows, vec![Band::new(5, 3)], 10).is_err());
        assert!(BandSet::new(Axis::Rows, vec![Band::new(0, 4), Band::new(3, 6)], 10).is_err());
        assert!(BandSet::new(Axis::Rows, vec![Band::new(8, 11)], 10).is_err());
        let s = BandSet::new(Axis::Rows, vec![Band::new(1, 3), Band::new(6, 8)], 10).unwrap();
        let covered: Vec<usize> = (0..10).filter(|&i| s.covers(i)).collect();
        assert_eq!(covered, vec![1, 2, 6, 7]);
        assert_eq!(s.total_width(), 4);
    }

    #[test]
    fn uniform_page_trips_the_guard() {
        let img = RgbImage::filled(512, 512, [255, 255, 255]);
        let r = aps(&img, &ApsParams::default()).unwrap();
        assert!(r.guard_fired);
        assert_eq!(r.image, img);
        assert_eq!(r.reduction, 0.0);
        assert!(r.row_bands.is_empty() && r.col_bands.is_empty());
    }

    #[test]
    fn tiny_image_is_rejected() {
        let img = RgbImage::filled(2, 50, [0, 0, 0]);
        assert!(matches!(aps(&img, &ApsParams::default()), Err(Error::ImageTooSmall { .. })));
    }

    #[test]
    fn band_serializes_as_pair() {
        let json = serde_json::to_string(&vec![Band::new(3, 9)]).unwrap();
        assert_eq!(json, "[[3,9]]");
        let back: Vec<Band> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![Band::new(3, 9)]);
    }

    #[test]
    fn overlay_tints_only_bands() {
        let img = RgbImage::filled(6, 6, [255, 255, 255]);
        let rows = BandSet::new(Axis::Rows, vec![Band::new(1, 2)], 6).unwrap();
        let cols = BandSet::new(Axis::Cols, vec![Band::new(4, 6)], 6).unwrap();
        let ov = overlay(&img, &rows, &cols);
        assert_eq!(ov.pixel(0, 0), [255, 255, 255]);
        assert_ne!(ov.pixel(1, 0), [255, 255, 255]);
        assert_ne!(ov.pixel(3, 5), [255, 255, 255]);
    }
}
