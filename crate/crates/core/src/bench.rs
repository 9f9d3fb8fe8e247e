//! Reduction and latency measurements over image and token corpora.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aps::{aps, ApsParams, Band, BandSet};
use crate::dts::{dts, DtsParams, TokenMatrix};
use crate::error::{Error, Result};
use crate::imgproc::RgbImage;
use crate::io::{load_rgb, read_json, read_tokens};
use crate::synth::{DocTruth, TokenTruth};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Mixed into the DTS seed so the random baseline never shares a stream with it.
const BASELINE_STREAM: u64 = 0xba5e_11fe_d00d_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    None,
    Random,
}

impl std::str::FromStr for Baseline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "random" => Ok(Self::Random),
            other => Err(Error::InvalidParam(format!("unknown baseline {other:?}, expected none or random"))),
        }
    }
}

/// Measurements for one corpus item. Fields that do not apply are `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub name: String,
    pub pixel_reduction: Option<f64>,
    pub token_reduction: Option<f64>,
    pub token_len_before: Option<f64>,
    pub token_len_after: Option<f64>,
    /// Wall time of the slimming stage itself.
    pub wall_time_ms: f64,
    pub guard_fired: Option<bool>,
    /// Share of planted bands recovered, each edge within tolerance.
    pub band_recall: Option<f64>,
    /// Share of removed lines that lie inside planted bands.
    pub line_precision: Option<f64>,
    /// Removed lines crossing a text region.
    pub content_lines_removed: Option<f64>,
    pub content_retention: Option<f64>,
    pub baseline_content_retention: Option<f64>,
    pub baseline_wall_time_ms: Option<f64>,
}

/// Means over items; each field averages only the items that carry it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub items: usize,
    pub pixel_reduction: Option<f64>,
    pub token_reduction: Option<f64>,
    pub avg_token_len_before: Option<f64>,
    pub avg_token_len_after: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub band_recall: Option<f64>,
    pub line_precision: Option<f64>,
    pub content_lines_removed: Option<f64>,
    pub content_retention: Option<f64>,
    pub baseline_content_retention: Option<f64>,
    pub baseline_wall_time_ms: Option<f64>,
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values.flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl Aggregate {
    pub fn of(items: &[ItemStats]) -> Self {
        macro_rules! m {
            ($f:ident) => {
                mean(items.iter().map(|i| i.$f))
            };
        }
        Self {
            items: items.len(),
            pixel_reduction: m!(pixel_reduction),
            token_reduction: m!(token_reduction),
            avg_token_len_before: m!(token_len_before),
            avg_token_len_after: m!(token_len_after),
            wall_time_ms: mean(items.iter().map(|i| Some(i.wall_time_ms))),
            band_recall: m!(band_recall),
            line_precision: m!(line_precision),
            content_lines_removed: m!(content_lines_removed),
            content_retention: m!(content_retention),
            baseline_content_retention: m!(baseline_content_retention),
            baseline_wall_time_ms: m!(baseline_wall_time_ms),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub method: String,
    pub items: Vec<ItemStats>,
    pub aggregate: Aggregate,
    /// Files that failed to decode.
    pub skipped: usize,
}

impl BenchReport {
    pub fn new(method: impl Into<String>, items: Vec<ItemStats>, skipped: usize) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            method: method.into(),
            aggregate: Aggregate::of(&items),
            items,
            skipped,
        }
    }

    /// One row per item; empty cells for fields that do not apply.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let csv_err = |e: csv::Error| Error::io(path, e.into());
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record([
            "name",
            "pixel_reduction",
            "token_reduction",
            "token_len_before",
            "token_len_after",
            "wall_time_ms",
            "band_recall",
            "line_precision",
            "content_lines_removed",
            "content_retention",
            "baseline_content_retention",
            "baseline_wall_time_ms",
        ])
        .map_err(csv_err)?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for i in &self.items {
            w.write_record([
                i.name.clone(),
                cell(i.pixel_reduction),
                cell(i.token_reduction),
                cell(i.token_len_before),
                cell(i.token_len_after),
                i.wall_time_ms.to_string(),
                cell(i.band_recall),
                cell(i.line_precision),
                cell(i.content_lines_removed),
                cell(i.content_retention),
                cell(i.baseline_content_retention),
                cell(i.baseline_wall_time_ms),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Edge tolerance for matching a detected band to a planted one: the
/// minimum run length mapped back to original resolution.
pub fn band_tolerance(params: &ApsParams, orig_dim: usize) -> usize {
    (params.run_thresh * orig_dim).div_ceil(params.norm_size)
}

/// Planted bands wider than the minimum detectable run.
fn detectable<'a>(planted: &'a BandSet, params: &'a ApsParams, orig_dim: usize) -> impl Iterator<Item = &'a Band> {
    let min = params.run_thresh as f64 * orig_dim as f64 / params.norm_size as f64;
    planted.intervals.iter().filter(move |b| b.len() as f64 > min)
}

fn recalled(planted: &Band, detected: &BandSet, tol: usize) -> bool {
    detected
        .intervals
        .iter()
        .any(|d| d.start.abs_diff(planted.start) <= tol && d.end.abs_diff(planted.end) <= tol)
}

/// Compares detected bands on both axes with planted truth.
pub fn score_bands(
    truth: &DocTruth,
    rows: &BandSet,
    cols: &BandSet,
    params: &ApsParams,
) -> (Option<f64>, Option<f64>, usize) {
    let (h, w) = (truth.page_h, truth.page_w);
    let (tol_r, tol_c) = (band_tolerance(params, h), band_tolerance(params, w));
    let mut total = 0usize;
    let mut hit = 0usize;
    for b in detectable(&truth.row_bands, params, h) {
        total += 1;
        hit += recalled(b, rows, tol_r) as usize;
    }
    for b in detectable(&truth.col_bands, params, w) {
        total += 1;
        hit += recalled(b, cols, tol_c) as usize;
    }
    let recall = (total > 0).then(|| hit as f64 / total as f64);

    let text_rows = truth.text_rows();
    let text_cols = truth.text_cols();
    let (mut removed, mut inside, mut content) = (0usize, 0usize, 0usize);
    for (mask, planted, text) in [
        (rows.mask(h), &truth.row_bands, &text_rows),
        (cols.mask(w), &truth.col_bands, &text_cols),
    ] {
        for (i, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
            removed += 1;
            inside += planted.covers(i) as usize;
            content += text[i] as usize;
        }
    }
    let precision = (removed > 0).then(|| inside as f64 / removed as f64);
    (recall, precision, content)
}

/// Slims one page and scores it against optional truth.
pub fn aps_item_stats(name: &str, img: &RgbImage, truth: Option<&DocTruth>, params: &ApsParams) -> Result<ItemStats> {
    let t0 = Instant::now();
    let res = aps(img, params)?;
    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
    let mut stats = ItemStats {
        name: name.to_string(),
        pixel_reduction: Some(res.reduction),
        wall_time_ms,
        guard_fired: Some(res.guard_fired),
        ..Default::default()
    };
    if let Some(t) = truth {
        if (t.page_h, t.page_w) != (img.height(), img.width()) {
            return Err(Error::ShapeMismatch(format!(
                "{name}: truth is {}x{}, image is {}x{}",
                t.page_h,
                t.page_w,
                img.height(),
                img.width()
            )));
        }
        let (recall, precision, content) = score_bands(t, &res.row_bands, &res.col_bands, params);
        stats.band_recall = recall;
        stats.line_precision = precision;
        stats.content_lines_removed = Some(content as f64);
    }
    Ok(stats)
}

fn sorted_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)));
        if ok && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Runs APS over every PNG in `corpus_dir`. A `<stem>.json` truth file next
/// to an image enables recall and precision.
pub fn run_aps_bench(corpus_dir: impl AsRef<Path>, params: &ApsParams) -> Result<BenchReport> {
    params.validate()?;
    let dir = corpus_dir.as_ref();
    let mut items = Vec::new();
    let mut skipped = 0;
    for path in sorted_files(dir, &["png"])? {
        let img = match load_rgb(&path) {
            Ok(img) => img,
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
                continue;
            }
        };
        let truth_path = path.with_extension("json");
        let truth: Option<DocTruth> = if truth_path.is_file() {
            Some(read_json(&truth_path)?)
        } else {
            None
        };
        match aps_item_stats(&stem(&path), &img, truth.as_ref(), params) {
            Ok(s) => items.push(s),
            Err(e @ Error::ImageTooSmall { .. }) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(BenchReport::new("aps", items, skipped))
}

fn retention(kept: &BTreeSet<usize>, content: &[usize]) -> Option<f64> {
    (!content.is_empty()).then(|| content.iter().filter(|i| kept.contains(i)).count() as f64 / content.len() as f64)
}

/// Seed for the random baseline on item `index`.
pub fn baseline_seed(dts_seed: u64, index: usize) -> u64 {
    (dts_seed ^ BASELINE_STREAM).wrapping_add(index as u64)
}

/// Uniformly keeps `keep` of `len` token indices, sorted.
pub fn random_keep(len: usize, keep: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, len, keep.min(len)).into_vec();
    idx.sort_unstable();
    idx
}

/// Slims one token sequence; with truth, scores content retention for DTS
/// and, if requested, for a random drop to the same length.
pub fn dts_item_stats(
    name: &str,
    index: usize,
    v: &TokenMatrix,
    truth: Option<&TokenTruth>,
    params: &DtsParams,
    baseline: Baseline,
) -> Result<ItemStats> {
    let t0 = Instant::now();
    let res = dts(v, None, params)?;
    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;
    let (l_in, l_out) = (v.rows(), res.kept_idx.len());
    let mut stats = ItemStats {
        name: name.to_string(),
        token_reduction: Some(res.reduction()),
        token_len_before: Some(l_in as f64),
        token_len_after: Some(l_out as f64),
        wall_time_ms,
        ..Default::default()
    };
    if let Some(t) = truth {
        if t.redundant.len() != l_in {
            return Err(Error::ShapeMismatch(format!(
                "{name}: truth has {} labels for {l_in} tokens",
                t.redundant.len()
            )));
        }
        stats.content_retention = retention(&res.kept_idx.iter().copied().collect(), &t.content_idx);
    }
    if baseline == Baseline::Random {
        let t0 = Instant::now();
        let kept = random_keep(l_in, l_out, baseline_seed(params.seed, index));
        stats.baseline_wall_time_ms = Some(t0.elapsed().as_secs_f64() * 1e3);
        if let Some(t) = truth {
            stats.baseline_content_retention = retention(&kept.into_iter().collect(), &t.content_idx);
        }
    }
    Ok(stats)
}

/// Runs DTS over every `.dstk` file in `token_dir`. A `<stem>.json` truth
/// file enables content-retention scoring.
pub fn run_dts_bench(token_dir: impl AsRef<Path>, params: &DtsParams, baseline: Baseline) -> Result<BenchReport> {
    params.validate()?;
    let dir = token_dir.as_ref();
    let mut items = Vec::new();
    let mut skipped = 0;
    for (index, path) in sorted_files(dir, &["dstk"])?.into_iter().enumerate() {
        let v = match read_tokens(&path) {
            Ok(v) => v,
            Err(e @ Error::MalformedTokens(_)) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let truth_path = path.with_extension("json");
        let truth: Option<TokenTruth> = if truth_path.is_file() {
            Some(read_json(&truth_path)?)
        } else {
            None
        };
        items.push(dts_item_stats(&stem(&path), index, &v, truth.as_ref(), params, baseline)?);
    }
    let method = match baseline {
        Baseline::None => "dts",
        Baseline::Random => "dts+random",
    };
    Ok(BenchReport::new(method, items, skipped))
}
