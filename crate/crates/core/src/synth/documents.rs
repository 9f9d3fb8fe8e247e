use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aps::{Axis, Band, BandSet, DEFAULT_NOISE_THRESH};
use crate::error::{Error, Result};
use crate::imgproc::RgbImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn rows(&self) -> Band {
        Band::new(self.top, self.top + self.height)
    }

    pub fn cols(&self) -> Band {
        Band::new(self.left, self.left + self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextBlock {
    pub rect: Rect,
    /// Fraction of glyph slots that hold a glyph rather than a space, in (0, 1].
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDocSpec {
    pub page_h: usize,
    pub page_w: usize,
    pub text_blocks: Vec<TextBlock>,
    #[serde(default)]
    pub blank_row_bands: Vec<Band>,
    #[serde(default)]
    pub blank_col_bands: Vec<Band>,
    /// Background pixels are darkened by a uniform amount in `0..=noise_amp`.
    #[serde(default)]
    pub noise_amp: u8,
    #[serde(default)]
    pub seed: u64,
}

/// Ground truth for one generated page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTruth {
    pub page_h: usize,
    pub page_w: usize,
    pub row_bands: BandSet,
    pub col_bands: BandSet,
    pub text_rects: Vec<Rect>,
    /// Fraction of page area lost when every planted band is removed.
    pub planted_fraction: f64,
}

impl DocTruth {
    /// Per-row flag: does the row intersect any text rectangle?
    pub fn text_rows(&self) -> Vec<bool> {
        let mut m = vec![false; self.page_h];
        for r in &self.text_rects {
            m[r.top..r.top + r.height].iter_mut().for_each(|v| *v = true);
        }
        m
    }

    pub fn text_cols(&self) -> Vec<bool> {
        let mut m = vec![false; self.page_w];
        for r in &self.text_rects {
            m[r.left..r.left + r.width].iter_mut().for_each(|v| *v = true);
        }
        m
    }
}

const LINE_GAP: usize = 2;
const MIN_TEXT_EXTENT: usize = 8;

impl SynthDocSpec {
    pub fn validate(&self) -> Result<()> {
        if self.page_h < 3 || self.page_w < 3 {
            return Err(Error::InvalidParam(format!(
                "page must be at least 3x3, got {}x{}",
                self.page_h, self.page_w
            )));
        }
        // Worst-case Sobel response of the noise field is 4 * noise_amp.
        if 4.0 * self.noise_amp as f32 >= DEFAULT_NOISE_THRESH {
            return Err(Error::InvalidParam(format!(
                "noise_amp {} can reach the gradient noise floor {}",
                self.noise_amp, DEFAULT_NOISE_THRESH
            )));
        }
        let row_bands = BandSet::new(Axis::Rows, self.blank_row_bands.clone(), self.page_h)
            .map_err(|e| Error::SpecConflict(e.to_string()))?;
        let col_bands = BandSet::new(Axis::Cols, self.blank_col_bands.clone(), self.page_w)
            .map_err(|e| Error::SpecConflict(e.to_string()))?;
        for (k, b) in self.text_blocks.iter().enumerate() {
            let r = b.rect;
            if r.height < MIN_TEXT_EXTENT || r.width < MIN_TEXT_EXTENT {
                return Err(Error::InvalidParam(format!(
                    "text block {k} is smaller than {MIN_TEXT_EXTENT}x{MIN_TEXT_EXTENT}"
                )));
            }
            if r.top + r.height > self.page_h || r.left + r.width > self.page_w {
                return Err(Error::InvalidParam(format!("text block {k} extends past the page")));
            }
            if !(b.density > 0.0 && b.density <= 1.0) {
                return Err(Error::InvalidParam(format!(
                    "text block {k} density {} not in (0, 1]",
                    b.density
                )));
            }
            if let Some(band) = row_bands.intervals.iter().find(|band| band.overlaps(&r.rows())) {
                return Err(Error::SpecConflict(format!(
                    "text block {k} rows [{}, {}) overlap blank row band [{}, {})",
                    r.top,
                    r.top + r.height,
                    band.start,
                    band.end
                )));
            }
            if let Some(band) = col_bands.intervals.iter().find(|band| band.overlaps(&r.cols())) {
                return Err(Error::SpecConflict(format!(
                    "text block {k} cols [{}, {}) overlap blank column band [{}, {})",
                    r.left,
                    r.left + r.width,
                    band.start,
                    band.end
                )));
            }
        }
        Ok(())
    }

    pub fn truth(&self) -> DocTruth {
        let row_bands = BandSet {
            axis: Axis::Rows,
            intervals: self.blank_row_bands.clone(),
        };
        let col_bands = BandSet {
            axis: Axis::Cols,
            intervals: self.blank_col_bands.clone(),
        };
        let kept = (self.page_h - row_bands.total_width()) as f64 * (self.page_w - col_bands.total_width()) as f64;
        DocTruth {
            page_h: self.page_h,
            page_w: self.page_w,
            planted_fraction: 1.0 - kept / (self.page_h * self.page_w) as f64,
            row_bands,
            col_bands,
            text_rects: self.text_blocks.iter().map(|b| b.rect).collect(),
        }
    }
}

/// Renders a page: uniform light background with sub-threshold noise, and
/// dense pseudo-text (stroke glyphs) inside each text block.
///
/// Glyphs keep a one-pixel margin inside their block, so Sobel responses
/// never reach past the block edge and planted bands stay exactly flat.
pub fn gen_document(spec: &SynthDocSpec) -> Result<(RgbImage, DocTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (h, w) = (spec.page_h, spec.page_w);
    let bg: u8 = rng.random_range(228..=250);
    let ink: u8 = rng.random_range(10..=70);

    let mut ink_mask = vec![false; h * w];
    for block in &spec.text_blocks {
        render_block(block, w, &mut ink_mask, &mut rng);
    }

    let mut data = Vec::with_capacity(3 * h * w);
    for &is_ink in &ink_mask {
        let noise = if spec.noise_amp > 0 {
            rng.random_range(0..=spec.noise_amp)
        } else {
            0
        };
        let v = if is_ink { ink } else { bg - noise };
        data.extend_from_slice(&[v, v, v]);
    }
    let img = RgbImage::new(h, w, data)?;
    Ok((img, spec.truth()))
}

fn render_block(block: &TextBlock, page_w: usize, mask: &mut [bool], rng: &mut ChaCha8Rng) {
    let r = block.rect;
    let (top, bottom) = (r.top + 1, r.top + r.height - 1);
    let (left, right) = (r.left + 1, r.left + r.width - 1);
    let line_h = rng.random_range(8..=14usize);

    let mut y = top;
    while y < bottom {
        let mut lh = line_h.min(bottom - y);
        // Fold a short remainder into this line rather than leaving a sliver.
        if bottom - (y + lh) < line_h / 2 + LINE_GAP {
            lh = bottom - y;
        }
        render_line(y, lh, left, right, block.density, page_w, mask, rng);
        y += lh + LINE_GAP;
    }
}

#[allow(clippy::too_many_arguments)]
fn render_line(
    y: usize,
    lh: usize,
    left: usize,
    right: usize,
    density: f64,
    page_w: usize,
    mask: &mut [bool],
    rng: &mut ChaCha8Rng,
) {
    let mut fill = |r0: usize, r1: usize, c0: usize, c1: usize| {
        for row in r0..r1 {
            mask[row * page_w + c0..row * page_w + c1].iter_mut().for_each(|v| *v = true);
        }
    };
    let mut x = left;
    let mut first = true;
    while x < right {
        let gw = rng.random_range(4..=8usize);
        let remaining = right - x;
        // The last glyph stretches to the block edge; the first is never a space.
        let gw = if remaining < gw + 4 { remaining } else { gw };
        let space = !first && gw != remaining && !rng.random_bool(density);
        first = false;
        if space {
            x += rng.random_range(3..=4usize).min(remaining);
            continue;
        }
        let x1 = x + gw;
        let stem = if gw >= 6 { 2 } else { 1 };
        fill(y, y + lh, x, x + stem);
        if rng.random_bool(0.5) {
            fill(y, y + lh, x1 - stem, x1);
        }
        if rng.random_bool(0.5) {
            fill(y, y + 1, x, x1);
        }
        if rng.random_bool(0.5) {
            fill(y + lh - 1, y + lh, x, x1);
        }
        if lh > 4 && rng.random_bool(0.4) {
            let mid = y + lh / 2;
            fill(mid, mid + 1, x, x1);
        }
        x = x1 + rng.random_range(1..=2usize).min(right - x1);
    }
}

/// Parameters for drawing random page layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PageCorpusConfig {
    pub count: usize,
    pub seed: u64,
    /// Inclusive page height range.
    pub page_h: [usize; 2],
    pub page_w: [usize; 2],
    /// Target fraction of page area covered by planted bands, inclusive range.
    pub blank_fraction: [f64; 2],
    /// Inclusive range for the number of bands per axis (when blank_fraction > 0).
    #[serde(default = "default_bands")]
    pub bands_per_axis: [usize; 2],
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_noise")]
    pub noise_amp: u8,
}

fn default_bands() -> [usize; 2] {
    [1, 3]
}

fn default_density() -> f64 {
    0.85
}

fn default_noise() -> u8 {
    8
}

impl PageCorpusConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.page_h[0] >= 64
            && self.page_h[0] <= self.page_h[1]
            && self.page_w[0] >= 64
            && self.page_w[0] <= self.page_w[1]
            && self.blank_fraction[0] >= 0.0
            && self.blank_fraction[0] <= self.blank_fraction[1]
            && self.blank_fraction[1] <= 0.6
            && self.bands_per_axis[0] <= self.bands_per_axis[1]
            && self.bands_per_axis[1] >= 1;
        if !ok {
            return Err(Error::InvalidParam(format!("invalid page corpus config {self:?}")));
        }
        Ok(())
    }
}

/// Splits `total` into `parts` positive pieces, each at least `min`, with
/// random proportions. Assumes `parts * min <= total`.
fn random_split(total: usize, parts: usize, min: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let spare = total - parts * min;
    let weights: Vec<f64> = (0..parts).map(|_| rng.random_range(0.5..1.5)).collect();
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<usize> = weights
        .iter()
        .map(|w| min + (spare as f64 * w / sum).floor() as usize)
        .collect();
    let assigned: usize = out.iter().sum();
    out[0] += total - assigned;
    out
}

/// Lays out one axis: returns (blank bands, text segments) covering `0..dim`.
fn layout_axis(dim: usize, blank_total: usize, n_bands: usize, rng: &mut ChaCha8Rng) -> (Vec<Band>, Vec<Band>) {
    if blank_total == 0 || n_bands == 0 {
        return (Vec::new(), vec![Band::new(0, dim)]);
    }
    let lead = rng.random_bool(0.5);
    let trail = rng.random_bool(0.5);
    let n_text = (n_bands + 1).saturating_sub(lead as usize + trail as usize).max(1);
    let band_widths = random_split(blank_total, n_bands, blank_total / (2 * n_bands), rng);
    let text_total = dim - blank_total;
    let text_widths = random_split(text_total, n_text, text_total / (2 * n_text), rng);

    // Interleave: [band?] text band text ... [band?]
    let mut seq: Vec<(bool, usize)> = Vec::new();
    let mut bands = band_widths.into_iter();
    let mut texts = text_widths.into_iter();
    if lead && n_bands > n_text - 1 {
        seq.push((true, bands.next().expect("band")));
    }
    while let Some(t) = texts.next() {
        seq.push((false, t));
        if texts.len() > 0 {
            seq.push((true, bands.next().expect("band")));
        }
    }
    for b in bands {
        seq.push((true, b));
    }

    let mut blank = Vec::new();
    let mut text = Vec::new();
    let mut pos = 0;
    for (is_band, len) in seq {
        let b = Band::new(pos, pos + len);
        if is_band {
            blank.push(b);
        } else {
            text.push(b);
        }
        pos += len;
    }
    debug_assert_eq!(pos, dim);
    (blank, text)
}

/// Draws a random page whose non-band rows and columns are all covered by
/// text, so the planted bands are the only redundancy on the page.
pub fn random_page_spec(cfg: &PageCorpusConfig, seed: u64) -> SynthDocSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_d0c5);
    let h = rng.random_range(cfg.page_h[0]..=cfg.page_h[1]);
    let w = rng.random_range(cfg.page_w[0]..=cfg.page_w[1]);
    let f = if cfg.blank_fraction[1] > 0.0 {
        rng.random_range(cfg.blank_fraction[0]..=cfg.blank_fraction[1])
    } else {
        0.0
    };

    // Split the area fraction between axes: (1 - fr)(1 - fc) = 1 - f.
    let share = rng.random_range(0.35..0.65);
    let fr = 1.0 - (1.0 - f).powf(share);
    let fc = 1.0 - (1.0 - f) / (1.0 - fr);
    let row_blank = (fr * h as f64).round() as usize;
    let col_blank = (fc * w as f64).round() as usize;
    let n_row = rng.random_range(cfg.bands_per_axis[0]..=cfg.bands_per_axis[1]);
    let n_col = rng.random_range(cfg.bands_per_axis[0]..=cfg.bands_per_axis[1]);
    let (row_bands, row_text) = layout_axis(h, row_blank, n_row, &mut rng);
    let (col_bands, col_text) = layout_axis(w, col_blank, n_col, &mut rng);

    let mut text_blocks = Vec::new();
    for r in &row_text {
        for c in &col_text {
            text_blocks.push(TextBlock {
                rect: Rect {
                    top: r.start,
                    left: c.start,
                    height: r.len(),
                    width: c.len(),
                },
                density: cfg.density,
            });
        }
    }
    SynthDocSpec {
        page_h: h,
        page_w: w,
        text_blocks,
        blank_row_bands: row_bands,
        blank_col_bands: col_bands,
        noise_amp: cfg.noise_amp,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::{gradient_map, to_grayscale};

    fn spec_with_rows(bands: Vec<Band>) -> SynthDocSpec {
        let mut blocks = Vec::new();
        let mut pos = 0;
        for b in bands.iter().chain(std::iter::once(&Band::new(1000, 1000))) {
            if b.start > pos {
                blocks.push(TextBlock {
                    rect: Rect {
                        top: pos,
                        left: 0,
                        height: b.start - pos,
                        width: 1000,
                    },
                    density: 0.85,
                });
            }
            pos = b.end;
        }
        SynthDocSpec {
            page_h: 1000,
            page_w: 1000,
            text_blocks: blocks,
            blank_row_bands: bands,
            blank_col_bands: vec![],
            noise_amp: 8,
            seed: 3,
        }
    }

    #[test]
    fn truth_echoes_spec() {
        let (_, t) = gen_document(&spec_with_rows(vec![])).unwrap();
        assert!(t.row_bands.is_empty() && t.col_bands.is_empty());
        assert_eq!(t.planted_fraction, 0.0);

        let (img, t) = gen_document(&spec_with_rows(vec![Band::new(400, 600)])).unwrap();
        assert_eq!(t.row_bands.intervals, vec![Band::new(400, 600)]);
        assert!((t.planted_fraction - 0.2).abs() < 1e-12);
        assert_eq!((img.height(), img.width()), (1000, 1000));
    }

    #[test]
    fn conflicting_spec() {
        let mut s = spec_with_rows(vec![Band::new(400, 600)]);
        s.blank_row_bands = vec![Band::new(300, 600)];
        assert!(matches!(gen_document(&s), Err(Error::SpecConflict(_))));
    }

    #[test]
    fn noisy_spec_rejected() {
        let mut s = spec_with_rows(vec![]);
        s.noise_amp = 13;
        assert!(matches!(gen_document(&s), Err(Error::InvalidParam(_))));
    }

    #[test]
    fn deterministic() {
        let s = spec_with_rows(vec![Band::new(100, 180)]);
        assert_eq!(gen_document(&s).unwrap().0, gen_document(&s).unwrap().0);
    }

    #[test]
    fn bands_are_flat_and_text_lines_are_not() {
        let cfg = PageCorpusConfig {
            count: 1,
            seed: 0,
            page_h: [400, 600],
            page_w: [400, 600],
            blank_fraction: [0.3, 0.4],
            bands_per_axis: [1, 3],
            density: 0.85,
            noise_amp: 12,
        };
        for seed in 0..5 {
            let spec = random_page_spec(&cfg, seed);
            let (img, truth) = gen_document(&spec).unwrap();
            let g = gradient_map(&to_grayscale(&img), DEFAULT_NOISE_THRESH).unwrap();
            let text_rows = truth.text_rows();
            let text_cols = truth.text_cols();
            for r in 0..img.height() {
                let sum: f32 = g.row(r).iter().sum();
                if truth.row_bands.covers(r) {
                    assert_eq!(sum, 0.0, "band row {r} seed {seed}");
                } else {
                    assert!(text_rows[r]);
                    assert!(sum > 0.0, "text row {r} seed {seed}");
                }
            }
            for c in 0..img.width() {
                let sum: f32 = (0..img.height()).map(|r| g.get(r, c)).sum();
                if truth.col_bands.covers(c) {
                    assert_eq!(sum, 0.0);
                } else {
                    assert!(text_cols[c]);
                    assert!(sum > 0.0, "text col {c} seed {seed}");
                }
            }
            assert!((0.28..=0.42).contains(&truth.planted_fraction), "{}", truth.planted_fraction);
        }
    }
}
