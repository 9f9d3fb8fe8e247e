//! Sweeps the profile value threshold over a seeded synthetic corpus and
//! reports, per candidate, band recall and content lines removed.
//!
//! Usage: cargo run --release -p docslim --example calibrate_value_thresh [pages]

use docslim::aps::{denormalize_bands, icr, profile_sums, ApsParams, Axis};
use docslim::bench::score_bands;
use docslim::imgproc::{gradient_map, resize_map, to_grayscale};
use docslim::synth::{gen_document, random_page_spec, PageCorpusConfig};

fn main() -> docslim::Result<()> {
    let pages: usize = std::env::args().nth(1).map_or(300, |s| s.parse().expect("page count"));
    let base = ApsParams::default();
    // The grid starts at the noise floor: after denoising, one surviving
    // pixel already contributes at least that much to its line.
    let floor = base.noise_thresh as f64;
    let grid: Vec<f64> = (0..=28).map(|k| floor * 2f64.powf(k as f64 / 2.0)).collect();

    let configs = [
        PageCorpusConfig {
            count: pages,
            seed: 11,
            page_h: [800, 1400],
            page_w: [800, 1400],
            blank_fraction: [0.3, 0.4],
            bands_per_axis: [1, 3],
            density: 0.85,
            noise_amp: 12,
        },
        // Sparse text stresses the content side.
        PageCorpusConfig {
            count: pages / 3,
            seed: 12,
            page_h: [600, 2400],
            page_w: [600, 2400],
            blank_fraction: [0.1, 0.5],
            bands_per_axis: [1, 4],
            density: 0.4,
            noise_amp: 12,
        },
    ];

    let mut recall_hits = vec![0usize; grid.len()];
    let mut recall_total = vec![0usize; grid.len()];
    let mut content = vec![0usize; grid.len()];
    let mut min_text_profile = f64::INFINITY;
    for cfg in &configs {
        for i in 0..cfg.count {
            let spec = random_page_spec(cfg, cfg.seed.wrapping_add(i as u64));
            let (img, truth) = gen_document(&spec)?;
            let g = gradient_map(&to_grayscale(&img), base.noise_thresh)?;
            let norm = resize_map(&g, base.norm_size, base.norm_size);
            let rp = profile_sums(&norm, Axis::Rows, base.norm_size)?;
            let cp = profile_sums(&norm, Axis::Cols, base.norm_size)?;
            for (k, &tv) in grid.iter().enumerate() {
                let rows = denormalize_bands(&icr(&rp, tv, base.run_thresh), base.norm_size, img.height(), Axis::Rows);
                let cols = denormalize_bands(&icr(&cp, tv, base.run_thresh), base.norm_size, img.width(), Axis::Cols);
                let p = ApsParams { value_thresh: tv, ..base };
                let (recall, _, removed) = score_bands(&truth, &rows, &cols, &p);
                if let Some(r) = recall {
                    let n = truth.row_bands.intervals.len() + truth.col_bands.intervals.len();
                    recall_total[k] += n;
                    recall_hits[k] += (r * n as f64).round() as usize;
                }
                content[k] += removed;
            }
            // Smallest profile over normalized lines lying fully inside text.
            let text_rows = truth.text_rows();
            for (n, &v) in rp.iter().enumerate() {
                let lo = n * img.height() / base.norm_size;
                let hi = ((n + 1) * img.height()).div_ceil(base.norm_size).min(img.height());
                if (lo.saturating_sub(1)..(hi + 1).min(img.height())).all(|r| text_rows[r]) {
                    min_text_profile = min_text_profile.min(v);
                }
            }
        }
    }

    println!("{:>12} {:>8} {:>10}", "t_v", "recall", "content");
    let mut chosen = None;
    for (k, &tv) in grid.iter().enumerate() {
        let recall = recall_hits[k] as f64 / recall_total[k].max(1) as f64;
        println!("{tv:>12.1} {recall:>8.4} {:>10}", content[k]);
        if chosen.is_none() && recall >= 1.0 && content[k] == 0 {
            chosen = Some(tv);
        }
    }
    println!("smallest profile on an interior text line: {min_text_profile:.1}");
    match chosen {
        Some(tv) => println!("smallest t_v with full recall and no content removed: {tv}"),
        None => println!("no candidate reached full recall with no content removed"),
    }
    Ok(())
}
