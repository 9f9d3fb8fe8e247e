//! Fixed inputs for the criterion benches.

use docslim::aps::Band;
use docslim::dts::TokenMatrix;
use docslim::imgproc::RgbImage;
use docslim::synth::{gen_document, Rect, SynthDocSpec, TextBlock};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Standard-normal token matrix.
pub fn gaussian_tokens(l: usize, d: usize, seed: u64) -> TokenMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..l * d).map(|_| rng.sample(StandardNormal)).collect();
    TokenMatrix::new(l, d, data).expect("valid shape")
}

/// A `side x side` page: two text columns with a blank band between
/// them and a blank strip across the middle.
pub fn page(side: usize) -> RgbImage {
    let q = side / 8;
    let block = |top, left, height, width| TextBlock {
        rect: Rect { top, left, height, width },
        density: 0.85,
    };
    let spec = SynthDocSpec {
        page_h: side,
        page_w: side,
        text_blocks: vec![
            block(q, q, 2 * q, 2 * q),
            block(q, 5 * q, 2 * q, 2 * q),
            block(5 * q, q, 2 * q, 6 * q),
        ],
        blank_row_bands: vec![Band::new(3 * q + q / 4, 5 * q - q / 4)],
        blank_col_bands: vec![],
        noise_amp: 8,
        seed: 1,
    };
    gen_document(&spec).expect("valid page").0
}
