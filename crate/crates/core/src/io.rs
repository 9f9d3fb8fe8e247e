//! File formats: PNG images, DSTK token matrices, CSV token matrices, JSON.
//!
//! DSTK layout (all little-endian):
//!
//! ```text
//! offset 0   b"DSTK"
//! offset 4   version  u32   (currently 1)
//! offset 8   L        u32   token count
//! offset 12  D        u32   token dimension
//! offset 16  L*D      f32   row-major values
//! ```

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::dts::TokenMatrix;
use crate::error::{Error, Result};
use crate::imgproc::RgbImage;

pub const DSTK_MAGIC: &[u8; 4] = b"DSTK";
pub const DSTK_VERSION: u32 = 1;
pub const DSTK_HEADER_LEN: usize = 16;

/// Decodes any 8-bit PNG (gray, gray+alpha, RGB, RGBA) to RGB.
pub fn load_rgb(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = img.into_rgb8();
    let (w, h) = rgb.dimensions();
    RgbImage::new(h as usize, w as usize, rgb.into_raw())
}

pub fn save_rgb(img: &RgbImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::Rgb8,
        image::ImageFormat::Png,
    )
    .map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

pub fn encode_dstk(m: &TokenMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(DSTK_HEADER_LEN + 4 * m.data().len());
    buf.extend_from_slice(DSTK_MAGIC);
    buf.extend_from_slice(&DSTK_VERSION.to_le_bytes());
    buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u32).to_le_bytes());
    for &v in m.data() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    buf
}

pub fn decode_dstk(bytes: &[u8]) -> Result<TokenMatrix> {
    let bad = |msg: String| Error::MalformedTokens(msg);
    if bytes.len() < DSTK_HEADER_LEN {
        return Err(bad(format!(
            "expected at least {DSTK_HEADER_LEN} header bytes, got {}",
            bytes.len()
        )));
    }
    if &bytes[0..4] != DSTK_MAGIC {
        return Err(bad(format!("bad magic {:?}, expected \"DSTK\"", &bytes[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let version = u32_at(4);
    if version != DSTK_VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (l, d) = (u32_at(8) as usize, u32_at(12) as usize);
    if l == 0 || d == 0 {
        return Err(bad(format!("shape {l}x{d} is empty")));
    }
    let expected = (l as u64 * d as u64 * 4 + DSTK_HEADER_LEN as u64) as usize;
    if bytes.len() != expected {
        return Err(bad(format!(
            "shape {l}x{d} needs {expected} bytes, file has {} bytes",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[DSTK_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    TokenMatrix::new(l, d, data).map_err(|e| bad(e.to_string()))
}

pub fn write_dstk(m: &TokenMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dstk(m)).map_err(|e| Error::io(path, e))
}

pub fn read_dstk(path: impl AsRef<Path>) -> Result<TokenMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dstk(&bytes)
}

/// One token per line, values separated by commas.
pub fn read_csv_tokens(path: impl AsRef<Path>) -> Result<TokenMatrix> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv_tokens(&text)
}

pub fn parse_csv_tokens(text: &[u8]) -> Result<TokenMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedTokens(format!("csv line {}: {e}", line + 1)))?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::MalformedTokens(format!("csv line {}: {e}", line + 1)))?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::MalformedTokens("csv contains no tokens".into()));
    }
    TokenMatrix::from_rows(&rows).map_err(|e| Error::MalformedTokens(e.to_string()))
}

pub fn write_csv_tokens(m: &TokenMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads DSTK or CSV, choosing by magic bytes.
pub fn read_tokens(path: impl AsRef<Path>) -> Result<TokenMatrix> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv && !bytes.starts_with(DSTK_MAGIC) {
        parse_csv_tokens(&bytes)
    } else {
        decode_dstk(&bytes)
    }
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&text)?)
}
