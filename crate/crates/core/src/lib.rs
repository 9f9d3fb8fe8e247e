//! Slimming for document images and visual-token sequences.
//!
//! * [`aps`] finds and removes low-gradient row and column bands.
//! * [`flexres`] caps total pixel count while preserving aspect ratio.
//! * [`dts`] clusters a token sequence and merges the redundant cluster into
//!   the essential one.
//! * [`synth`] generates pages and token sequences with known redundancy.
//! * [`bench`] measures reduction and latency over corpora.

// `!(x >= 0.0)` rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aps;
pub mod bench;
pub mod dts;
pub mod error;
pub mod flexres;
pub mod imgproc;
pub mod io;
pub mod synth;

pub use aps::{aps, ApsParams, ApsReport, Axis, Band, BandSet, SlimResult};
pub use dts::{dts, AggregationResult, DtsParams, DtsSidecar, TokenMatrix};
pub use error::{Error, Result};
pub use flexres::{flexible_resize, ResizePolicy};
pub use imgproc::{GradientMap, GrayImage, RgbImage};
