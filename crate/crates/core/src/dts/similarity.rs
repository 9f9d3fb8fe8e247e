//! Cosine-similarity kernels: per-token maximum similarity to any other
//! token, and nearest-essential assignment for nonessential tokens.
//!
//! Both work on unit-normalized rows and evaluate dot products in row
//! blocks through a dense GEMM, so memory stays at `BLOCK x L` regardless of
//! sequence length.

use super::tokens::{dot, TokenMatrix};
use super::ClusterSplit;
use crate::error::{Error, Result};

const BLOCK: usize = 256;

/// Rows scaled to unit Euclidean norm.
pub fn normalized_rows(m: &TokenMatrix) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(m.data().len());
    for (i, row) in m.iter_rows().enumerate() {
        let norm = dot(row, row).sqrt();
        if !(norm > 0.0) {
            return Err(Error::ZeroNormToken(i));
        }
        out.extend(row.iter().map(|v| v / norm));
    }
    Ok(out)
}

/// `c[i][j] = a[i] . b[j]` for row-major `a` (m x k) and `b` (n x k).
fn gemm_abt(a: &[f64], m: usize, b: &[f64], n: usize, k: usize, c: &mut [f64]) {
    debug_assert!(a.len() >= m * k && b.len() >= n * k && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    // SAFETY: the strides describe `a` as m x k row-major, `b^T` as k x n
    // (column-major view of b), and `c` as m x n row-major; the asserts above
    // bound every access.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// For each token `t`, the maximum cosine similarity to any other token.
pub fn max_similarities(vp: &TokenMatrix) -> Result<Vec<f64>> {
    let l = vp.rows();
    if l < 2 {
        return Err(Error::TooFewTokens(l));
    }
    let d = vp.cols();
    let u = normalized_rows(vp)?;
    let mut best = vec![f64::NEG_INFINITY; l];
    let mut g = vec![0f64; BLOCK * l];
    for a0 in (0..l).step_by(BLOCK) {
        let a1 = (a0 + BLOCK).min(l);
        let (m, n) = (a1 - a0, l - a0);
        gemm_abt(&u[a0 * d..a1 * d], m, &u[a0 * d..], n, d, &mut g);
        // Upper triangle only: each unordered pair is read from one entry,
        // which keeps the result exactly symmetric.
        for bi in 0..m {
            let i = a0 + bi;
            let row = &g[bi * n..(bi + 1) * n];
            let mut row_max = best[i];
            for (off, &s) in row.iter().enumerate().skip(bi + 1) {
                let j = a0 + off;
                if s > row_max {
                    row_max = s;
                }
                if s > best[j] {
                    best[j] = s;
                }
            }
            best[i] = row_max;
        }
    }
    Ok(best)
}

/// One nonessential token and the essential token it merges into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssignedPair {
    pub nonessential: usize,
    pub essential: usize,
    /// Cosine similarity between the two.
    pub similarity: f64,
}

/// Nonessential-to-essential mapping, sorted by nonessential index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pairs: Vec<AssignedPair>,
}

impl Assignment {
    pub fn target_of(&self, nonessential: usize) -> Option<usize> {
        self.pairs
            .binary_search_by_key(&nonessential, |p| p.nonessential)
            .ok()
            .map(|k| self.pairs[k].essential)
    }
}

/// Maps every nonessential token to its most cosine-similar essential token
/// (lowest essential index on ties).
pub fn assign_nonessential(vp: &TokenMatrix, split: &ClusterSplit) -> Result<Assignment> {
    split.check(vp.rows())?;
    let d = vp.cols();
    let ess = &split.essential_idx;
    let non = &split.nonessential_idx;
    if non.is_empty() {
        return Ok(Assignment::default());
    }
    let gather = |idx: &[usize]| -> Result<Vec<f64>> {
        normalized_rows(&vp.select_rows(idx)?).map_err(|e| match e {
            Error::ZeroNormToken(k) => Error::ZeroNormToken(idx[k]),
            other => other,
        })
    };
    let ue = gather(ess)?;
    let un = gather(non)?;

    let n_e = ess.len();
    let mut pairs = Vec::with_capacity(non.len());
    let mut g = vec![0f64; BLOCK * n_e];
    for b0 in (0..non.len()).step_by(BLOCK) {
        let b1 = (b0 + BLOCK).min(non.len());
        gemm_abt(&un[b0 * d..b1 * d], b1 - b0, &ue, n_e, d, &mut g);
        for bj in 0..b1 - b0 {
            let row = &g[bj * n_e..(bj + 1) * n_e];
            let mut arg = 0;
            for (k, &s) in row.iter().enumerate().skip(1) {
                if s > row[arg] {
                    arg = k;
                }
            }
            pairs.push(AssignedPair {
                nonessential: non[b0 + bj],
                essential: ess[arg],
                similarity: row[arg],
            });
        }
    }
    Ok(Assignment { pairs })
}
