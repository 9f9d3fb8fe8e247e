use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dts::TokenMatrix;
use crate::error::{Error, Result};

/// Norm of the shared base vector of the redundant tokens.
const REDUNDANT_NORM: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTokenSpec {
    pub n_redundant: usize,
    pub n_content: usize,
    pub dim: usize,
    #[serde(default)]
    pub duplicate_jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Which positions hold planted redundant copies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenTruth {
    pub redundant: Vec<bool>,
    pub redundant_idx: Vec<usize>,
    pub content_idx: Vec<usize>,
}

impl SynthTokenSpec {
    pub fn len(&self) -> usize {
        self.n_redundant + self.n_content
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.len() < 2 {
            return Err(Error::InvalidParam(format!(
                "need at least 2 tokens, got {}",
                self.len()
            )));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParam("dim must be >= 1".into()));
        }
        if !(self.duplicate_jitter >= 0.0 && self.duplicate_jitter.is_finite()) {
            return Err(Error::InvalidParam(format!(
                "duplicate_jitter {} must be finite and >= 0",
                self.duplicate_jitter
            )));
        }
        if self.dim < self.n_content {
            return Err(Error::DimTooSmall {
                dim: self.dim,
                n_content: self.n_content,
            });
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Random orthonormal rows by modified Gram-Schmidt; redraws a row in the
/// (practically impossible) case it collapses onto the span of the others.
fn orthonormal_rows(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n);
    while basis.len() < n {
        let mut v = gaussian(rng, dim);
        for b in &basis {
            let p: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let nv = norm(&v);
        if nv > 1e-6 {
            v.iter_mut().for_each(|x| *x /= nv);
            basis.push(v);
        }
    }
    basis
}

/// Builds a sequence with `n_redundant` jittered copies of one base vector
/// and `n_content` orthonormal tokens, at shuffled positions.
pub fn gen_tokens(spec: &SynthTokenSpec) -> Result<(TokenMatrix, TokenTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;

    let mut base = gaussian(&mut rng, d);
    let nb = norm(&base);
    base.iter_mut().for_each(|x| *x *= REDUNDANT_NORM / nb);

    let mut rows: Vec<(bool, Vec<f64>)> = Vec::with_capacity(spec.len());
    for _ in 0..spec.n_redundant {
        let mut v = base.clone();
        if spec.duplicate_jitter > 0.0 {
            for x in v.iter_mut() {
                *x += spec.duplicate_jitter * rng.sample::<f64, _>(StandardNormal);
            }
        }
        rows.push((true, v));
    }
    rows.extend(orthonormal_rows(&mut rng, spec.n_content, d).into_iter().map(|v| (false, v)));
    rows.shuffle(&mut rng);

    let redundant: Vec<bool> = rows.iter().map(|(r, _)| *r).collect();
    let (redundant_idx, content_idx): (Vec<usize>, Vec<usize>) = (0..rows.len()).partition(|&i| redundant[i]);
    let data: Vec<f64> = rows.into_iter().flat_map(|(_, v)| v).collect();
    Ok((
        TokenMatrix::new(redundant.len(), d, data)?,
        TokenTruth {
            redundant,
            redundant_idx,
            content_idx,
        },
    ))
}

/// Parameters for drawing random token instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenCorpusConfig {
    pub count: usize,
    pub seed: u64,
    /// Inclusive range for the number of redundant tokens.
    pub n_redundant: [usize; 2],
    pub n_content: [usize; 2],
    /// Token dimension; raised to `n_content` when smaller.
    pub dim: usize,
    #[serde(default = "default_jitter")]
    pub duplicate_jitter: f64,
}

fn default_jitter() -> f64 {
    0.02
}

impl TokenCorpusConfig {
    /// The `i`-th instance spec. Deterministic in `(seed, i)`.
    pub fn spec(&self, i: usize) -> SynthTokenSpec {
        let seed = self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70c3_e115);
        let lo_hi = |r: [usize; 2], rng: &mut ChaCha8Rng| rng.random_range(r[0]..=r[1].max(r[0]));
        let n_redundant = lo_hi(self.n_redundant, &mut rng);
        let n_content = lo_hi(self.n_content, &mut rng);
        SynthTokenSpec {
            n_redundant,
            n_content,
            dim: self.dim.max(n_content),
            duplicate_jitter: self.duplicate_jitter,
            seed,
        }
    }
}
