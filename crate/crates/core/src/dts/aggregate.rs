use std::collections::BTreeMap;

use super::similarity::{normalized_rows, Assignment};
use super::tokens::{dot, TokenMatrix};
use super::ClusterSplit;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    /// One row per essential token, in original sequence order.
    pub tokens: TokenMatrix,
    /// Original indices of the essential tokens, strictly increasing.
    pub kept_idx: Vec<usize>,
    /// Nonessential index -> essential index it was merged into.
    pub assignment: BTreeMap<usize, usize>,
    /// Weight of each merged nonessential token.
    pub nonessential_weights: BTreeMap<usize, f64>,
    /// Self-weight of each essential token that received merges. Essential
    /// tokens absent here passed through unchanged.
    pub essential_weights: BTreeMap<usize, f64>,
}

impl AggregationResult {
    pub fn input_len(&self) -> usize {
        self.kept_idx.len() + self.assignment.len()
    }

    pub fn reduction(&self) -> f64 {
        1.0 - self.kept_idx.len() as f64 / self.input_len() as f64
    }
}

/// Similarity-weighted merge of nonessential tokens into essential ones.
///
/// For essential token `i` with merged set `J`, with `c_ij` the cosine
/// similarity and `e = exp(1)`:
///
/// ```text
/// d   = sum_{j in J} exp(c_ij) + e
/// w_j = exp(c_ij) / d        w_i = e / d
/// out = w_i * x_i + sum_{j in J} w_j * x_j
/// ```
///
/// Essential tokens with an empty `J` are copied verbatim.
pub fn aggregate(vp: &TokenMatrix, split: &ClusterSplit, assignment: &Assignment) -> Result<AggregationResult> {
    split.check(vp.rows())?;
    if assignment.pairs.len() != split.nonessential_idx.len()
        || assignment
            .pairs
            .iter()
            .zip(&split.nonessential_idx)
            .any(|(p, &j)| p.nonessential != j)
    {
        return Err(Error::ShapeMismatch(
            "assignment does not cover the nonessential set".into(),
        ));
    }

    let slot: BTreeMap<usize, usize> = split
        .essential_idx
        .iter()
        .enumerate()
        .map(|(k, &i)| (i, k))
        .collect();
    let mut merged: Vec<Vec<usize>> = vec![Vec::new(); split.essential_idx.len()];
    for p in &assignment.pairs {
        let k = *slot.get(&p.essential).ok_or_else(|| {
            Error::ShapeMismatch(format!(
                "token {} assigned to non-essential token {}",
                p.nonessential, p.essential
            ))
        })?;
        merged[k].push(p.nonessential);
    }

    let d = vp.cols();
    let unit = normalized_rows(vp)?;
    let unit_row = |i: usize| &unit[i * d..(i + 1) * d];

    let mut out = Vec::with_capacity(split.essential_idx.len() * d);
    let mut nonessential_weights = BTreeMap::new();
    let mut essential_weights = BTreeMap::new();
    for (k, &i) in split.essential_idx.iter().enumerate() {
        let js = &merged[k];
        if js.is_empty() {
            out.extend_from_slice(vp.row(i));
            continue;
        }
        let exps: Vec<f64> = js.iter().map(|&j| dot(unit_row(i), unit_row(j)).exp()).collect();
        let denom = exps.iter().sum::<f64>() + std::f64::consts::E;
        let w_i = std::f64::consts::E / denom;
        essential_weights.insert(i, w_i);
        let mut acc: Vec<f64> = vp.row(i).iter().map(|v| w_i * v).collect();
        for (&j, &ex) in js.iter().zip(&exps) {
            let w_j = ex / denom;
            nonessential_weights.insert(j, w_j);
            for (a, &x) in acc.iter_mut().zip(vp.row(j)) {
                *a += w_j * x;
            }
        }
        out.extend(acc);
    }

    Ok(AggregationResult {
        tokens: TokenMatrix::new(split.essential_idx.len(), d, out)?,
        kept_idx: split.essential_idx.clone(),
        assignment: assignment.pairs.iter().map(|p| (p.nonessential, p.essential)).collect(),
        nonessential_weights,
        essential_weights,
    })
}
