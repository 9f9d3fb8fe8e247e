//! Dynamic token slimming.
//!
//! A token sequence is split into two clusters with k-means on the encoder
//! features. The cluster holding more of the globally most self-similar
//! tokens is taken to be nonessential; each of its tokens is then merged
//! into its most similar essential token with exp-cosine weights.
//!
//! Clustering runs on `v`; voting, assignment and aggregation run on `vp`,
//! which defaults to `v` when no projected features are supplied.

mod aggregate;
mod kmeans;
mod similarity;
mod tokens;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use aggregate::{aggregate, AggregationResult};
pub use kmeans::{kmeans2, Clustering};
pub use similarity::{assign_nonessential, max_similarities, normalized_rows, AssignedPair, Assignment};
pub use tokens::TokenMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_VOTE_R: usize = 50;
pub const DEFAULT_KMEANS_MAX_ITERS: usize = 100;
pub const DEFAULT_KMEANS_TOL: f64 = 1e-9;
pub const DEFAULT_KMEANS_RESTARTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DtsParams {
    /// Number of top max-similarity tokens used for the vote.
    pub vote_r: usize,
    pub kmeans_max_iters: usize,
    /// Stop once no centroid moves farther than this.
    pub kmeans_tol: f64,
    /// Independent k-means++ restarts; the lowest-inertia run wins.
    pub kmeans_restarts: usize,
    pub seed: u64,
}

impl Default for DtsParams {
    fn default() -> Self {
        Self {
            vote_r: DEFAULT_VOTE_R,
            kmeans_max_iters: DEFAULT_KMEANS_MAX_ITERS,
            kmeans_tol: DEFAULT_KMEANS_TOL,
            kmeans_restarts: DEFAULT_KMEANS_RESTARTS,
            seed: 0,
        }
    }
}

impl DtsParams {
    pub fn validate(&self) -> Result<()> {
        if self.vote_r < 1 {
            return Err(Error::InvalidParam("vote_r must be >= 1".into()));
        }
        if self.kmeans_max_iters < 1 {
            return Err(Error::InvalidParam("kmeans_max_iters must be >= 1".into()));
        }
        if !(self.kmeans_tol >= 0.0) {
            return Err(Error::InvalidParam("kmeans_tol must be >= 0".into()));
        }
        if self.kmeans_restarts < 1 {
            return Err(Error::InvalidParam("kmeans_restarts must be >= 1".into()));
        }
        Ok(())
    }
}

/// Partition of token indices into essential and nonessential sets.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSplit {
    pub essential_idx: Vec<usize>,
    pub nonessential_idx: Vec<usize>,
    /// Cluster id (0 or 1) judged nonessential.
    pub nonessential_cluster: usize,
    pub centroids: [Vec<f64>; 2],
    /// Top-R vote members falling in cluster 0 and cluster 1.
    pub vote_counts: (usize, usize),
}

impl ClusterSplit {
    /// Builds a split from explicit index sets (no clustering metadata).
    pub fn from_sets(len: usize, essential_idx: Vec<usize>, nonessential_idx: Vec<usize>) -> Result<Self> {
        let split = Self {
            essential_idx,
            nonessential_idx,
            nonessential_cluster: 1,
            centroids: [Vec::new(), Vec::new()],
            vote_counts: (0, 0),
        };
        split.check(len)?;
        Ok(split)
    }

    /// Both sets sorted, disjoint, covering `0..len`, essential set nonempty.
    pub(crate) fn check(&self, len: usize) -> Result<()> {
        let sorted = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if !sorted(&self.essential_idx) || !sorted(&self.nonessential_idx) {
            return Err(Error::ShapeMismatch("split index lists must be strictly increasing".into()));
        }
        if self.essential_idx.is_empty() {
            return Err(Error::ShapeMismatch("essential set is empty".into()));
        }
        let mut seen = vec![false; len];
        for &i in self.essential_idx.iter().chain(&self.nonessential_idx) {
            if i >= len || std::mem::replace(&mut seen[i], true) {
                return Err(Error::ShapeMismatch(format!(
                    "split index {i} out of range or repeated (len {len})"
                )));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::ShapeMismatch("split does not cover every token".into()));
        }
        Ok(())
    }
}

/// Indices of the `r` largest values, largest first; ties go to the lower index.
pub fn top_r(values: &[f64], r: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(r.min(values.len()));
    idx
}

/// Decides which cluster is nonessential by counting cluster membership
/// among the `min(vote_r, L)` tokens with the highest max-similarity. The
/// cluster with more of them is nonessential; on an exact tie, the cluster
/// holding the single most similar token is.
pub fn identify_essential(clusters: &Clustering, max_sims: &[f64], params: &DtsParams) -> Result<ClusterSplit> {
    let labels = &clusters.labels;
    if labels.len() != max_sims.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels but {} similarity scores",
            labels.len(),
            max_sims.len()
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::ShapeMismatch(format!("label {bad} is not 0 or 1")));
    }
    params.validate()?;
    let top = top_r(max_sims, params.vote_r);
    let num1 = top.iter().filter(|&&t| labels[t] == 0).count();
    let num2 = top.len() - num1;
    let nonessential_cluster = match num1.cmp(&num2) {
        std::cmp::Ordering::Greater => 0,
        std::cmp::Ordering::Less => 1,
        std::cmp::Ordering::Equal => labels[top[0]],
    };
    let (nonessential_idx, essential_idx): (Vec<usize>, Vec<usize>) =
        (0..labels.len()).partition(|&t| labels[t] == nonessential_cluster);
    if essential_idx.is_empty() {
        return Err(Error::ShapeMismatch(
            "clustering left the essential cluster empty".into(),
        ));
    }
    Ok(ClusterSplit {
        essential_idx,
        nonessential_idx,
        nonessential_cluster,
        centroids: clusters.centroids.clone(),
        vote_counts: (num1, num2),
    })
}

/// Every intermediate of one slimming run.
#[derive(Debug, Clone)]
pub struct DtsRun {
    pub clustering: Clustering,
    pub max_sims: Vec<f64>,
    pub split: ClusterSplit,
    pub assignment: Assignment,
    pub result: AggregationResult,
}

pub fn dts_detailed(v: &TokenMatrix, vp: Option<&TokenMatrix>, params: &DtsParams) -> Result<DtsRun> {
    params.validate()?;
    if v.rows() < 2 {
        return Err(Error::TooFewTokens(v.rows()));
    }
    let vp = vp.unwrap_or(v);
    if vp.rows() != v.rows() {
        return Err(Error::ShapeMismatch(format!(
            "projected matrix has {} tokens, encoder matrix has {}",
            vp.rows(),
            v.rows()
        )));
    }
    let clustering = kmeans2(v, params)?;
    let max_sims = max_similarities(vp)?;
    let split = identify_essential(&clustering, &max_sims, params)?;
    let assignment = assign_nonessential(vp, &split)?;
    let result = aggregate(vp, &split, &assignment)?;
    Ok(DtsRun {
        clustering,
        max_sims,
        split,
        assignment,
        result,
    })
}

pub fn dts(v: &TokenMatrix, vp: Option<&TokenMatrix>, params: &DtsParams) -> Result<AggregationResult> {
    dts_detailed(v, vp, params).map(|run| run.result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarWeights {
    pub essential: BTreeMap<usize, f64>,
    pub nonessential: BTreeMap<usize, f64>,
}

/// JSON written next to the compressed token file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtsSidecar {
    pub kept_idx: Vec<usize>,
    pub assignment: BTreeMap<usize, usize>,
    pub weights: SidecarWeights,
    #[serde(rename = "L_in")]
    pub l_in: usize,
    #[serde(rename = "L_out")]
    pub l_out: usize,
    pub reduction: f64,
    pub seed: u64,
}

impl DtsSidecar {
    pub fn new(result: &AggregationResult, seed: u64) -> Self {
        Self {
            kept_idx: result.kept_idx.clone(),
            assignment: result.assignment.clone(),
            weights: SidecarWeights {
                essential: result.essential_weights.clone(),
                nonessential: result.nonessential_weights.clone(),
            },
            l_in: result.input_len(),
            l_out: result.kept_idx.len(),
            reduction: result.reduction(),
            seed,
        }
    }
}
