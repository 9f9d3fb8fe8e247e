//! Scalar reference implementations. Slow on purpose: plain loops, no
//! blocking, no normalization caches. Inputs are assumed valid; these panic
//! rather than report errors.

use crate::dts::{kmeans2, Assignment, ClusterSplit, DtsParams, TokenMatrix};

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut ab = 0.0;
    let mut aa = 0.0;
    let mut bb = 0.0;
    for k in 0..a.len() {
        ab += a[k] * b[k];
        aa += a[k] * a[k];
        bb += b[k] * b[k];
    }
    ab / (aa.sqrt() * bb.sqrt())
}

pub fn oracle_max_similarities(vp: &TokenMatrix) -> Vec<f64> {
    let l = vp.rows();
    let mut out = Vec::with_capacity(l);
    for i in 0..l {
        let mut best = f64::NEG_INFINITY;
        for j in 0..l {
            if j != i {
                best = best.max(cosine(vp.row(i), vp.row(j)));
            }
        }
        out.push(best);
    }
    out
}

/// Returns `(essential, nonessential)` index lists for 0/1 labels.
pub fn oracle_identify(labels: &[usize], max_sims: &[f64], vote_r: usize) -> (Vec<usize>, Vec<usize>) {
    let r = vote_r.min(labels.len());
    let mut taken = vec![false; labels.len()];
    let mut counts = [0usize; 2];
    let mut first = None;
    // Repeated selection of the largest remaining score, lowest index on ties.
    for _ in 0..r {
        let mut arg: Option<usize> = None;
        for t in 0..labels.len() {
            if !taken[t] && arg.is_none_or(|a| max_sims[t] > max_sims[a]) {
                arg = Some(t);
            }
        }
        let t = arg.expect("r <= len");
        taken[t] = true;
        counts[labels[t]] += 1;
        first.get_or_insert(t);
    }
    let non = if counts[0] > counts[1] {
        0
    } else if counts[1] > counts[0] {
        1
    } else {
        labels[first.expect("r >= 1")]
    };
    let ess = (0..labels.len()).filter(|&t| labels[t] != non).collect();
    let nes = (0..labels.len()).filter(|&t| labels[t] == non).collect();
    (ess, nes)
}

/// Target essential index for every nonessential index, in order.
pub fn oracle_assign(vp: &TokenMatrix, essential: &[usize], nonessential: &[usize]) -> Vec<usize> {
    nonessential
        .iter()
        .map(|&j| {
            let mut best = essential[0];
            let mut best_s = cosine(vp.row(j), vp.row(best));
            for &i in &essential[1..] {
                let s = cosine(vp.row(j), vp.row(i));
                if s > best_s {
                    best = i;
                    best_s = s;
                }
            }
            best
        })
        .collect()
}

/// Exp-cosine weighted merge, evaluated entry by entry.
pub fn oracle_aggregate(vp: &TokenMatrix, split: &ClusterSplit, assignment: &Assignment) -> TokenMatrix {
    let d = vp.cols();
    let e = std::f64::consts::E;
    let mut data = Vec::with_capacity(split.essential_idx.len() * d);
    for &i in &split.essential_idx {
        let merged: Vec<usize> = assignment
            .pairs
            .iter()
            .filter(|p| p.essential == i)
            .map(|p| p.nonessential)
            .collect();
        let mut denom = e;
        for &j in &merged {
            denom += cosine(vp.row(i), vp.row(j)).exp();
        }
        for k in 0..d {
            let mut acc = e / denom * vp.row(i)[k];
            for &j in &merged {
                acc += cosine(vp.row(i), vp.row(j)).exp() / denom * vp.row(j)[k];
            }
            data.push(acc);
        }
    }
    TokenMatrix::new(split.essential_idx.len(), d, data).expect("finite output")
}

/// Full slimming pipeline on the reference kernels. Clustering is shared
/// with the optimized path since k-means has no closed form to compare to.
pub fn oracle_dts(v: &TokenMatrix, vp: Option<&TokenMatrix>, params: &DtsParams) -> TokenMatrix {
    let vp = vp.unwrap_or(v);
    let clustering = kmeans2(v, params).expect("valid clustering input");
    let sims = oracle_max_similarities(vp);
    let (ess, non) = oracle_identify(&clustering.labels, &sims, params.vote_r);
    let targets = oracle_assign(vp, &ess, &non);
    let split = ClusterSplit::from_sets(vp.rows(), ess, non.clone()).expect("valid split");
    let assignment = Assignment {
        pairs: non
            .iter()
            .zip(&targets)
            .map(|(&j, &i)| crate::dts::AssignedPair {
                nonessential: j,
                essential: i,
                similarity: cosine(vp.row(j), vp.row(i)),
            })
            .collect(),
    };
    oracle_aggregate(vp, &split, &assignment)
}
