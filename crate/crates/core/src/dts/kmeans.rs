//! Two-center Lloyd k-means with greedy k-means++ seeding.
//!
//! Points are visited in a canonical order (lexicographic on their values)
//! so that seeding, tie-breaking and centroid sums do not depend on where a
//! token sits in the input sequence. Labels are mapped back afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::tokens::{sq_dist, TokenMatrix};
use super::DtsParams;
use crate::error::{Error, Result};

/// Candidates drawn per seeding step (greedy k-means++ uses `2 + ln k`).
const LOCAL_TRIALS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Cluster id (0 or 1) per input token.
    pub labels: Vec<usize>,
    /// Two centroids, each of length `D`.
    pub centroids: [Vec<f64>; 2],
    /// Inertia after each assignment step of the selected restart.
    pub inertia_trace: Vec<f64>,
    /// Final inertia against `centroids`.
    pub inertia: f64,
    pub iterations: usize,
    /// Restart that produced this clustering.
    pub restart: usize,
}

impl Clustering {
    pub fn cluster_sizes(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }
}

/// Row indices sorted by row contents.
fn canonical_order(v: &TokenMatrix) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.rows()).collect();
    idx.sort_by(|&a, &b| {
        v.row(a)
            .iter()
            .zip(v.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Points copied contiguously in canonical order.
struct Points {
    data: Vec<f64>,
    n: usize,
    dim: usize,
}

impl Points {
    fn new(m: &TokenMatrix, order: &[usize]) -> Self {
        let mut data = Vec::with_capacity(m.data().len());
        for &i in order {
            data.extend_from_slice(m.row(i));
        }
        Self {
            data,
            n: order.len(),
            dim: m.cols(),
        }
    }

    fn point(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }
}

/// Squared distances from `p` to both centroids. Same lane layout and
/// reduction order as `sq_dist`, so the values are identical to it.
#[inline(always)]
fn dist2_body(p: &[f64], c0: &[f64], c1: &[f64]) -> (f64, f64) {
    let mut a0 = [0f64; 4];
    let mut a1 = [0f64; 4];
    let chunks = p.len() / 4;
    for k in 0..chunks {
        let (pc, x0, x1) = (&p[4 * k..4 * k + 4], &c0[4 * k..4 * k + 4], &c1[4 * k..4 * k + 4]);
        for l in 0..4 {
            let d = pc[l] - x0[l];
            a0[l] += d * d;
            let d = pc[l] - x1[l];
            a1[l] += d * d;
        }
    }
    finish(p, c0, c1, chunks, a0, a1)
}

/// `dist2_body` for two points at once; four independent chains hide the
/// add latency.
#[inline(always)]
fn dist2_pair(p: &[f64], q: &[f64], c0: &[f64], c1: &[f64]) -> ((f64, f64), (f64, f64)) {
    let (mut a0, mut a1, mut b0, mut b1) = ([0f64; 4], [0f64; 4], [0f64; 4], [0f64; 4]);
    let chunks = p.len() / 4;
    for k in 0..chunks {
        let r = 4 * k..4 * k + 4;
        let (pc, qc, x0, x1) = (&p[r.clone()], &q[r.clone()], &c0[r.clone()], &c1[r]);
        for l in 0..4 {
            let d = pc[l] - x0[l];
            a0[l] += d * d;
            let d = pc[l] - x1[l];
            a1[l] += d * d;
            let d = qc[l] - x0[l];
            b0[l] += d * d;
            let d = qc[l] - x1[l];
            b1[l] += d * d;
        }
    }
    (finish(p, c0, c1, chunks, a0, a1), finish(q, c0, c1, chunks, b0, b1))
}

#[inline(always)]
fn finish(p: &[f64], c0: &[f64], c1: &[f64], chunks: usize, a0: [f64; 4], a1: [f64; 4]) -> (f64, f64) {
    let (mut t0, mut t1) = (0.0, 0.0);
    for k in 4 * chunks..p.len() {
        let d = p[k] - c0[k];
        t0 += d * d;
        let d = p[k] - c1[k];
        t1 += d * d;
    }
    ((a0[0] + a0[1]) + (a0[2] + a0[3]) + t0, (a1[0] + a1[1]) + (a1[2] + a1[3]) + t1)
}

#[inline(always)]
fn pick(d0: f64, d1: f64) -> (usize, f64) {
    // Ties go to the lower centroid index.
    if d1 < d0 {
        (1, d1)
    } else {
        (0, d0)
    }
}

#[inline(always)]
fn add_into(sum: &mut [f64], p: &[f64]) {
    for (s, &x) in sum.iter_mut().zip(p) {
        *s += x;
    }
}

type PairKernel = fn(&[f64], &[f64], &[f64], &[f64]) -> ((f64, f64), (f64, f64));

/// Labels every point with its nearest centroid and records the distance.
/// With `sums`, also accumulates each cluster's coordinate sum in point order.
#[inline(always)]
fn assign_body(
    pts: &Points,
    centroids: &[Vec<f64>; 2],
    labels: &mut [usize],
    dists: &mut [f64],
    mut sums: Option<&mut [Vec<f64>; 2]>,
    pair: PairKernel,
) {
    let (c0, c1) = (&centroids[0][..], &centroids[1][..]);
    let mut k = 0;
    while k < pts.n {
        let p = pts.point(k);
        let ds = if k + 1 < pts.n {
            let (dp, dq) = pair(p, pts.point(k + 1), c0, c1);
            [Some(dp), Some(dq)]
        } else {
            [Some(dist2_body(p, c0, c1)), None]
        };
        for (j, dd) in ds.into_iter().enumerate() {
            let Some((d0, d1)) = dd else { break };
            let (l, d) = pick(d0, d1);
            labels[k + j] = l;
            dists[k + j] = d;
            if let Some(s) = sums.as_deref_mut() {
                add_into(&mut s[l], pts.point(k + j));
            }
        }
        k += 2;
    }
}

#[cfg(target_arch = "x86_64")]
mod avx2 {
    use std::arch::x86_64::*;

    use super::finish;

    fn lanes(v: __m256d) -> [f64; 4] {
        let mut out = [0f64; 4];
        // SAFETY: `out` holds four f64; unaligned store.
        unsafe { _mm256_storeu_pd(out.as_mut_ptr(), v) };
        out
    }

    /// Two points against two centroids, one 4-lane accumulator per pair.
    /// Lane `l` sums coordinates `l, l + 4, ...` exactly like the scalar
    /// kernel, and there is no FMA, so the results are bit-identical.
    #[target_feature(enable = "avx2")]
    unsafe fn pair_impl(p: &[f64], q: &[f64], c0: &[f64], c1: &[f64]) -> ((f64, f64), (f64, f64)) {
        let n = p.len();
        assert!(q.len() == n && c0.len() == n && c1.len() == n);
        let chunks = n / 4;
        let (mut a0, mut a1, mut b0, mut b1) = (
            _mm256_setzero_pd(),
            _mm256_setzero_pd(),
            _mm256_setzero_pd(),
            _mm256_setzero_pd(),
        );
        for k in 0..chunks {
            let o = 4 * k;
            // SAFETY: o + 4 <= n for every slice, checked by the assert.
            let (vp, vq, x0, x1) = unsafe {
                (
                    _mm256_loadu_pd(p.as_ptr().add(o)),
                    _mm256_loadu_pd(q.as_ptr().add(o)),
                    _mm256_loadu_pd(c0.as_ptr().add(o)),
                    _mm256_loadu_pd(c1.as_ptr().add(o)),
                )
            };
            let d = _mm256_sub_pd(vp, x0);
            a0 = _mm256_add_pd(a0, _mm256_mul_pd(d, d));
            let d = _mm256_sub_pd(vp, x1);
            a1 = _mm256_add_pd(a1, _mm256_mul_pd(d, d));
            let d = _mm256_sub_pd(vq, x0);
            b0 = _mm256_add_pd(b0, _mm256_mul_pd(d, d));
            let d = _mm256_sub_pd(vq, x1);
            b1 = _mm256_add_pd(b1, _mm256_mul_pd(d, d));
        }
        (
            finish(p, c0, c1, chunks, lanes(a0), lanes(a1)),
            finish(q, c0, c1, chunks, lanes(b0), lanes(b1)),
        )
    }

    pub(super) fn pair(p: &[f64], q: &[f64], c0: &[f64], c1: &[f64]) -> ((f64, f64), (f64, f64)) {
        // SAFETY: only handed out by `pair_kernel` after AVX2 was detected.
        unsafe { pair_impl(p, q, c0, c1) }
    }
}

fn pair_kernel() -> PairKernel {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        return avx2::pair;
    }
    dist2_pair
}

fn assign_pass(pts: &Points, centroids: &[Vec<f64>; 2], labels: &mut [usize], dists: &mut [f64], sums: Option<&mut [Vec<f64>; 2]>) {
    assign_body(pts, centroids, labels, dists, sums, pair_kernel())
}

fn seed_centroids(pts: &Points, rng: &mut ChaCha8Rng) -> [Vec<f64>; 2] {
    let n = pts.n;
    let first = rng.random_range(0..n);
    let c0 = pts.point(first).to_vec();
    let d2: Vec<f64> = (0..n).map(|k| sq_dist(pts.point(k), &c0)).collect();
    let total: f64 = d2.iter().sum();

    let second = if total > 0.0 {
        let draw = |rng: &mut ChaCha8Rng| {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            for (k, &w) in d2.iter().enumerate() {
                acc += w;
                if acc > target && w > 0.0 {
                    return k;
                }
            }
            // Rounding at the top of the range: last point with positive weight.
            d2.iter().rposition(|&w| w > 0.0).unwrap_or(0)
        };
        let mut best = (f64::INFINITY, 0usize);
        for _ in 0..LOCAL_TRIALS {
            let cand = draw(rng);
            let cp = pts.point(cand);
            let potential: f64 = (0..n).map(|k| d2[k].min(sq_dist(pts.point(k), cp))).sum();
            if potential < best.0 {
                best = (potential, cand);
            }
        }
        best.1
    } else {
        // Every point coincides with the first center; any other point will do.
        let other = rng.random_range(0..n - 1);
        if other >= first {
            other + 1
        } else {
            other
        }
    };
    [c0, pts.point(second).to_vec()]
}

/// Assigns every point to its nearest centroid, then repairs an empty
/// cluster by moving the point farthest from its centroid into it.
/// Returns the inertia of the resulting labelling; with `sums`, also leaves
/// the per-cluster coordinate sums of that labelling there.
fn assign(
    pts: &Points,
    centroids: &mut [Vec<f64>; 2],
    labels: &mut [usize],
    dists: &mut [f64],
    mut sums: Option<&mut [Vec<f64>; 2]>,
) -> f64 {
    let n = pts.n;
    if let Some(s) = sums.as_deref_mut() {
        s.iter_mut().for_each(|v| v.fill(0.0));
    }
    assign_pass(pts, centroids, labels, dists, sums.as_deref_mut());
    let ones = labels.iter().filter(|&&l| l == 1).count();
    let empty = match ones {
        0 => Some(1),
        o if o == n => Some(0),
        _ => None,
    };
    if let Some(e) = empty {
        let mut far = 0;
        for k in 1..n {
            if dists[k] > dists[far] {
                far = k;
            }
        }
        centroids[e] = pts.point(far).to_vec();
        // The moved centroid may now be nearer for other points too.
        assign_pass(pts, centroids, labels, dists, None);
        labels[far] = e;
        dists[far] = 0.0;
        if let Some(s) = sums {
            s.iter_mut().for_each(|v| v.fill(0.0));
            for (k, &l) in labels.iter().enumerate() {
                add_into(&mut s[l], pts.point(k));
            }
        }
    }
    dists.iter().sum()
}

struct Run {
    labels: Vec<usize>,
    centroids: [Vec<f64>; 2],
    trace: Vec<f64>,
    inertia: f64,
    iterations: usize,
}

fn lloyd(pts: &Points, params: &DtsParams, rng: &mut ChaCha8Rng) -> Run {
    let n = pts.n;
    let mut centroids = seed_centroids(pts, rng);
    let mut labels = vec![0usize; n];
    let mut dists = vec![0f64; n];
    let mut sums = [vec![0f64; pts.dim], vec![0f64; pts.dim]];
    let mut trace = Vec::new();
    let mut iterations = 0;
    for _ in 0..params.kmeans_max_iters {
        iterations += 1;
        trace.push(assign(pts, &mut centroids, &mut labels, &mut dists, Some(&mut sums)));
        let ones = labels.iter().filter(|&&l| l == 1).count();
        let counts = [n - ones, ones];
        let mut shift = 0f64;
        for c in 0..2 {
            let div = counts[c].max(1) as f64;
            sums[c].iter_mut().for_each(|v| *v /= div);
            shift = shift.max(sq_dist(&sums[c], &centroids[c]).sqrt());
            std::mem::swap(&mut sums[c], &mut centroids[c]);
        }
        if shift <= params.kmeans_tol {
            break;
        }
    }
    let inertia = assign(pts, &mut centroids, &mut labels, &mut dists, None);
    Run {
        labels,
        centroids,
        trace,
        inertia,
        iterations,
    }
}

/// Two-cluster k-means over the rows of `v`.
///
/// Runs `params.kmeans_restarts` seeded restarts and keeps the one with the
/// lowest final inertia (earliest restart on ties).
pub fn kmeans2(v: &TokenMatrix, params: &DtsParams) -> Result<Clustering> {
    if v.rows() < 2 {
        return Err(Error::TooFewTokens(v.rows()));
    }
    params.validate()?;
    let order = canonical_order(v);
    let pts = Points::new(v, &order);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut best: Option<(usize, Run)> = None;
    for restart in 0..params.kmeans_restarts {
        let run = lloyd(&pts, params, &mut rng);
        if best.as_ref().is_none_or(|(_, b)| run.inertia < b.inertia) {
            best = Some((restart, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");

    let mut labels = vec![0usize; v.rows()];
    for (k, &orig) in order.iter().enumerate() {
        labels[orig] = run.labels[k];
    }
    Ok(Clustering {
        labels,
        centroids: run.centroids,
        inertia_trace: run.trace,
        inertia: run.inertia,
        iterations: run.iterations,
        restart,
    })
}
