//! Statistics over recorded ensembles.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::knn::KdTree;
use crate::sampler::TrajectoryEnsemble;

/// One-sided 1% critical value of the standard normal.
pub const Z_ONE_SIDED_1PCT: f64 = 2.326_347_874_040_841;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    /// Unbiased (`n - 1`); zero for a single sample.
    pub variance: f64,
    pub sem: f64,
    pub n: usize,
}

pub fn moments(xs: &[f64]) -> Result<Moments> {
    if xs.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Ok(Moments {
        mean,
        variance,
        sem: (variance / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub sem: Vec<f64>,
    pub n: usize,
}

impl SummaryStats {
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * self.times.first().copied().unwrap_or(1.0).max(1.0);
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }
}

/// Column statistics of a row-major `n_rows x times.len()` matrix.
fn column_stats(times: &[f64], m: &[f64], n_rows: usize) -> Result<SummaryStats> {
    if n_rows == 0 || times.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let nt = times.len();
    let mut mean = vec![0.0; nt];
    for row in m.chunks_exact(nt) {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= n_rows as f64);
    let mut ss = vec![0.0; nt];
    for row in m.chunks_exact(nt) {
        for ((a, v), mu) in ss.iter_mut().zip(row).zip(&mean) {
            *a += (v - mu) * (v - mu);
        }
    }
    let variance: Vec<f64> = if n_rows > 1 {
        ss.iter().map(|s| s / (n_rows - 1) as f64).collect()
    } else {
        vec![0.0; nt]
    };
    let sem = variance.iter().map(|v| (v / n_rows as f64).sqrt()).collect();
    Ok(SummaryStats {
        times: times.to_vec(),
        mean,
        variance,
        sem,
        n: n_rows,
    })
}

/// Mean, unbiased variance and standard error of `q` at each recorded time.
pub fn ensemble_stats(e: &TrajectoryEnsemble) -> Result<SummaryStats> {
    column_stats(&e.times, &e.q, e.n_traj)
}

/// The same statistics for the score-difference norm `|S(x,c) - S(x)|`.
pub fn score_diff_curve(e: &TrajectoryEnsemble) -> Result<SummaryStats> {
    let sd = e.score_diff.as_ref().ok_or(Error::MissingScoreDiff)?;
    column_stats(&e.times, sd, e.n_traj)
}

/// First time, scanning from `t_f` towards `0`, at which the curve reaches
/// `frac` of its peak. `None` for an identically zero curve.
pub fn onset_time(curve: &SummaryStats, frac: f64) -> Option<f64> {
    let peak = curve.mean.iter().copied().fold(0.0, f64::max);
    if peak <= 0.0 {
        return None;
    }
    curve
        .mean
        .iter()
        .position(|&v| v >= frac * peak)
        .map(|i| curve.times[i])
}

/// Ratio of the last recorded value of the curve to its peak.
pub fn end_to_peak_ratio(curve: &SummaryStats) -> f64 {
    let peak = curve.mean.iter().copied().fold(0.0, f64::max);
    match curve.mean.last() {
        Some(&v) if peak > 0.0 => v / peak,
        _ => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Samples inside the range; equals the sum of `counts`.
    pub n_total: u64,
    /// Samples that fell outside the range and were dropped.
    pub n_outside: u64,
}

/// Histogram of `xs` with `bins` equal bins on `range` (closed on the right
/// edge). Default range is mean +- 5 std, or +-0.5 around a constant sample.
pub fn histogram(xs: &[f64], bins: usize, range: Option<(f64, f64)>) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::ZeroBins);
    }
    let (lo, hi) = match range {
        Some(r) => r,
        None => {
            let m = moments(xs)?;
            let sd = m.variance.sqrt();
            if sd > 0.0 {
                (m.mean - 5.0 * sd, m.mean + 5.0 * sd)
            } else {
                (m.mean - 0.5, m.mean + 0.5)
            }
        }
    };
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidRange(lo, hi));
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|i| if i == bins { hi } else { lo + width * i as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    let mut n_outside = 0;
    for &x in xs {
        if !(lo..=hi).contains(&x) {
            n_outside += 1;
            continue;
        }
        let mut b = (((x - lo) / width) as usize).min(bins - 1);
        // Floating division may land one bin off near an edge.
        while b > 0 && x < edges[b] {
            b -= 1;
        }
        while b + 1 < bins && x >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    Ok(Histogram {
        n_total: counts.iter().sum(),
        edges,
        counts,
        n_outside,
    })
}

/// Histogram of `q(0)`.
pub fn final_histogram(
    e: &TrajectoryEnsemble,
    bins: usize,
    range: Option<(f64, f64)>,
) -> Result<Histogram> {
    if e.n_traj == 0 {
        return Err(Error::EmptyEnsemble);
    }
    histogram(&e.final_q(), bins, range)
}

/// Difference of the ensemble means at `t`, with its combined standard error.
pub fn alignment_gap(
    guided: &TrajectoryEnsemble,
    unguided: &TrajectoryEnsemble,
    t: f64,
) -> Result<(f64, f64)> {
    if guided.times.len() != unguided.times.len()
        || guided
            .times
            .iter()
            .zip(&unguided.times)
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::GridMismatch);
    }
    let i = guided.time_index(t).ok_or(Error::TimeNotOnGrid(t))?;
    let a = moments(&guided.q_column(i))?;
    let b = moments(&unguided.q_column(i))?;
    Ok((a.mean - b.mean, (a.sem * a.sem + b.sem * b.sem).sqrt()))
}

/// Large-sample test of `var(a) < var(b)` on the log variance ratio, with
/// the kurtosis-corrected standard error of each log sample variance.
/// Returns `z`; strongly negative values mean `a` is narrower.
pub fn log_variance_ratio_z(a: &[f64], b: &[f64]) -> Result<f64> {
    fn log_var_and_se2(xs: &[f64]) -> Result<(f64, f64)> {
        let m = moments(xs)?;
        let n = xs.len() as f64;
        if m.n < 4 || m.variance <= 0.0 {
            return Err(Error::EmptyEnsemble);
        }
        let m4 = xs.iter().map(|x| (x - m.mean).powi(4)).sum::<f64>() / n;
        let kurt = m4 / (m.variance * m.variance);
        Ok((m.variance.ln(), (kurt - (n - 3.0) / (n - 1.0)) / n))
    }
    let (la, sa) = log_var_and_se2(a)?;
    let (lb, sb) = log_var_and_se2(b)?;
    Ok((la - lb) / (sa + sb).sqrt())
}

/// Points stored row-major, `dim` coordinates each.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub dim: usize,
    pub coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::PointDimensionMismatch(dim, coords.len() % dim));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_scalars(xs: &[f64]) -> Self {
        PointSet {
            dim: 1,
            coords: xs.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// k-NN estimate of `KL(P || Q)` from samples `p` (also a tree over `p`) and
/// `q_tree` over the samples of `Q`, where `p` is a subset of the `Q` sample
/// and `offset` is the position of `p`'s first point inside it.
fn knn_kl_into_pool(p: &PointSet, p_tree: &KdTree, q_tree: &KdTree, q_len: usize, offset: usize, k: usize) -> f64 {
    let n = p.len();
    let d = p.dim as f64;
    let logs: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = p.row(i);
            let rho = p_tree.kth_distance(x, k, i);
            if rho == 0.0 {
                return 0.0;
            }
            let nu = q_tree.kth_distance(x, k, offset + i).max(f64::MIN_POSITIVE);
            (nu / rho).ln()
        })
        .collect();
    let m = (q_len - 1) as f64;
    d * logs.iter().sum::<f64>() / n as f64 + (m / (n - 1) as f64).ln()
}

/// Jensen–Shannon divergence in nats, `1/2 KL(A||M) + 1/2 KL(B||M)`, with
/// each KL estimated from `k`-th neighbour distances and `M` represented by
/// the pooled sample (the equal mixture when the sets have equal size).
/// Clipped to `[0, ln 2]`.
pub fn knn_jsd(a: &PointSet, b: &PointSet, k: usize) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::PointDimensionMismatch(a.dim, b.dim));
    }
    let min_count = a.len().min(b.len());
    if k == 0 || k >= min_count {
        return Err(Error::InvalidK { k, min_count });
    }
    let mut pooled = a.coords.clone();
    pooled.extend_from_slice(&b.coords);
    let pool_len = a.len() + b.len();
    let pool_tree = KdTree::new(&pooled, a.dim);
    let a_tree = KdTree::new(&a.coords, a.dim);
    let b_tree = KdTree::new(&b.coords, b.dim);
    let kl_a = knn_kl_into_pool(a, &a_tree, &pool_tree, pool_len, 0, k);
    let kl_b = knn_kl_into_pool(b, &b_tree, &pool_tree, pool_len, a.len(), k);
    Ok((0.5 * (kl_a + kl_b)).clamp(0.0, std::f64::consts::LN_2))
}
