//! Quantitative proxies for mode coverage, reconstruction fidelity, and
//! latent clustering.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;
use crate::data::{ring_means, sample_ring, RingSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("no mode means given")]
    NoMeans,
    #[error("threshold multiplier must be positive")]
    Threshold,
    #[error("coverage needs at least {min} samples, got {found}")]
    TooFewSamples { min: usize, found: usize },
    #[error("samples must be 2-D points, got width {0}")]
    Width(usize),
    #[error("k = {k} needs more than k points, got {n}")]
    Neighbors { k: usize, n: usize },
    #[error("{latents} latents but {labels} labels")]
    LabelCount { latents: usize, labels: usize },
    #[error("histograms need at least 2 bins per axis")]
    Bins,
    #[error("empty sample set")]
    Empty,
}

pub const COVERAGE_MIN_SAMPLES: usize = 1000;
pub const JSD_BINS: usize = 64;
pub const JSD_RANGE: (f64, f64) = (-1.2, 1.2);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n_samples: usize,
    pub per_mode_counts: Vec<usize>,
    pub assigned_fraction: f64,
    pub covered_modes: usize,
    pub jsd: f64,
    pub capture_k: f64,
    pub min_share: f64,
}

impl CoverageReport {
    pub fn per_mode_share(&self) -> Vec<f64> {
        self.per_mode_counts
            .iter()
            .map(|&c| c as f64 / self.n_samples as f64)
            .collect()
    }
}

/// Nearest mean within `k·σ`, ties to the lowest index.
pub fn assign_mode(p: [f64; 2], means: &[[f64; 2]], sigma: f64, k: f64) -> Result<Option<usize>, EvalError> {
    if means.is_empty() {
        return Err(EvalError::NoMeans);
    }
    if !(k > 0.0) {
        return Err(EvalError::Threshold);
    }
    let mut best = 0;
    let mut best_d2 = f64::INFINITY;
    for (i, m) in means.iter().enumerate() {
        let d2 = (p[0] - m[0]).powi(2) + (p[1] - m[1]).powi(2);
        if d2 < best_d2 {
            best = i;
            best_d2 = d2;
        }
    }
    let r = k * sigma;
    Ok((best_d2 <= r * r).then_some(best))
}

/// Per-mode capture counts and JSD against a fresh sample from `spec`.
///
/// The reference sample is drawn from `spec.seed`, so the report is a pure
/// function of `(samples, spec, k, min_share)`.
pub fn coverage(samples: &Tensor, spec: &RingSpec, k: f64, min_share: f64) -> Result<CoverageReport, EvalError> {
    if samples.cols() != 2 {
        return Err(EvalError::Width(samples.cols()));
    }
    let n = samples.rows();
    if n < COVERAGE_MIN_SAMPLES {
        return Err(EvalError::TooFewSamples {
            min: COVERAGE_MIN_SAMPLES,
            found: n,
        });
    }
    let means = ring_means(spec);
    let mut counts = vec![0usize; means.len()];
    for row in samples.data().chunks_exact(2) {
        if let Some(m) = assign_mode([row[0], row[1]], &means, spec.sigma, k)? {
            counts[m] += 1;
        }
    }
    let assigned: usize = counts.iter().sum();
    let covered = counts.iter().filter(|&&c| c as f64 / n as f64 >= min_share).count();
    let reference = sample_ring(spec, n, &mut ChaCha8Rng::seed_from_u64(spec.seed));
    let jsd = jsd_histogram(samples, &reference, JSD_BINS, JSD_RANGE)?;
    Ok(CoverageReport {
        n_samples: n,
        per_mode_counts: counts,
        assigned_fraction: assigned as f64 / n as f64,
        covered_modes: covered,
        jsd,
        capture_k: k,
        min_share,
    })
}

/// Row-major 2-D histogram; `dropped` counts points outside `range`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub bins: usize,
    pub range: (f64, f64),
    pub counts: Vec<u64>,
    pub dropped: u64,
}

impl DensityGrid {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Bins `(x0, x1)` pairs. Row index follows `x1` (top row = largest `x1`),
/// column index follows `x0`, so the grid reads like a plot.
pub fn density_grid(samples: &Tensor, bins: usize, range: (f64, f64)) -> Result<DensityGrid, EvalError> {
    if bins < 2 {
        return Err(EvalError::Bins);
    }
    if samples.cols() != 2 && !samples.is_empty() {
        return Err(EvalError::Width(samples.cols()));
    }
    let (lo, hi) = range;
    let width = (hi - lo) / bins as f64;
    let cell = |v: f64| -> Option<usize> {
        if !(v >= lo && v <= hi) {
            return None;
        }
        Some((((v - lo) / width) as usize).min(bins - 1))
    };
    let mut counts = vec![0u64; bins * bins];
    let mut dropped = 0;
    for row in samples.data().chunks_exact(2) {
        match (cell(row[0]), cell(row[1])) {
            (Some(c), Some(r)) => counts[(bins - 1 - r) * bins + c] += 1,
            _ => dropped += 1,
        }
    }
    Ok(DensityGrid {
        bins,
        range,
        counts,
        dropped,
    })
}

/// Jensen–Shannon divergence (natural log) between the normalized
/// histograms of two 2-D sample sets; `0·log 0 = 0`.
pub fn jsd_histogram(a: &Tensor, b: &Tensor, bins: usize, range: (f64, f64)) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::Empty);
    }
    let ga = density_grid(a, bins, range)?;
    let gb = density_grid(b, bins, range)?;
    let (ta, tb) = (ga.total() as f64, gb.total() as f64);
    if ta == 0.0 && tb == 0.0 {
        return Ok(0.0);
    }
    if ta == 0.0 || tb == 0.0 {
        return Ok(std::f64::consts::LN_2);
    }
    let mut js = 0.0;
    for (&ca, &cb) in ga.counts.iter().zip(&gb.counts) {
        let p = ca as f64 / ta;
        let q = cb as f64 / tb;
        let m = 0.5 * (p + q);
        if p > 0.0 {
            js += 0.5 * p * (p / m).ln();
        }
        if q > 0.0 {
            js += 0.5 * q * (q / m).ln();
        }
    }
    Ok(js.clamp(0.0, std::f64::consts::LN_2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    pub mean: f64,
    pub per_sample: Vec<f64>,
    /// Mean error of each `x` against the reconstruction of a shuffled partner.
    pub mismatched_mean: f64,
}

/// L2 reconstruction error, plus a shuffled-partner baseline.
///
/// `reconstructions[i]` must be the reconstruction of `xs[i]`.
pub fn reconstruction_error(xs: &Tensor, reconstructions: &Tensor, shuffle_seed: u64) -> Result<ReconstructionReport, EvalError> {
    if xs.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = xs.rows();
    let l2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let per_sample: Vec<f64> = (0..n).map(|i| l2(xs.row(i), reconstructions.row(i))).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
    let mismatched = (0..n).map(|i| l2(xs.row(i), reconstructions.row(perm[i]))).sum::<f64>() / n as f64;
    Ok(ReconstructionReport {
        mean: per_sample.iter().sum::<f64>() / n as f64,
        per_sample,
        mismatched_mean: mismatched,
    })
}

/// Fraction of points whose k-nearest-neighbor majority label (self
/// excluded, Euclidean, ties to the smallest label) equals their own.
pub fn latent_knn_agreement(latents: &Tensor, labels: &[u8], k: usize) -> Result<f64, EvalError> {
    let n = latents.rows();
    if labels.len() != n {
        return Err(EvalError::LabelCount {
            latents: n,
            labels: labels.len(),
        });
    }
    if k == 0 || k >= n {
        return Err(EvalError::Neighbors { k, n });
    }
    let mut hits = 0usize;
    let mut dists: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        dists.clear();
        let a = latents.row(i);
        for j in 0..n {
            if j != i {
                let d = a.iter().zip(latents.row(j)).map(|(x, y)| (x - y).powi(2)).sum::<f64>();
                dists.push((d, j));
            }
        }
        dists.select_nth_unstable_by(k - 1, |x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut votes = [0usize; 256];
        for &(_, j) in &dists[..k] {
            votes[labels[j] as usize] += 1;
        }
        let best = votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).map(|(l, _)| l).unwrap_or(0);
        if best == labels[i] as usize {
            hits += 1;
        }
    }
    Ok(hits as f64 / n as f64)
}
