use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::autodiff::Tensor;

/// Equal-weight mixture of isotropic Gaussians whose means sit on a circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingSpec {
    #[serde(default = "default_modes")]
    pub n_modes: usize,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_modes() -> usize {
    8
}
fn default_radius() -> f64 {
    0.9
}
fn default_sigma() -> f64 {
    0.01
}

impl Default for RingSpec {
    fn default() -> Self {
        Self {
            n_modes: default_modes(),
            radius: default_radius(),
            sigma: default_sigma(),
            seed: 0,
        }
    }
}

impl RingSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_modes == 0 {
            return Err(DataError::Ring("n_modes must be at least 1"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(DataError::Ring("radius must be positive"));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(DataError::Ring("sigma must be non-negative"));
        }
        Ok(())
    }

    /// The isotropic covariance `σ²I`.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let v = self.sigma * self.sigma;
        [[v, 0.0], [0.0, v]]
    }
}

/// `μ_k = r·(cos 2πk/n, sin 2πk/n)`.
pub fn ring_means(spec: &RingSpec) -> Vec<[f64; 2]> {
    (0..spec.n_modes)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / spec.n_modes as f64;
            [spec.radius * a.cos(), spec.radius * a.sin()]
        })
        .collect()
}

/// Draws `n` points: a uniform mode index, then `N(μ_k, σ²I)`.
pub fn sample_ring<R: Rng + ?Sized>(spec: &RingSpec, n: usize, rng: &mut R) -> Tensor {
    let means = ring_means(spec);
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let k = rng.random_range(0..means.len());
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        data.push(means[k][0] + spec.sigma * u);
        data.push(means[k][1] + spec.sigma * v);
    }
    Tensor::from_parts(vec![n, 2], data)
}

/// Like [`sample_ring`] but also returns the mode index of each point.
pub fn sample_ring_labeled<R: Rng + ?Sized>(spec: &RingSpec, n: usize, rng: &mut R) -> (Tensor, Vec<usize>) {
    let means = ring_means(spec);
    let mut data = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.random_range(0..means.len());
        let u: f64 = StandardNormal.sample(rng);
        let v: f64 = StandardNormal.sample(rng);
        data.push(means[k][0] + spec.sigma * u);
        data.push(means[k][1] + spec.sigma * v);
        labels.push(k);
    }
    (Tensor::from_parts(vec![n, 2], data), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn means_lie_on_the_ring() {
        let spec = RingSpec::default();
        let m = ring_means(&spec);
        assert_eq!(m[0], [0.9, 0.0]);
        for (k, p) in m.iter().enumerate() {
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 0.9).abs() < 1e-12);
            let next = m[(k + 1) % 8];
            let dot = (p[0] * next[0] + p[1] * next[1]) / 0.81;
            assert!((dot.clamp(-1.0, 1.0).acos() - PI / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_sigma_samples_sit_on_means() {
        let spec = RingSpec {
            sigma: 0.0,
            ..RingSpec::default()
        };
        let means = ring_means(&spec);
        let x = sample_ring(&spec, 500, &mut ChaCha8Rng::seed_from_u64(5));
        for r in x.data().chunks_exact(2) {
            assert!(means.iter().any(|m| m[0] == r[0] && m[1] == r[1]));
        }
    }

    #[test]
    fn mode_frequencies_pass_chi_square() {
        let spec = RingSpec::default();
        let n = 80_000;
        let (_, labels) = sample_ring_labeled(&spec, n, &mut ChaCha8Rng::seed_from_u64(9));
        let mut counts = [0usize; 8];
        for l in labels {
            counts[l] += 1;
        }
        let e = n as f64 / 8.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
        // 0.999 quantile of chi-square with 7 degrees of freedom.
        assert!(chi2 < 24.322, "chi2 = {chi2}");
    }

    #[test]
    fn per_mode_covariance_and_global_mean() {
        let spec = RingSpec::default();
        let n = 80_000;
        let (x, labels) = sample_ring_labeled(&spec, n, &mut ChaCha8Rng::seed_from_u64(21));
        let means = ring_means(&spec);
        let s2 = spec.sigma * spec.sigma;
        for k in 0..8 {
            let pts: Vec<&[f64]> = (0..n).filter(|&i| labels[i] == k).map(|i| x.row(i)).collect();
            let cnt = pts.len() as f64;
            let vx = pts.iter().map(|p| (p[0] - means[k][0]).powi(2)).sum::<f64>() / cnt;
            let vy = pts.iter().map(|p| (p[1] - means[k][1]).powi(2)).sum::<f64>() / cnt;
            let cxy = pts.iter().map(|p| (p[0] - means[k][0]) * (p[1] - means[k][1])).sum::<f64>() / cnt;
            assert!((vx / s2 - 1.0).abs() < 0.1);
            assert!((vy / s2 - 1.0).abs() < 0.1);
            assert!(cxy.abs() / s2 < 0.1);
        }
        // Marginal std of a coordinate is about r/√2.
        let bound = 3.0 * (0.81f64 / 2.0 + s2).sqrt() / (n as f64).sqrt();
        let mx = x.data().iter().step_by(2).sum::<f64>() / n as f64;
        let my = x.data().iter().skip(1).step_by(2).sum::<f64>() / n as f64;
        assert!(mx.abs() < bound && my.abs() < bound);
    }

    #[test]
    fn same_seed_same_samples() {
        let spec = RingSpec::default();
        let a = sample_ring(&spec, 100, &mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_ring(&spec, 100, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
    }
}
