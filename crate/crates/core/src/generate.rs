//! Seeded Gaussian-mixture instances with known labels.

use rand::seq::SliceRandom;

use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::io::GroundTruth;
use crate::rng::{label, substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    /// Distance between neighbouring centers, in units of `sigma`.
    pub separation: f64,
    pub sigma: f64,
    /// Cluster weights; uniform when `None`.
    pub weights: Option<Vec<f64>>,
    /// Fix cluster sizes to `n * w` (largest remainder) instead of drawing
    /// each label independently.
    pub exact_counts: bool,
    pub seed: u64,
}

impl MixtureConfig {
    pub fn new(n: usize, d: usize, k: usize, separation: f64, seed: u64) -> Self {
        MixtureConfig { n, d, k, separation, sigma: 1.0, weights: None, exact_counts: false, seed }
    }
}

/// Centers on a regular `k`-gon in the first two coordinates (on a line when
/// `d = 1`), neighbours `separation * sigma` apart.
pub fn mixture_centers(k: usize, d: usize, spacing: f64) -> Vec<Vec<f64>> {
    (0..k)
        .map(|j| {
            let mut c = vec![0.0; d];
            if d == 1 || k <= 2 {
                c[0] = j as f64 * spacing;
            } else {
                let radius = spacing / (2.0 * (std::f64::consts::PI / k as f64).sin());
                let a = std::f64::consts::TAU * j as f64 / k as f64;
                c[0] = radius * a.cos();
                c[1] = radius * a.sin();
            }
            c
        })
        .collect()
}

fn exact_sizes(n: usize, weights: &[f64]) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let raw: Vec<f64> = weights.iter().map(|w| n as f64 * w / total).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let missing = n - sizes.iter().sum::<usize>();
    for &j in order.iter().take(missing) {
        sizes[j] += 1;
    }
    sizes
}

/// Draws an instance. The same config always yields the same points.
pub fn gaussian_mixture(cfg: &MixtureConfig) -> Result<(PointSet, GroundTruth)> {
    if cfg.n < 2 || cfg.d < 1 || cfg.k < 1 {
        return Err(Error::invalid(format!("need n >= 2, d >= 1, k >= 1 (got n={}, d={}, k={})", cfg.n, cfg.d, cfg.k)));
    }
    if !(cfg.sigma > 0.0) || !(cfg.separation >= 0.0) {
        return Err(Error::invalid("sigma must be positive and separation non-negative"));
    }
    let weights = cfg.weights.clone().unwrap_or_else(|| vec![1.0; cfg.k]);
    if weights.len() != cfg.k || weights.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::invalid(format!("need {} positive weights", cfg.k)));
    }
    let mut rng = substream(cfg.seed, label::GENERATOR);
    let labels: Vec<usize> = if cfg.exact_counts {
        let mut labels: Vec<usize> =
            exact_sizes(cfg.n, &weights).iter().enumerate().flat_map(|(j, &s)| std::iter::repeat_n(j, s)).collect();
        labels.shuffle(&mut rng);
        labels
    } else {
        let dist = WeightedIndex::new(&weights).map_err(|e| Error::invalid(e.to_string()))?;
        (0..cfg.n).map(|_| dist.sample(&mut rng)).collect()
    };
    let centers = mixture_centers(cfg.k, cfg.d, cfg.separation * cfg.sigma);
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut data = Vec::with_capacity(cfg.n * cfg.d);
    for &l in &labels {
        for x in &centers[l] {
            data.push(x + noise.sample(&mut rng));
        }
    }
    let points = PointSet::from_flat(cfg.d, data)?;
    Ok((points, GroundTruth { labels, k: cfg.k, centers, sigma: cfg.sigma, seed: cfg.seed }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let cfg = MixtureConfig::new(12, 2, 2, 10.0, 3);
        let (a, ta) = gaussian_mixture(&cfg).unwrap();
        let (b, tb) = gaussian_mixture(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert_eq!((a.len(), a.dim()), (12, 2));
        assert_eq!(ta.centers, vec![vec![0.0, 0.0], vec![10.0, 0.0]]);
    }

    #[test]
    fn exact_counts_follow_weights() {
        let mut cfg = MixtureConfig::new(12, 2, 2, 10.0, 1);
        cfg.weights = Some(vec![0.9, 0.1]);
        cfg.exact_counts = true;
        let (_, t) = gaussian_mixture(&cfg).unwrap();
        // 10.8 / 1.2 rounds to 11 / 1 by largest remainder.
        assert_eq!(t.sizes(), vec![11, 1]);
        assert_eq!(exact_sizes(10, &[1.0, 1.0, 1.0]), vec![4, 3, 3]);
    }

    #[test]
    fn polygon_spacing() {
        let c = mixture_centers(3, 2, 8.0);
        let dist = crate::geometry::distance(&c[0], &c[1]);
        assert!((dist - 8.0).abs() < 1e-12);
        assert_eq!(mixture_centers(3, 1, 2.0), vec![vec![0.0], vec![2.0], vec![4.0]]);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(gaussian_mixture(&MixtureConfig::new(1, 2, 2, 1.0, 0)).is_err());
        let mut cfg = MixtureConfig::new(5, 2, 2, 1.0, 0);
        cfg.weights = Some(vec![1.0]);
        assert!(gaussian_mixture(&cfg).is_err());
    }
}
