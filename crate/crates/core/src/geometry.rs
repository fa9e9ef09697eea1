//! Euclidean primitives: point sets, `f2` costs, centroids, distance order
//! statistics and the vibration perturbation.
//!
//! Sums over points use pairwise (tree) summation so rounding error grows
//! with `log n` rather than `n`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PAIRWISE_BLOCK: usize = 32;

/// An ordered, immutable collection of `n` points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointSet {
    /// Builds a point set from rows. All rows must share one dimension `d >= 1`.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = match rows.first() {
            Some(r) => r.len(),
            None => return Ok(PointSet { data: Vec::new(), n: 0, d: 1 }),
        };
        if d == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        let n = rows.len();
        let mut data = Vec::with_capacity(n * d);
        for r in &rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(PointSet { data, n, d })
    }

    pub fn from_flat(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("points must have dimension >= 1"));
        }
        if !data.len().is_multiple_of(d) {
            return Err(Error::invalid(format!("flat buffer of length {} is not a multiple of d = {d}", data.len())));
        }
        Ok(PointSet { n: data.len() / d, data, d })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Copies the points at `indices` (in that order) into a new set.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointSet { data, n: indices.len(), d: self.d }
    }

    fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: q.len() });
        }
        Ok(())
    }
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Pairwise summation of `term(i)` for `i` in `lo..hi`.
pub(crate) fn pairwise_sum<F: Fn(usize) -> f64>(lo: usize, hi: usize, term: &F) -> f64 {
    if hi - lo <= PAIRWISE_BLOCK {
        return (lo..hi).map(term).sum();
    }
    let mid = lo + (hi - lo) / 2;
    pairwise_sum(lo, mid, term) + pairwise_sum(mid, hi, term)
}

/// Pairwise coordinate-wise sum of `row(i)` for `i` in `lo..hi`, added into `out`.
fn pairwise_vec_sum<'a, F: Fn(usize) -> &'a [f64]>(lo: usize, hi: usize, row: &F, out: &mut [f64]) {
    if hi - lo <= PAIRWISE_BLOCK {
        for i in lo..hi {
            for (o, x) in out.iter_mut().zip(row(i)) {
                *o += x;
            }
        }
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let mut left = vec![0.0; out.len()];
    let mut right = vec![0.0; out.len()];
    pairwise_vec_sum(lo, mid, row, &mut left);
    pairwise_vec_sum(mid, hi, row, &mut right);
    for ((o, l), r) in out.iter_mut().zip(&left).zip(&right) {
        *o += l + r;
    }
}

/// `f2(q, S) = sum_{p in S} ||p - q||^2`; zero for an empty set.
pub fn f2(q: &[f64], set: &PointSet) -> Result<f64> {
    set.check_dim(q)?;
    Ok(pairwise_sum(0, set.len(), &|i| squared_distance(set.point(i), q)))
}

/// `f2` over the points of `set` selected by `indices`.
pub fn f2_indexed(q: &[f64], set: &PointSet, indices: &[usize]) -> Result<f64> {
    set.check_dim(q)?;
    Ok(pairwise_sum(0, indices.len(), &|i| squared_distance(set.point(indices[i]), q)))
}

/// Coordinate-wise mean of a nonempty set.
pub fn centroid(set: &PointSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::Empty("centroid of an empty point set"));
    }
    let mut out = vec![0.0; set.dim()];
    pairwise_vec_sum(0, set.len(), &|i| set.point(i), &mut out);
    let n = set.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    Ok(out)
}

/// Centroid of the points of `set` selected by `indices` (repeats count).
pub fn centroid_indexed(set: &PointSet, indices: &[usize]) -> Result<Vec<f64>> {
    if indices.is_empty() {
        return Err(Error::Empty("centroid of an empty point set"));
    }
    let mut out = vec![0.0; set.dim()];
    pairwise_vec_sum(0, indices.len(), &|i| set.point(indices[i]), &mut out);
    let n = indices.len() as f64;
    out.iter_mut().for_each(|x| *x /= n);
    Ok(out)
}

/// Ranking key for "farther first": larger squared distance first, ties by
/// lower point index.
#[inline]
fn farther_first(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    b.0.total_cmp(&a.0).then(a.1.cmp(&b.1))
}

/// Selects the `k` points of `indices` farthest from `q` in expected linear
/// time. Returns the `k`-th largest squared distance and the selected indices
/// in their original relative order.
pub(crate) fn farthest_k(q: &[f64], set: &PointSet, indices: &[usize], k: usize) -> (f64, Vec<usize>) {
    debug_assert!(k >= 1 && k <= indices.len());
    let dists: Vec<f64> = indices.iter().map(|&i| squared_distance(set.point(i), q)).collect();
    let mut keyed: Vec<(f64, usize)> = dists.iter().copied().zip(indices.iter().copied()).collect();
    let (_, pivot, _) = keyed.select_nth_unstable_by(k - 1, farther_first);
    let pivot = *pivot;
    let kept = indices
        .iter()
        .zip(&dists)
        .filter(|&(&i, &dist)| farther_first(&(dist, i), &pivot) != std::cmp::Ordering::Greater)
        .map(|(&i, _)| i)
        .collect();
    (pivot.0, kept)
}

/// The `k`-th largest of `{dist(p, q) : p in S}` (1-based `k`), ties broken by
/// point index.
pub fn kth_largest_distance(q: &[f64], set: &PointSet, k: usize) -> Result<f64> {
    set.check_dim(q)?;
    if k == 0 || k > set.len() {
        return Err(Error::invalid(format!("k = {k} out of range 1..={}", set.len())));
    }
    let mut keyed: Vec<(f64, usize)> = set.iter().enumerate().map(|(i, p)| (squared_distance(p, q), i)).collect();
    let (_, pivot, _) = keyed.select_nth_unstable_by(k - 1, farther_first);
    Ok(pivot.0.sqrt())
}

/// Box half-width `rho = min(d_max, eta * d_min2^2 / (3 d d_max))` used by
/// [`vibrate`], where `d_max` and `d_min2` are the largest and second
/// smallest distances from `q` to the selected points.
pub fn vibration_radius(q: &[f64], set: &PointSet, indices: &[usize], eta: f64) -> Result<f64> {
    Ok(vibration_stats(q, set, indices, eta)?.rho)
}

struct VibrationStats {
    rho: f64,
    /// `f2(q, S)`.
    cost: f64,
    /// `sum_{p in S} (q - p)`.
    offset: Vec<f64>,
}

/// One pass over the selected points for everything [`vibrate`] needs.
fn vibration_stats(q: &[f64], set: &PointSet, indices: &[usize], eta: f64) -> Result<VibrationStats> {
    set.check_dim(q)?;
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta = {eta} must lie in (0, 1)")));
    }
    if indices.len() < 3 {
        return Err(Error::Degenerate(format!("vibration needs at least 3 points, got {}", indices.len())));
    }
    let mut d_max = 0.0f64;
    let (mut min1, mut min2) = (f64::INFINITY, f64::INFINITY);
    let mut cost = 0.0;
    let mut offset = vec![0.0; q.len()];
    for &i in indices {
        let p = set.point(i);
        let mut sq = 0.0;
        for ((o, a), b) in offset.iter_mut().zip(q).zip(p) {
            let t = a - b;
            *o += t;
            sq += t * t;
        }
        cost += sq;
        let dist = sq.sqrt();
        d_max = d_max.max(dist);
        if dist < min1 {
            min2 = min1;
            min1 = dist;
        } else if dist < min2 {
            min2 = dist;
        }
    }
    if min2 <= 0.0 {
        return Err(Error::Degenerate(
            "query point coincides with two or more points (second-smallest distance is 0)".into(),
        ));
    }
    let d = set.dim() as f64;
    let rho = d_max.min(eta * min2 * min2 / (3.0 * d * d_max));
    Ok(VibrationStats { rho, cost, offset })
}

const VIBRATE_ATTEMPTS: usize = 64;

/// Perturbs `q` by a uniform draw from the box `[-rho, rho]^d` so that, with
/// probability one, its distances to distinct points of `set` are pairwise
/// distinct, while `f2(q', set) <= (1 + eta) f2(q, set)`.
///
/// A draw that breaks the `f2` bound (possible only for very small `n`) is
/// redrawn from the same stream.
pub fn vibrate<R: Rng + ?Sized>(q: &[f64], set: &PointSet, eta: f64, rng: &mut R) -> Result<Vec<f64>> {
    let all: Vec<usize> = (0..set.len()).collect();
    vibrate_indexed(q, set, &all, eta, rng)
}

pub(crate) fn vibrate_indexed<R: Rng + ?Sized>(
    q: &[f64],
    set: &PointSet,
    indices: &[usize],
    eta: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let VibrationStats { rho, cost, offset } = vibration_stats(q, set, indices, eta)?;
    let bound = (1.0 + eta) * cost;
    let n = indices.len() as f64;
    for _ in 0..VIBRATE_ATTEMPTS {
        let shift: Vec<f64> = q.iter().map(|_| rng.random_range(-rho..=rho)).collect();
        // f2(q + y, S) = f2(q, S) + 2 y . sum(q - p) + |S| |y|^2
        let moved_cost = cost + shift.iter().zip(&offset).map(|(y, o)| 2.0 * y * o + n * y * y).sum::<f64>();
        if moved_cost <= bound {
            return Ok(q.iter().zip(&shift).map(|(a, y)| a + y).collect());
        }
    }
    Err(Error::Degenerate(format!(
        "no perturbation within rho = {rho} met the f2 bound after {VIBRATE_ATTEMPTS} draws"
    )))
}

/// Per-cluster statistics of a labelled partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringStats {
    pub sizes: Vec<usize>,
    /// `m_j`, the centroid of cluster `j`.
    pub centroids: Vec<Vec<f64>>,
    /// `beta_j = |P_j| / |P|`.
    pub betas: Vec<f64>,
    /// `sigma_j = sqrt(f2(m_j, P_j) / |P_j|)`.
    pub sigmas: Vec<f64>,
    /// Cost of the partition at its own centroids.
    pub cost: f64,
    /// `sqrt(cost / |P|)`.
    pub sigma_opt: f64,
}

impl ClusteringStats {
    /// Statistics for `labels[i] in 0..k`. Every cluster must be nonempty.
    pub fn from_labels(set: &PointSet, labels: &[usize], k: usize) -> Result<Self> {
        if labels.len() != set.len() {
            return Err(Error::invalid(format!("{} labels for {} points", labels.len(), set.len())));
        }
        let mut members = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            if l >= k {
                return Err(Error::invalid(format!("label {l} out of range for k = {k}")));
            }
            members[l].push(i);
        }
        let n = set.len() as f64;
        let mut stats = ClusteringStats {
            sizes: Vec::with_capacity(k),
            centroids: Vec::with_capacity(k),
            betas: Vec::with_capacity(k),
            sigmas: Vec::with_capacity(k),
            cost: 0.0,
            sigma_opt: 0.0,
        };
        let mut costs = Vec::with_capacity(k);
        for (j, idx) in members.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::invalid(format!("cluster {j} is empty")));
            }
            let m = centroid_indexed(set, idx)?;
            let c = f2_indexed(&m, set, idx)?;
            stats.sizes.push(idx.len());
            stats.betas.push(idx.len() as f64 / n);
            stats.sigmas.push((c / idx.len() as f64).sqrt());
            stats.centroids.push(m);
            costs.push(c);
        }
        stats.cost = crate::geometry::pairwise_sum(0, costs.len(), &|j| costs[j]);
        stats.sigma_opt = (stats.cost / n).sqrt();
        Ok(stats)
    }
}
