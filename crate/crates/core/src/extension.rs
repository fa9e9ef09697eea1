//! Candidate generation for constrained k-means with a pluggable completion
//! step.
//!
//! The framework samples one- and two-center prefixes exactly like phase 1
//! of the 2-means sampler and hands each prefix to an
//! [`ExtensionAlgorithm`], which returns completed k-center tuples.

use std::collections::HashSet;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{satisfies, ConstraintSpec};
use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointSet};
use crate::params::{ParameterSet, D1, D2};
use crate::sampler::{double_sampling, first_center, peeling_phase, SamplerConfig, Sizes, Timings};

/// Phase-1 enumerations above this size need an explicit cap.
pub const UNCAPPED_LIMIT: f64 = 1e7;

/// Default share of the failure probability left to the extension.
pub const MU1: f64 = 0.3;
pub const MU2: f64 = 0.2;

/// A k-center tuple.
pub type Centers = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionParams {
    pub k: usize,
    pub epsilon: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// `mu3 / 2`.
    pub gamma_star: f64,
    /// `delta(eps)`.
    pub delta: f64,
    pub delta2: f64,
    pub d1: f64,
    pub d2: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "N_a")]
    pub n_a: f64,
    #[serde(rename = "N_b")]
    pub n_b: f64,
    pub override_flags: Vec<String>,
}

impl ExtensionParams {
    /// Defaults: `mu = (0.3, 0.2, 0.2)` and `delta(eps) = eps`.
    pub fn new(k: usize, epsilon: f64) -> Result<Self> {
        Self::resolve(k, epsilon, (MU1, MU2, MU2), |e| e)
    }

    pub fn resolve<F: Fn(f64) -> f64>(k: usize, epsilon: f64, mu: (f64, f64, f64), delta_fn: F) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid(format!("k = {k} must be at least 2")));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid(format!("epsilon = {epsilon} must lie in (0, 1)")));
        }
        let (mu1, mu2, mu3) = mu;
        if !(mu1 > 0.0 && mu2 > 0.0 && mu3 > 0.0) || mu1 + mu2 + mu3 >= 1.0 {
            return Err(Error::invalid(format!("mu = ({mu1}, {mu2}, {mu3}) must be positive with sum below 1")));
        }
        let delta = delta_fn(epsilon);
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta(eps) = {delta} must lie in (0, 1)")));
        }
        let delta2 = crate::params::DELTA6 / (2.0 * D2);
        let gamma_star = mu3 / 2.0;
        let m = ceil_count(1.0 / (gamma_star * delta));
        let n_a = D2 * k as f64 * m;
        let n_b = ceil_count(m * (k - 1) as f64 / ((1.0 - delta2) * delta.powf(1.0 + D1)));
        Ok(ExtensionParams {
            k,
            epsilon,
            mu1,
            mu2,
            mu3,
            gamma_star,
            delta,
            delta2,
            d1: D1,
            d2: D2,
            m,
            n_a,
            n_b,
            override_flags: Vec::new(),
        })
    }

    /// Replaces sample sizes; replaced ones are listed in `override_flags`.
    pub fn with_sizes(mut self, m: Option<u64>, n_a: Option<u64>, n_b: Option<u64>) -> Result<Self> {
        for (name, value, slot) in [("M", m, &mut self.m), ("N_a", n_a, &mut self.n_a), ("N_b", n_b, &mut self.n_b)] {
            if let Some(v) = value {
                if v == 0 {
                    return Err(Error::invalid(format!("{name} must be positive")));
                }
                *slot = v as f64;
                self.override_flags.push(name.to_string());
            }
        }
        if self.n_a < self.m || self.n_b < self.m {
            return Err(Error::invalid(format!(
                "N_a = {}, N_b = {} must be at least M = {}",
                self.n_a, self.n_b, self.m
            )));
        }
        Ok(self)
    }

    /// Failure terms as the k-means analysis states them, and the points where
    /// it departs from the 2-means analysis.
    pub fn diagnostics(&self) -> ExtensionDiagnostics {
        let (dl2, m) = (self.delta2, self.m);
        let gamma1 = 2f64.powf(-dl2 * dl2 * self.d2 / 4.0 * m);
        let gamma2 = 2f64.powf(-dl2 * dl2 / 2.0 * m / (1.0 - dl2));
        let gamma3 = self.delta.powf(1.0 + self.d1) * m;
        let gamma4 = self.gamma_star;
        let target = self.mu2 / 4.0;
        let mut notes = vec![format!(
            "phase-1 success threshold in S_a is (1 - delta2) d2 M = {}; the 2-means analysis uses half of that",
            (1.0 - dl2) * self.d2 * m
        )];
        if gamma3 > target {
            notes.push(format!("gamma3 = delta^(1+d1) M = {gamma3} exceeds mu2/4 = {target}"));
        }
        ExtensionDiagnostics {
            gamma1,
            gamma2,
            gamma3,
            gamma4,
            target,
            phase1_threshold: (1.0 - dl2) * self.d2 * m,
            phase1_threshold_two_means: 0.5 * (1.0 - dl2) * self.d2 * m,
            notes,
        }
    }
}

fn ceil_count(x: f64) -> f64 {
    (x * (1.0 - 1e-12)).ceil().max(1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtensionDiagnostics {
    /// `2^(-delta2^2 d2 M / 4)`.
    pub gamma1: f64,
    /// `2^(-(delta2^2 / 2) M / (1 - delta2))`.
    pub gamma2: f64,
    /// `delta^(1+d1) M`.
    pub gamma3: f64,
    pub gamma4: f64,
    /// `mu2 / 4`, the bound each term is claimed to meet.
    pub target: f64,
    pub phase1_threshold: f64,
    pub phase1_threshold_two_means: f64,
    pub notes: Vec<String>,
}

/// Declared cost of an extension: `H` bounds the number of tuples returned
/// per prefix, `Z` its running time (in elementary operations).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complexity {
    pub pairs: f64,
    pub time: f64,
}

/// Completes a prefix of `r` approximate centers to k-center tuples.
pub trait ExtensionAlgorithm: Send + Sync {
    fn name(&self) -> &str;

    /// Returns tuples of exactly `k` centers of dimension `points.dim()`,
    /// each starting with `prefix`. Must be a pure function of its inputs.
    fn extend(&self, k: usize, points: &PointSet, epsilon: f64, prefix: &[Vec<f64>], seed: u64)
        -> Result<Vec<Centers>>;

    /// `(H, Z)` for `r` given centers.
    fn complexity(&self, k: usize, r: usize, n: usize, d: usize, epsilon: f64) -> Complexity;
}

fn check_prefix(k: usize, points: &PointSet, prefix: &[Vec<f64>]) -> Result<()> {
    if prefix.is_empty() || prefix.len() > k {
        return Err(Error::invalid(format!("prefix of {} centers for k = {k}", prefix.len())));
    }
    if let Some(c) = prefix.iter().find(|c| c.len() != points.dim()) {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: c.len() });
    }
    Ok(())
}

/// Exhaustive completion for small inputs: every point either joins its
/// nearest prefix center or one of the `k - r` free clusters, which take
/// their centroids. Returns the cheapest completion whose cluster sizes
/// satisfy `spec`.
#[derive(Debug, Clone)]
pub struct BruteForceCompletion {
    pub spec: ConstraintSpec,
}

impl BruteForceCompletion {
    pub const LIMIT: usize = 12;
}

impl ExtensionAlgorithm for BruteForceCompletion {
    fn name(&self) -> &str {
        "brute"
    }

    fn extend(
        &self,
        k: usize,
        points: &PointSet,
        _epsilon: f64,
        prefix: &[Vec<f64>],
        _seed: u64,
    ) -> Result<Vec<Centers>> {
        check_prefix(k, points, prefix)?;
        let n = points.len();
        if n > Self::LIMIT {
            return Err(Error::TooLarge { what: "n for brute-force completion", got: n, limit: Self::LIMIT });
        }
        let r = prefix.len();
        let free = k - r;
        if free == 0 {
            return Ok(vec![prefix.to_vec()]);
        }
        let d = points.dim();
        let nearest: Vec<(usize, f64)> = points
            .iter()
            .map(|p| {
                prefix.iter().enumerate().fold((0, f64::INFINITY), |best, (j, c)| {
                    let dist = squared_distance(p, c);
                    if dist < best.1 {
                        (j, dist)
                    } else {
                        best
                    }
                })
            })
            .collect();
        let norms: Vec<f64> = points.iter().map(|p| p.iter().map(|x| x * x).sum()).collect();

        // digits[i] == 0: nearest prefix center; digits[i] == t: free cluster t - 1.
        let base = free + 1;
        let mut digits = vec![0usize; n];
        let mut sums = vec![vec![0.0; d]; free];
        let mut sq = vec![0.0; free];
        let mut counts = vec![0usize; free];
        let mut prefix_counts = vec![0usize; r];
        nearest.iter().for_each(|&(j, _)| prefix_counts[j] += 1);
        let mut prefix_cost: f64 = nearest.iter().map(|x| x.1).sum();
        let mut sizes = vec![0usize; k];
        let mut best: Option<(f64, Centers)> = None;

        let move_point = |i: usize,
                          from: usize,
                          to: usize,
                          sums: &mut Vec<Vec<f64>>,
                          sq: &mut Vec<f64>,
                          counts: &mut Vec<usize>,
                          prefix_counts: &mut Vec<usize>,
                          prefix_cost: &mut f64| {
            let p = points.point(i);
            if from == 0 {
                prefix_counts[nearest[i].0] -= 1;
                *prefix_cost -= nearest[i].1;
            } else {
                sums[from - 1].iter_mut().zip(p).for_each(|(s, x)| *s -= x);
                sq[from - 1] -= norms[i];
                counts[from - 1] -= 1;
            }
            if to == 0 {
                prefix_counts[nearest[i].0] += 1;
                *prefix_cost += nearest[i].1;
            } else {
                sums[to - 1].iter_mut().zip(p).for_each(|(s, x)| *s += x);
                sq[to - 1] += norms[i];
                counts[to - 1] += 1;
            }
        };

        loop {
            if counts.iter().all(|&c| c > 0) {
                sizes[..r].copy_from_slice(&prefix_counts);
                sizes[r..].copy_from_slice(&counts);
                if satisfies(&self.spec, &sizes) {
                    let mut cost = prefix_cost;
                    for t in 0..free {
                        let s2: f64 = sums[t].iter().map(|x| x * x).sum();
                        cost += sq[t] - s2 / counts[t] as f64;
                    }
                    if best.as_ref().is_none_or(|b| cost < b.0 - 1e-12 * b.0.abs()) {
                        let mut centers = prefix.to_vec();
                        for t in 0..free {
                            centers.push(sums[t].iter().map(|x| x / counts[t] as f64).collect());
                        }
                        best = Some((cost, centers));
                    }
                }
            }
            // Odometer step.
            let mut i = 0;
            loop {
                if i == n {
                    return best.map(|b| vec![b.1]).ok_or_else(|| {
                        Error::Infeasible(format!("no completion of {r} centers satisfies {}", self.spec))
                    });
                }
                let from = digits[i];
                let to = (from + 1) % base;
                move_point(i, from, to, &mut sums, &mut sq, &mut counts, &mut prefix_counts, &mut prefix_cost);
                digits[i] = to;
                if to != 0 {
                    break;
                }
                i += 1;
            }
        }
    }

    fn complexity(&self, k: usize, r: usize, n: usize, d: usize, _epsilon: f64) -> Complexity {
        Complexity { pairs: 1.0, time: ((k - r + 1) as f64).powi(n as i32) * (k * d) as f64 }
    }
}

/// Farthest-point completion: repeatedly adds the point farthest from the
/// centers chosen so far (ties to the lower index). One tuple, no guarantee.
#[derive(Debug, Clone, Default)]
pub struct FarthestPointCompletion;

impl ExtensionAlgorithm for FarthestPointCompletion {
    fn name(&self) -> &str {
        "greedy"
    }

    fn extend(
        &self,
        k: usize,
        points: &PointSet,
        _epsilon: f64,
        prefix: &[Vec<f64>],
        _seed: u64,
    ) -> Result<Vec<Centers>> {
        check_prefix(k, points, prefix)?;
        let mut centers = prefix.to_vec();
        let mut gap: Vec<f64> = points
            .iter()
            .map(|p| centers.iter().map(|c| squared_distance(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        while centers.len() < k {
            let (far, _) =
                gap.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (i, &g)| if g > b.1 { (i, g) } else { b });
            let c = points.point(far).to_vec();
            for (g, p) in gap.iter_mut().zip(points.iter()) {
                *g = g.min(squared_distance(p, &c));
            }
            centers.push(c);
        }
        Ok(vec![centers])
    }

    fn complexity(&self, k: usize, r: usize, n: usize, d: usize, _epsilon: f64) -> Complexity {
        Complexity { pairs: 1.0, time: (n * d * (k - r + 1)) as f64 }
    }
}

/// Completes a one-center prefix with the peeling phase of the 2-means
/// sampler (k = 2 only). Uses the same random substreams as the sampler, so
/// for equal seeds and parameters it reproduces the sampler's phase-2 pairs.
#[derive(Debug, Clone)]
pub struct PeelCompletion {
    pub params: ParameterSet,
    pub config: SamplerConfig,
}

impl ExtensionAlgorithm for PeelCompletion {
    fn name(&self) -> &str {
        "peel"
    }

    fn extend(
        &self,
        k: usize,
        points: &PointSet,
        _epsilon: f64,
        prefix: &[Vec<f64>],
        seed: u64,
    ) -> Result<Vec<Centers>> {
        check_prefix(k, points, prefix)?;
        if k != 2 {
            return Err(Error::invalid(format!("peel completion handles k = 2 only, got k = {k}")));
        }
        if prefix.len() == 2 {
            return Ok(vec![prefix.to_vec()]);
        }
        let c1 = &prefix[0];
        let mut out = Vec::new();
        let mut timings = Timings::default();
        peeling_phase(points, &self.params, c1, seed, &self.config, &mut timings, |c2, _, _, _| {
            out.push(vec![c1.clone(), c2.to_vec()])
        })?;
        Ok(out)
    }

    fn complexity(&self, _k: usize, r: usize, n: usize, d: usize, _epsilon: f64) -> Complexity {
        if r >= 2 {
            return Complexity { pairs: 1.0, time: 1.0 };
        }
        let m = self.params.m;
        let per_round = crate::subsets::binomial((self.params.n_2 + m) as u64, m as u64);
        let rounds = self.params.iteration_bound(n).max(1) as f64;
        Complexity { pairs: per_round * rounds, time: per_round * rounds * m * d as f64 + rounds * (n * d) as f64 }
    }
}

/// Names accepted by [`build_extension`].
pub const EXTENSIONS: [&str; 3] = ["brute", "greedy", "peel"];

/// Builds a registered extension. `params` is needed by `peel` only.
pub fn build_extension(
    name: &str,
    spec: &ConstraintSpec,
    params: Option<&ParameterSet>,
    config: &SamplerConfig,
) -> Result<Box<dyn ExtensionAlgorithm>> {
    match name {
        "brute" => Ok(Box::new(BruteForceCompletion { spec: spec.clone() })),
        "greedy" => Ok(Box::new(FarthestPointCompletion)),
        "peel" => {
            let params = params.ok_or_else(|| Error::invalid("peel completion needs 2-means parameters"))?;
            Ok(Box::new(PeelCompletion { params: params.clone(), config: config.clone() }))
        }
        other => Err(Error::invalid(format!("unknown extension {other:?}; expected one of {}", EXTENSIONS.join(", ")))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameworkOutput {
    /// Distinct k-center tuples, in order of first appearance.
    pub tuples: Vec<Centers>,
    /// `|D|` counted with multiplicity: emitted pairs plus the single prefix.
    pub prefix_count: u64,
    /// Prefixes handed to the extension after removing duplicates.
    pub distinct_prefixes: usize,
    pub failed_prefixes: usize,
    /// `C(N_a, M) C(N_b, M) + 1`.
    pub prefix_bound: f64,
    pub truncated: bool,
    /// Declared `H(k, k-1) + (|D| - 1) H(k, k-2)`.
    pub declared_pair_bound: f64,
    #[serde(skip)]
    pub timings: Timings,
}

fn key(centers: &[Vec<f64>]) -> Vec<u64> {
    centers.iter().flat_map(|c| c.iter().map(|x| x.to_bits())).collect()
}

/// Builds the prefix set `D` and returns the union of the extension's
/// completions. Prefixes on which the extension fails are skipped (and
/// logged); if it fails on all of them the first error is returned.
pub fn run_kmeans_framework(
    points: &PointSet,
    ext: &dyn ExtensionAlgorithm,
    params: &ExtensionParams,
    seed: u64,
    cap: Option<u64>,
) -> Result<FrameworkOutput> {
    let n = points.len();
    let k = params.k;
    if n < k {
        return Err(Error::invalid(format!("n = {n} points cannot form k = {k} clusters")));
    }
    let sizes = Sizes::new(params.m, params.n_a, params.n_b)?;
    let side = |s: usize| crate::subsets::binomial(s as u64, sizes.m as u64);
    let bound = side(sizes.n_a) * side(sizes.n_b);
    if cap.is_none() && bound > UNCAPPED_LIMIT {
        return Err(Error::TooLarge {
            what: "prefix pairs without a cap",
            got: bound.min(usize::MAX as f64) as usize,
            limit: UNCAPPED_LIMIT as usize,
        });
    }
    let mut timings = Timings::default();
    let mut seen = HashSet::new();
    let mut prefixes: Vec<Centers> = Vec::new();
    let (emitted, _, truncated) = double_sampling(points, sizes, seed, cap, &mut timings, |a, b, _, _| {
        let pair = vec![a.to_vec(), b.to_vec()];
        if seen.insert(key(&pair)) {
            prefixes.push(pair);
        }
    });
    let single = vec![first_center(points, sizes.m, seed)?];
    if seen.insert(key(&single)) {
        prefixes.push(single);
    }

    let t0 = Instant::now();
    let results: Vec<Result<Vec<Centers>>> =
        prefixes.par_iter().map(|t| ext.extend(k, points, params.epsilon, t, seed)).collect();
    let mut tuples = Vec::new();
    let mut seen_tuples = HashSet::new();
    let mut failed = 0;
    let mut first_err = None;
    for (prefix, r) in prefixes.iter().zip(results) {
        match r {
            Ok(list) => {
                for t in list {
                    if t.len() != k || t.iter().any(|c| c.len() != points.dim()) {
                        return Err(Error::invalid(format!(
                            "extension {} returned a malformed tuple for a {}-center prefix",
                            ext.name(),
                            prefix.len()
                        )));
                    }
                    if seen_tuples.insert(key(&t)) {
                        tuples.push(t);
                    }
                }
            }
            Err(e) => {
                log::warn!("extension {} failed on a {}-center prefix: {e}", ext.name(), prefix.len());
                failed += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    timings.enumeration += t0.elapsed();
    if failed == prefixes.len() {
        return Err(first_err.unwrap_or(Error::Empty("prefix set")));
    }
    let d = points.dim();
    let h1 = ext.complexity(k, 1, n, d, params.epsilon).pairs;
    let h2 = ext.complexity(k, 2, n, d, params.epsilon).pairs;
    Ok(FrameworkOutput {
        tuples,
        prefix_count: emitted + 1,
        distinct_prefixes: prefixes.len(),
        failed_prefixes: failed,
        prefix_bound: bound + 1.0,
        truncated,
        declared_pair_bound: h1 + emitted as f64 * h2,
        timings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BalanceCase {
    /// The second-largest cluster is large enough to be sampled directly.
    Case1,
    Case2,
}

/// Case 1 iff `|P_2| >= delta^(1+d1) |P| / (k - 1)`, where `P_2` is the
/// second-largest cluster of `sizes`.
pub fn balance_case(sizes: &[usize], delta: f64, d1: f64) -> Result<BalanceCase> {
    let k = sizes.len();
    if k < 2 {
        return Err(Error::invalid("balance case needs at least two clusters"));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    let n: usize = sizes.iter().sum();
    let threshold = delta.powf(1.0 + d1) * n as f64 / (k - 1) as f64;
    Ok(if sorted[1] as f64 >= threshold { BalanceCase::Case1 } else { BalanceCase::Case2 })
}

/// [`balance_case`] for a labelled clustering with labels in `0..k`.
pub fn balance_case_classifier(labels: &[usize], k: usize, delta: f64, d1: f64) -> Result<BalanceCase> {
    let mut sizes = vec![0usize; k];
    for &l in labels {
        *sizes.get_mut(l).ok_or_else(|| Error::invalid(format!("label {l} out of range for k = {k}")))? += 1;
    }
    balance_case(&sizes, delta, d1)
}
