//! Exact solvers for small instances and probes of the case analysis.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{satisfies, ConstraintSpec};
use crate::error::{Error, Result};
use crate::geometry::{centroid, centroid_indexed, distance, f2_indexed, squared_distance, PointSet};
use crate::params::ParameterSet;

/// Largest `n` accepted by [`brute_opt2`].
pub const BRUTE2_LIMIT: usize = 20;
/// Largest `n` accepted by [`brute_opt_k`].
pub const BRUTEK_LIMIT: usize = 12;

const GRAY_CHUNK: u64 = 1 << 12;

/// An exact optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Cluster per point; point 0 is always in cluster 0.
    pub labels: Vec<usize>,
    /// `sum_j f2(c(P_j), P_j)`.
    pub cost: f64,
}

/// Exact `OPT_2` over all proper 2-partitions satisfying `spec`.
///
/// Partitions are bitmasks over points `1..n` (point 0 stays in cluster 0),
/// walked in Gray-code order with incremental sums. The winner's cost is
/// recomputed directly; ties go to the smaller mask.
pub fn brute_opt2(points: &PointSet, spec: &ConstraintSpec) -> Result<Optimum> {
    let n = points.len();
    if n > BRUTE2_LIMIT {
        return Err(Error::TooLarge { what: "n for exact 2-means", got: n, limit: BRUTE2_LIMIT });
    }
    if n < 2 {
        return Err(Error::invalid("a 2-partition needs at least two points"));
    }
    let d = points.dim();
    let mean = centroid(points)?;
    let centered: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    let norms: Vec<f64> = centered.iter().map(|p| p.iter().map(|x| x * x).sum()).collect();
    let total_sum: Vec<f64> = (0..d).map(|j| centered.iter().map(|p| p[j]).sum()).collect();
    let total_sq: f64 = norms.iter().sum();
    let scale = total_sq.max(f64::MIN_POSITIVE);

    let masks = 1u64 << (n - 1);
    let chunks: Vec<u64> = (1..masks).step_by(GRAY_CHUNK as usize).collect();
    let best = chunks
        .into_par_iter()
        .filter_map(|start| {
            let end = (start + GRAY_CHUNK).min(masks);
            let mut mask = start ^ (start >> 1);
            let mut sum1 = vec![0.0; d];
            let mut sq1 = 0.0;
            let mut n1 = 0usize;
            for i in 1..n {
                if mask >> (i - 1) & 1 == 1 {
                    sum1.iter_mut().zip(&centered[i]).for_each(|(s, x)| *s += x);
                    sq1 += norms[i];
                    n1 += 1;
                }
            }
            let mut best: Option<(f64, u64)> = None;
            for g in start..end {
                if g != start {
                    let bit = g.trailing_zeros() as usize;
                    mask ^= 1 << bit;
                    let p = &centered[bit + 1];
                    let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                    sum1.iter_mut().zip(p).for_each(|(s, x)| *s += sign * x);
                    sq1 += sign * norms[bit + 1];
                    n1 = (n1 as isize + sign as isize) as usize;
                }
                let n0 = n - n1;
                if !satisfies(spec, &[n0, n1]) {
                    continue;
                }
                let s1: f64 = sum1.iter().map(|x| x * x).sum();
                let s0: f64 = sum1.iter().zip(&total_sum).map(|(a, t)| (t - a) * (t - a)).sum();
                let cost = (total_sq - sq1 - s0 / n0 as f64) + (sq1 - s1 / n1 as f64);
                if is_better((cost, mask), best, scale) {
                    best = Some((cost, mask));
                }
            }
            best
        })
        .reduce_with(|a, b| if is_better(b, Some(a), scale) { b } else { a });
    let (_, mask) = best.ok_or_else(|| Error::Infeasible(format!("no 2-partition of {n} points satisfies {spec}")))?;
    let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { 1 } else { 0 }).collect();
    let cost = partition_cost(points, &labels, 2)?;
    Ok(Optimum { labels, cost })
}

fn is_better(cand: (f64, u64), best: Option<(f64, u64)>, scale: f64) -> bool {
    match best {
        None => true,
        Some((b, m)) => {
            let tol = 1e-12 * scale;
            cand.0 < b - tol || (cand.0 <= b + tol && cand.1 < m)
        }
    }
}

/// Cost of a labelled partition at its own centroids. Empty clusters add 0.
pub fn partition_cost(points: &PointSet, labels: &[usize], k: usize) -> Result<f64> {
    if labels.len() != points.len() {
        return Err(Error::invalid(format!("{} labels for {} points", labels.len(), points.len())));
    }
    let mut members = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members.get_mut(l).ok_or_else(|| Error::invalid(format!("label {l} out of range for k = {k}")))?.push(i);
    }
    let mut cost = 0.0;
    for m in members.iter().filter(|m| !m.is_empty()) {
        cost += f2_indexed(&centroid_indexed(points, m)?, points, m)?;
    }
    Ok(cost)
}

/// Exact `OPT_k` by enumerating set partitions into exactly `k` blocks
/// (restricted growth strings, so each partition is seen once).
pub fn brute_opt_k(points: &PointSet, k: usize, spec: &ConstraintSpec) -> Result<Optimum> {
    let n = points.len();
    if n > BRUTEK_LIMIT {
        return Err(Error::TooLarge { what: "n for exact k-means", got: n, limit: BRUTEK_LIMIT });
    }
    if k == 0 || k > n {
        return Err(Error::invalid(format!("k = {k} must lie in 1..={n}")));
    }
    let mut labels = vec![0usize; n];
    let mut best: Option<Optimum> = None;
    fn walk(
        i: usize,
        used: usize,
        k: usize,
        labels: &mut Vec<usize>,
        points: &PointSet,
        spec: &ConstraintSpec,
        best: &mut Option<Optimum>,
    ) -> Result<()> {
        let n = labels.len();
        if n - i < k - used {
            return Ok(());
        }
        if i == n {
            let mut sizes = vec![0; k];
            labels.iter().for_each(|&l| sizes[l] += 1);
            if satisfies(spec, &sizes) {
                let cost = partition_cost(points, labels, k)?;
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    *best = Some(Optimum { labels: labels.clone(), cost });
                }
            }
            return Ok(());
        }
        for l in 0..=used.min(k - 1) {
            labels[i] = l;
            walk(i + 1, used.max(l + 1), k, labels, points, spec, best)?;
        }
        Ok(())
    }
    walk(0, 0, k, &mut labels, points, spec, &mut best)?;
    best.ok_or_else(|| Error::Infeasible(format!("no {k}-partition of {n} points satisfies {spec}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Few points of the smaller cluster lie outside the ball `B_2`.
    Case1,
    Case2,
}

/// Quantities of the case analysis for one instance and first center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisProbe {
    /// `sqrt(eps / (alpha5 beta2)) sigma_opt`.
    pub r2: f64,
    /// Points within `r2` of `c1`.
    pub b2: Vec<usize>,
    pub p2_out_size: usize,
    pub p2_in_size: usize,
    pub case: Case,
    pub beta2: f64,
    pub sigma_opt: f64,
    /// Cost of the ground-truth partition.
    pub opt: f64,
}

/// The ground truth split into the larger cluster `P_1` and smaller `P_2`.
struct Split {
    p1: Vec<usize>,
    p2: Vec<usize>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    f1: f64,
    f2: f64,
}

impl Split {
    fn new(points: &PointSet, labels: &[usize]) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::invalid(format!("{} labels for {} points", labels.len(), points.len())));
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, &l) in labels.iter().enumerate() {
            match l {
                0 => a.push(i),
                1 => b.push(i),
                _ => return Err(Error::invalid(format!("ground-truth label {l} is not 0 or 1"))),
            }
        }
        if a.is_empty() || b.is_empty() {
            return Err(Error::invalid("ground truth has an empty cluster"));
        }
        let (p1, p2) = if b.len() > a.len() { (b, a) } else { (a, b) };
        let m1 = centroid_indexed(points, &p1)?;
        let m2 = centroid_indexed(points, &p2)?;
        let f1 = f2_indexed(&m1, points, &p1)?;
        let f2 = f2_indexed(&m2, points, &p2)?;
        Ok(Split { p1, p2, m1, m2, f1, f2 })
    }
}

fn check_center(points: &PointSet, c: &[f64]) -> Result<()> {
    if c.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: c.len() });
    }
    Ok(())
}

fn probe_split(points: &PointSet, split: &Split, c1: &[f64], ps: &ParameterSet) -> AnalysisProbe {
    let n = points.len() as f64;
    let opt = split.f1 + split.f2;
    let sigma_opt = (opt / n).sqrt();
    let beta2 = split.p2.len() as f64 / n;
    let r2 = (ps.epsilon / (ps.alpha5 * beta2)).sqrt() * sigma_opt;
    let b2: Vec<usize> = (0..points.len()).filter(|&i| distance(points.point(i), c1) <= r2).collect();
    let p2_in_size = split.p2.iter().filter(|&&i| distance(points.point(i), c1) <= r2).count();
    let p2_out_size = split.p2.len() - p2_in_size;
    let case = if (p2_out_size as f64) < ps.epsilon / ps.alpha1 * beta2 * n { Case::Case1 } else { Case::Case2 };
    AnalysisProbe { r2, b2, p2_out_size, p2_in_size, case, beta2, sigma_opt, opt }
}

/// Computes `r2`, `B2`, `|P2_out|`, `|P2_in|` and the case for a ground-truth
/// 2-partition (`labels` in {0, 1}) and a first center `c1`.
pub fn probe(points: &PointSet, labels: &[usize], c1: &[f64], ps: &ParameterSet) -> Result<AnalysisProbe> {
    check_center(points, c1)?;
    let split = Split::new(points, labels)?;
    Ok(probe_split(points, &split, c1, ps))
}

/// One inequality `lhs <= rhs` of the case analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    /// The hypotheses do not hold on this instance, so the check says nothing.
    pub vacuous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub case: Case,
    /// `||c1 - m1||^2 <= eps (1 + eta) sigma1^2 / alpha6`.
    pub c1_quality: bool,
    /// The first-center precondition as an inequality. When it fails, every
    /// check that depends on it is vacuous.
    pub precondition: LemmaCheck,
    /// `||m2~ - c2||^2 <= (eps / alpha6) f2(m2~, P2~) / |P2|`.
    pub c2_closeness: bool,
    pub probe: AnalysisProbe,
    pub lemmas: Vec<LemmaCheck>,
}

impl LemmaReport {
    /// Every non-vacuous check passed.
    pub fn all_pass(&self) -> bool {
        self.lemmas.iter().all(|l| l.vacuous || l.pass)
    }

    pub fn failures(&self) -> Vec<&LemmaCheck> {
        self.lemmas.iter().filter(|l| !l.vacuous && !l.pass).collect()
    }

    pub fn get(&self, name: &str) -> Option<&LemmaCheck> {
        self.lemmas.iter().find(|l| l.name == name)
    }
}

/// `lhs <= rhs` up to rounding.
pub fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + 1e-9 * rhs.abs().max(1.0)
}

/// Evaluates every deterministic inequality of the two-case analysis on one
/// instance. Each check carries its own hypotheses; when they fail it is
/// reported as vacuous instead of passed or failed.
pub fn check_case_lemmas(
    points: &PointSet,
    labels: &[usize],
    c1: &[f64],
    c2: &[f64],
    ps: &ParameterSet,
) -> Result<LemmaReport> {
    check_center(points, c1)?;
    check_center(points, c2)?;
    let split = Split::new(points, labels)?;
    let pr = probe_split(points, &split, c1, ps);
    let eps = ps.epsilon;
    let (a1, a5, a6) = (ps.alpha1, ps.alpha5, ps.alpha6);
    let opt = pr.opt;
    let p2_len = split.p2.len() as f64;
    let sigma1_sq = split.f1 / split.p1.len() as f64;
    let sigma2 = (split.f2 / p2_len).sqrt();

    let in_ball = |i: &usize| distance(points.point(*i), c1) <= pr.r2;
    let p2_in: Vec<usize> = split.p2.iter().copied().filter(in_ball).collect();
    let p2_out: Vec<usize> = split.p2.iter().copied().filter(|i| !in_ball(i)).collect();

    // P2~: P2_out plus one copy of c1 per point of P2_in.
    let d = points.dim();
    let mut tilde_sum = vec![0.0; d];
    for &i in &p2_out {
        tilde_sum.iter_mut().zip(points.point(i)).for_each(|(s, x)| *s += x);
    }
    tilde_sum.iter_mut().zip(c1).for_each(|(s, c)| *s += p2_in.len() as f64 * c);
    let m2_tilde: Vec<f64> = tilde_sum.iter().map(|s| s / p2_len).collect();
    let f2_tilde = f2_indexed(&m2_tilde, points, &p2_out)? + p2_in.len() as f64 * squared_distance(c1, &m2_tilde);

    let (c1_gap, c1_bound) = (squared_distance(c1, &split.m1), eps * (1.0 + ps.eta) * sigma1_sq / a6);
    let c1_quality = holds(c1_gap, c1_bound);
    let precondition =
        LemmaCheck { name: "c1_quality".into(), lhs: c1_gap, rhs: c1_bound, pass: c1_quality, vacuous: false };
    let c2_closeness = holds(squared_distance(&m2_tilde, c2), eps / a6 * f2_tilde / p2_len);
    let case1 = pr.case == Case::Case1;
    let case2 = !case1;

    let f_c1_p1 = f2_indexed(c1, points, &split.p1)?;
    let f_c1_p2 = f2_indexed(c1, points, &split.p2)?;
    let f_c2_p2 = f2_indexed(c2, points, &split.p2)?;

    let mut lemmas = Vec::new();
    let mut push = |name: &str, lhs: f64, rhs: f64, hyp: bool| {
        lemmas.push(LemmaCheck { name: name.into(), lhs, rhs, pass: holds(lhs, rhs), vacuous: !hyp });
    };

    push("f2_upper", f_c1_p1, (1.0 + eps * (1.0 + ps.eta) / a6) * split.f1, c1_quality);

    let (m2_in_gap, m2_in_c1) = if p2_in.is_empty() {
        (0.0, 0.0)
    } else {
        let m2_in = centroid_indexed(points, &p2_in)?;
        (distance(&split.m2, &m2_in), distance(&m2_in, c1))
    };
    push("m2_in_shift", m2_in_gap, (eps / (a1 - eps)).sqrt() * sigma2, case1 && !p2_in.is_empty());
    push("m2_in_radius", m2_in_c1, pr.r2, case1 && !p2_in.is_empty());
    push("case1_f2_bound", f_c1_p2, split.f2 * (1.0 + 2.0 * eps / (a1 - eps)) + 2.0 * eps / a5 * opt, case1);
    let paper_constants = ps.violations.is_empty();
    push("case1_ratio", f_c1_p1 + f_c1_p2, (1.0 + eps) * opt, case1 && c1_quality && paper_constants);

    let outside = points.len() - pr.b2.len();
    let ratio = if outside == 0 { f64::INFINITY } else { p2_out.len() as f64 / outside as f64 };
    push("out_fraction", eps * eps / ps.alpha2, ratio, case2 && c1_quality && eps <= ps.eps1);
    push("m2_tilde_shift", distance(&split.m2, &m2_tilde), (1.0 - eps / a1) * pr.r2, case2);
    push(
        "f2_tilde_bound",
        f2_tilde,
        2.0 * split.f2 + a6 * pr.beta2 * points.len() as f64 * pr.r2 * pr.r2,
        case2 && a6 >= 4.0,
    );
    push(
        "case2_f2_bound",
        f_c2_p2,
        (1.0 + 4.0 * eps / a6) * split.f2 + (2.0 * eps / a5 + 2.0 * eps * eps / a5) * opt,
        case2 && c2_closeness,
    );
    push(
        "case2_ratio",
        f_c1_p1 + f_c2_p2,
        (1.0 + eps) * opt,
        case2 && c1_quality && c2_closeness && eps <= ps.delta / 4.0 && paper_constants,
    );

    Ok(LemmaReport { case: pr.case, c1_quality, precondition, c2_closeness, probe: pr, lemmas })
}

/// `1 - x y <= (1 - x)^y`.
pub fn ex_inequality(x: f64, y: f64) -> bool {
    holds(1.0 - x * y, (1.0 - x).powf(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::assign;
    use crate::params::Overrides;
    use crate::rng::substream;
    use rand::Rng;

    fn pts(v: &[f64]) -> PointSet {
        PointSet::new(v.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn naive_opt2(points: &PointSet, spec: &ConstraintSpec) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1u64..(1 << (n - 1)) {
            let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { 1 } else { 0 }).collect();
            let n1 = labels.iter().sum::<usize>();
            if satisfies(spec, &[n - n1, n1]) {
                best = best.min(partition_cost(points, &labels, 2).unwrap());
            }
        }
        best
    }

    #[test]
    fn four_points_on_a_line() {
        let o = brute_opt2(&pts(&[0.0, 1.0, 9.0, 10.0]), &ConstraintSpec::Unconstrained).unwrap();
        assert_eq!(o.labels, vec![0, 0, 1, 1]);
        assert_eq!(o.cost, 1.0);
    }

    #[test]
    fn identical_points_cost_nothing() {
        let o = brute_opt2(&pts(&[3.0, 3.0]), &ConstraintSpec::Unconstrained).unwrap();
        assert_eq!(o.cost, 0.0);
        assert_eq!(o.labels, vec![0, 1]);
    }

    #[test]
    fn refuses_large_and_tiny_instances() {
        let big = pts(&[0.0; 21]);
        assert!(matches!(brute_opt2(&big, &ConstraintSpec::Unconstrained), Err(Error::TooLarge { .. })));
        assert!(brute_opt2(&pts(&[1.0]), &ConstraintSpec::Unconstrained).is_err());
        assert!(brute_opt_k(&pts(&[0.0; 13]), 3, &ConstraintSpec::Unconstrained).is_err());
    }

    #[test]
    fn gray_code_matches_naive_enumeration() {
        let mut rng = substream(5, 0);
        for n in 2..=9 {
            let p = PointSet::new(
                (0..n).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(1e3..1e3 + 4.0)]).collect(),
            )
            .unwrap();
            for spec in [ConstraintSpec::Unconstrained, ConstraintSpec::balanced(1.0).unwrap()] {
                let naive = naive_opt2(&p, &spec);
                match brute_opt2(&p, &spec) {
                    Ok(o) => {
                        assert!((o.cost - naive).abs() <= 1e-9 * naive.max(1.0), "n={n}: {} vs {naive}", o.cost);
                        assert!((partition_cost(&p, &o.labels, 2).unwrap() - o.cost).abs() < 1e-12);
                    }
                    Err(_) => assert!(naive.is_infinite()),
                }
            }
        }
    }

    #[test]
    fn optimum_is_a_lloyd_fixed_point() {
        let mut rng = substream(6, 0);
        for _ in 0..20 {
            let p =
                PointSet::new((0..9).map(|_| vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]).collect())
                    .unwrap();
            let o = brute_opt2(&p, &ConstraintSpec::Unconstrained).unwrap();
            let stats = crate::geometry::ClusteringStats::from_labels(&p, &o.labels, 2).unwrap();
            let r = assign(&p, &stats.centroids, &ConstraintSpec::Unconstrained).unwrap();
            assert!((r.cost - o.cost).abs() <= 1e-9 * o.cost.max(1.0));
        }
    }

    #[test]
    fn opt_k_with_k2_agrees_with_opt2() {
        let mut rng = substream(7, 0);
        let p = PointSet::new((0..8).map(|_| vec![rng.random_range(-5.0..5.0)]).collect()).unwrap();
        let a = brute_opt2(&p, &ConstraintSpec::Unconstrained).unwrap();
        let b = brute_opt_k(&p, 2, &ConstraintSpec::Unconstrained).unwrap();
        assert!((a.cost - b.cost).abs() < 1e-9);
        let three = brute_opt_k(&pts(&[0.0, 0.5, 10.0, 10.5, 20.0, 20.5]), 3, &ConstraintSpec::Unconstrained).unwrap();
        assert_eq!(three.labels, vec![0, 0, 1, 1, 2, 2]);
        assert!((three.cost - 0.375).abs() < 1e-12);
    }

    fn ps(eps: f64) -> ParameterSet {
        ParameterSet::resolve(eps, &Overrides::default()).unwrap()
    }

    #[test]
    fn probe_on_a_contained_cluster() {
        // P2 sits on c1, so every point of P2 is inside the ball.
        let p = pts(&[0.0, 0.1, 0.2, 5.0, 5.0]);
        let labels = [0, 0, 0, 1, 1];
        let pr = probe(&p, &labels, &[5.0], &ps(0.05)).unwrap();
        assert_eq!(pr.p2_out_size, 0);
        assert_eq!(pr.p2_in_size, 2);
        assert_eq!(pr.case, Case::Case1);
    }

    #[test]
    fn probe_radius_by_formula() {
        // Balanced instance: beta2 = 1/2, c1 = m1.
        let p = pts(&[0.0, 2.0, 10.0, 12.0]);
        let pr = probe(&p, &[0, 0, 1, 1], &[1.0], &ps(0.05)).unwrap();
        // OPT = 4, sigma_opt = 1, r2 = sqrt(0.05 / (alpha5 / 2)).
        assert!((pr.sigma_opt - 1.0).abs() < 1e-15);
        assert!((pr.r2 - 0.149_967_689_181_622_84).abs() < 1e-15, "{}", pr.r2);
        assert_eq!(pr.case, Case::Case2);
        assert_eq!(pr.p2_out_size, 2);
    }

    #[test]
    fn probe_rejects_bad_ground_truth() {
        let p = pts(&[0.0, 1.0]);
        assert!(probe(&p, &[0, 0], &[0.0], &ps(0.1)).is_err());
        assert!(probe(&p, &[0, 2], &[0.0], &ps(0.1)).is_err());
        assert!(probe(&p, &[0, 1], &[0.0, 1.0], &ps(0.1)).is_err());
    }

    #[test]
    fn case2_instance_satisfies_every_check() {
        let mut rows = Vec::new();
        for i in 0..30 {
            rows.push(vec![(i % 5) as f64 * 0.1, (i / 5) as f64 * 0.1]);
        }
        for i in 0..10 {
            rows.push(vec![20.0 + (i % 3) as f64 * 0.1, (i / 3) as f64 * 0.1]);
        }
        let p = PointSet::new(rows).unwrap();
        let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 30)).collect();
        let stats = crate::geometry::ClusteringStats::from_labels(&p, &labels, 2).unwrap();
        let params = ps(0.02);
        let report = check_case_lemmas(&p, &labels, &stats.centroids[0], &stats.centroids[1], &params).unwrap();
        assert_eq!(report.case, Case::Case2);
        assert!(report.c1_quality);
        assert!(report.c2_closeness);
        assert!(report.all_pass(), "{:?}", report.failures());
        assert!(report.lemmas.iter().filter(|l| !l.vacuous).count() >= 6);
        let ratio = report.get("out_fraction").unwrap();
        assert!(!ratio.vacuous && ratio.pass);
    }

    #[test]
    fn case1_with_shared_center() {
        // P2 is a tight group right next to m1: B2 covers it.
        let mut rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64 - 3.5, (i / 8) as f64 - 2.0]).collect();
        rows.extend((0..4).map(|i| vec![0.001 * i as f64, 0.0]));
        let p = PointSet::new(rows).unwrap();
        let labels: Vec<usize> = (0..44).map(|i| usize::from(i >= 40)).collect();
        let stats = crate::geometry::ClusteringStats::from_labels(&p, &labels, 2).unwrap();
        let c1 = stats.centroids[0].clone();
        let report = check_case_lemmas(&p, &labels, &c1, &c1, &ps(0.05)).unwrap();
        assert_eq!(report.case, Case::Case1);
        assert!(report.all_pass(), "{:?}", report.failures());
        assert!(!report.get("case1_f2_bound").unwrap().vacuous);
        assert!(!report.get("case1_ratio").unwrap().vacuous);
    }

    #[test]
    fn poor_first_center_is_vacuous_not_failed() {
        let p = pts(&[0.0, 1.0, 9.0, 10.0, 11.0]);
        let report = check_case_lemmas(&p, &[1, 1, 0, 0, 0], &[100.0], &[0.5], &ps(0.05)).unwrap();
        assert!(!report.c1_quality);
        assert!(!report.precondition.pass);
        assert!(report.all_pass());
        assert!(report.get("c1_quality").is_none());
        assert!(report.get("f2_upper").unwrap().vacuous);
        assert!(report.get("case2_ratio").unwrap().vacuous);
    }

    #[test]
    fn ex_inequality_on_a_grid() {
        for i in 0..=100 {
            for j in 0..=90 {
                let (x, y) = (i as f64 / 100.0, 1.0 + j as f64 / 10.0);
                assert!(ex_inequality(x, y), "x={x} y={y}");
            }
        }
    }
}
