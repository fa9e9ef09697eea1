//! Candidate-center generation for constrained 2-means.
//!
//! Phase 1 draws two samples `S_a` (`N_a` points) and `S_b` (`N_b` points)
//! and pairs the centroid of every `M`-subset of `S_a` with that of every
//! `M`-subset of `S_b`. Phase 2 fixes `c1 = c(V_a)` for an `M`-point sample
//! and repeatedly
//!
//! 1. draws `V_b` (`N_2` points) from the current region `Q_j`,
//! 2. pairs `c1` with the centroid of every `M`-sub-multiset of
//!    `V_b + {M copies of c(V_b)}`,
//! 3. keeps the `ceil(|Q_j| / (1 + varsigma))` points of `Q_j` farthest from
//!    a vibrated copy of `c1`.
//!
//! All samples are drawn uniformly with replacement. Each phase (and each
//! peeling round) reads its own labelled substream of the seed, so a run is
//! bit-for-bit reproducible.
//!
//! Enumerations larger than the optional cap are truncated: instead of index
//! subsets, a seeded uniform selection of distinct sub-multisets is used (see
//! [`crate::subsets::select_distinct`]) and the result is marked `truncated`.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{centroid_indexed, farthest_k, vibrate_indexed, PointSet};
use crate::params::ParameterSet;
use crate::rng::{label, substream, StreamRng};
use crate::subsets::{binomial, select_distinct, Combinations};

/// Upper limit on any single sample size.
pub const MAX_SAMPLE: usize = 1 << 26;

/// Centroids of one side are cached when there are at most this many.
const SIDE_CACHE_LIMIT: f64 = (1u64 << 20) as f64;

/// Where a candidate pair came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase")]
pub enum Provenance {
    /// `(c(H1), c(H2))`; subsets are positions in `S_a` and `S_b`.
    #[serde(rename = "phase1")]
    Phase1 { subset_a: Vec<usize>, subset_b: Vec<usize> },
    /// The pair `(c1, c1)`.
    #[serde(rename = "bare")]
    Bare,
    /// `(c1, c(H'))` from peeling round `iter`: `subset` holds positions in
    /// `V_b`, completed by `copies` copies of `c(V_b)`.
    #[serde(rename = "phase2")]
    Phase2 {
        #[serde(rename = "iter")]
        iteration: usize,
        copies: usize,
        subset: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    #[serde(flatten)]
    pub provenance: Provenance,
}

/// Borrowed view of a candidate, handed to streaming consumers.
#[derive(Debug, Clone, Copy)]
pub struct CandidateRef<'a> {
    pub c1: &'a [f64],
    pub c2: &'a [f64],
    pub provenance: ProvenanceRef<'a>,
}

#[derive(Debug, Clone, Copy)]
pub enum ProvenanceRef<'a> {
    Phase1 { subset_a: &'a [usize], subset_b: &'a [usize] },
    Bare,
    Phase2 { iteration: usize, copies: usize, subset: &'a [usize] },
}

impl CandidateRef<'_> {
    pub fn to_owned(&self) -> CandidatePair {
        let provenance = match self.provenance {
            ProvenanceRef::Phase1 { subset_a, subset_b } => {
                Provenance::Phase1 { subset_a: subset_a.to_vec(), subset_b: subset_b.to_vec() }
            }
            ProvenanceRef::Bare => Provenance::Bare,
            ProvenanceRef::Phase2 { iteration, copies, subset } => {
                Provenance::Phase2 { iteration, copies, subset: subset.to_vec() }
            }
        };
        CandidatePair { c1: self.c1.to_vec(), c2: self.c2.to_vec(), provenance }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Largest enumeration (phase 1 as a whole, each peeling round
    /// separately) that is run exhaustively.
    pub cap: Option<u64>,
    /// Skip the perturbation of `c1` before each peel; ties then fall back to
    /// point index order.
    pub no_vibrate: bool,
    /// Keep every region `Q_j` in [`RunSummary::regions`].
    pub record_regions: bool,
}

impl SamplerConfig {
    pub fn capped(cap: u64) -> Self {
        SamplerConfig { cap: Some(cap), ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    /// Drawing `S_a`, `S_b`, `V_a` and every `V_b`.
    pub sampling: Duration,
    /// Vibration plus selection of the farthest points, over all rounds.
    pub peeling: Duration,
    /// Subset enumeration and centroid computation.
    pub enumeration: Duration,
}

/// Bookkeeping of one sampler run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub phase1_count: u64,
    pub phase2_count: u64,
    pub phase_iterations: usize,
    pub truncated: bool,
    /// `C(N_a, M) * C(N_b, M)`.
    pub phase1_bound: f64,
    /// Candidates in an untruncated round, `sum_t C(N_2, M - t)`.
    pub phase2_round_bound: f64,
    /// `ceil(ln n / ln(1 + varsigma))`.
    pub iteration_bound: usize,
    /// `|Q_j|` at the start of each round.
    pub region_sizes: Vec<usize>,
    /// The first approximate center `c1 = c(V_a)`.
    pub first_center: Vec<f64>,
    #[serde(skip)]
    pub regions: Option<Vec<Vec<usize>>>,
    #[serde(skip)]
    pub timings: Timings,
}

/// Materialised output list `U`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub pairs: Vec<CandidatePair>,
    pub phase1_count: u64,
    pub phase2_count: u64,
    pub phase_iterations: usize,
    pub truncated: bool,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Wraps an externally produced list (e.g. read back from JSONL).
    pub fn from_pairs(pairs: Vec<CandidatePair>) -> Self {
        let phase1_count = pairs.iter().filter(|p| matches!(p.provenance, Provenance::Phase1 { .. })).count() as u64;
        let phase2_count = pairs.iter().filter(|p| matches!(p.provenance, Provenance::Phase2 { .. })).count() as u64;
        let phase_iterations = pairs
            .iter()
            .filter_map(|p| match p.provenance {
                Provenance::Phase2 { iteration, .. } => Some(iteration + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        CandidateSet { pairs, phase1_count, phase2_count, phase_iterations, truncated: false }
    }
}

pub(crate) fn count_param(value: f64, name: &'static str) -> Result<usize> {
    if !(value >= 1.0) || value.fract() != 0.0 {
        return Err(Error::invalid(format!("{name} = {value} must be a positive integer")));
    }
    if value > MAX_SAMPLE as f64 {
        return Err(Error::TooLarge { what: name, got: value.min(usize::MAX as f64) as usize, limit: MAX_SAMPLE });
    }
    Ok(value as usize)
}

pub(crate) fn draw_uniform(rng: &mut StreamRng, pool: &[usize], count: usize) -> Vec<usize> {
    (0..count).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

pub(crate) fn draw_from_all(rng: &mut StreamRng, n: usize, count: usize) -> Vec<usize> {
    (0..count).map(|_| rng.random_range(0..n)).collect()
}

/// Groups a sample (point indices, with repeats) by distinct point.
/// Returns the distinct points in first-appearance order and, per point, the
/// sample positions holding it.
pub(crate) fn group_sample(sample: &[usize]) -> (Vec<usize>, Vec<Vec<usize>>) {
    let mut order = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let mut positions: Vec<Vec<usize>> = Vec::new();
    for (pos, &p) in sample.iter().enumerate() {
        let s = *slot.entry(p).or_insert_with(|| {
            order.push(p);
            positions.push(Vec::new());
            positions.len() - 1
        });
        positions[s].push(pos);
    }
    (order, positions)
}

/// Sample positions realising a per-type count vector (first occurrences).
pub(crate) fn positions_for(counts: &[usize], positions: &[Vec<usize>]) -> Vec<usize> {
    let mut out: Vec<usize> = counts.iter().zip(positions).flat_map(|(&c, pos)| pos[..c].iter().copied()).collect();
    out.sort_unstable();
    out
}

fn sum_into(points: &PointSet, sample: &[usize], subset: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for &pos in subset {
        for (o, x) in out.iter_mut().zip(points.point(sample[pos])) {
            *o += x;
        }
    }
}

/// One side of phase 1: the M-subsets (positions in the sample) to pair.
enum SideList {
    /// All index subsets, enumerated on the fly.
    Exhaustive,
    /// Explicit list of subsets with their centroids.
    Listed(Vec<(Vec<usize>, Vec<f64>)>),
}

fn list_side(points: &PointSet, sample: &[usize], m: usize, selection: Option<(usize, &mut StreamRng)>) -> SideList {
    let d = points.dim();
    match selection {
        None => SideList::Exhaustive,
        Some((budget, rng)) => {
            let (distinct, positions) = group_sample(sample);
            let mult: Vec<usize> = positions.iter().map(Vec::len).collect();
            let chosen = select_distinct(&mult, m, budget, rng);
            SideList::Listed(
                chosen
                    .into_iter()
                    .map(|counts| {
                        let mut c = vec![0.0; d];
                        for (&k, &p) in counts.iter().zip(&distinct) {
                            for (o, x) in c.iter_mut().zip(points.point(p)) {
                                *o += k as f64 * x;
                            }
                        }
                        c.iter_mut().for_each(|x| *x /= m as f64);
                        (positions_for(&counts, &positions), c)
                    })
                    .collect(),
            )
        }
    }
}

/// Enumerates the centroids of every `m`-element sub-multiset of
/// `V + {copies x extra}`: for `t = 0..=min(copies, m)`, every `(m - t)`-subset
/// of `V` combined with `t` copies of `extra`. `V` is given as point indices
/// into `points`; the callback receives `(centroid, t, subset positions in V)`.
/// Returns the number of centroids produced, `sum_t C(|V|, m - t)`.
pub fn enumerate_multiset_subsets<F>(
    points: &PointSet,
    v: &[usize],
    extra: &[f64],
    copies: usize,
    m: usize,
    mut f: F,
) -> Result<u64>
where
    F: FnMut(&[f64], usize, &[usize]),
{
    if extra.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: extra.len() });
    }
    if m == 0 || m > v.len() + copies {
        return Err(Error::invalid(format!("subset size {m} must lie in 1..={} (|V| + copies)", v.len() + copies)));
    }
    let d = points.dim();
    let mut sum = vec![0.0; d];
    let mut c = vec![0.0; d];
    let mut count = 0u64;
    for t in 0..=copies.min(m) {
        if m - t > v.len() {
            continue;
        }
        let mut it = Combinations::new(v.len(), m - t);
        while let Some(sub) = it.next() {
            sum_into(points, v, sub, &mut sum);
            for ((ci, si), ei) in c.iter_mut().zip(&sum).zip(extra) {
                *ci = (si + t as f64 * ei) / m as f64;
            }
            f(&c, t, sub);
            count += 1;
        }
    }
    Ok(count)
}

/// Result of one peeling step.
#[derive(Debug, Clone, PartialEq)]
pub struct PeelStep {
    /// `d_j`, the distance of the last kept point from `center`.
    pub threshold: f64,
    /// The kept points (indices into the point set), in input order.
    pub kept: Vec<usize>,
    /// Center the distances were measured from (`c1` or its vibrated copy).
    pub center: Vec<f64>,
}

/// Number of points kept by a peel of `len` points:
/// `min(ceil(len / (1 + varsigma)), len - 1)`, and at least 1.
pub fn peel_target(len: usize, varsigma: f64) -> usize {
    let k = (len as f64 / (1.0 + varsigma)).ceil() as usize;
    k.min(len.saturating_sub(1)).max(1)
}

/// Keeps the `peel_target(|Q|)` points of `active` farthest from `c1`.
///
/// With at least 3 points `c1` is vibrated first so that distances are
/// pairwise distinct. If the vibration is degenerate (duplicate points at
/// `c1`) the unperturbed center is used and ties go to lower indices.
pub fn peel<R: Rng + ?Sized>(
    points: &PointSet,
    active: &[usize],
    c1: &[f64],
    varsigma: f64,
    eta: Option<f64>,
    rng: &mut R,
) -> Result<PeelStep> {
    if active.is_empty() {
        return Err(Error::Empty("peel of an empty region"));
    }
    if c1.len() != points.dim() {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: c1.len() });
    }
    if !(varsigma > 0.0) {
        return Err(Error::invalid(format!("varsigma = {varsigma} must be positive")));
    }
    let center = match eta {
        Some(eta) if active.len() >= 3 => match vibrate_indexed(c1, points, active, eta, rng) {
            Ok(c) => c,
            Err(Error::Degenerate(_)) => c1.to_vec(),
            Err(e) => return Err(e),
        },
        _ => c1.to_vec(),
    };
    let k = peel_target(active.len(), varsigma);
    let (thr_sq, kept) = farthest_k(&center, points, active, k);
    Ok(PeelStep { threshold: thr_sq.sqrt(), kept, center })
}

/// Peel of a whole point set; returns `d_j` and the kept points.
pub fn peel_set<R: Rng + ?Sized>(
    q: &PointSet,
    c1: &[f64],
    varsigma: f64,
    eta: f64,
    rng: &mut R,
) -> Result<(f64, PointSet)> {
    let all: Vec<usize> = (0..q.len()).collect();
    let step = peel(q, &all, c1, varsigma, Some(eta), rng)?;
    Ok((step.threshold, q.subset(&step.kept)))
}

/// Sizes of one run, validated against the point set.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Sizes {
    pub m: usize,
    pub n_a: usize,
    pub n_b: usize,
}

impl Sizes {
    pub fn new(m: f64, n_a: f64, n_b: f64) -> Result<Self> {
        let s = Sizes { m: count_param(m, "M")?, n_a: count_param(n_a, "N_a")?, n_b: count_param(n_b, "N_b")? };
        if s.n_a < s.m || s.n_b < s.m {
            return Err(Error::invalid(format!(
                "sample sizes N_a = {}, N_b = {} must be at least M = {}",
                s.n_a, s.n_b, s.m
            )));
        }
        Ok(s)
    }
}

/// Phase 1 shared with the k-means framework: pairs centroids of
/// `M`-subsets of `S_a` and `S_b`. Returns `(emitted, bound, truncated)`.
pub(crate) fn double_sampling<F>(
    points: &PointSet,
    sizes: Sizes,
    seed: u64,
    cap: Option<u64>,
    timings: &mut Timings,
    mut emit: F,
) -> (u64, f64, bool)
where
    F: FnMut(&[f64], &[f64], &[usize], &[usize]),
{
    let n = points.len();
    let d = points.dim();
    let m = sizes.m;
    let t0 = Instant::now();
    let s_a = draw_from_all(&mut substream(seed, label::SAMPLE_A), n, sizes.n_a);
    let s_b = draw_from_all(&mut substream(seed, label::SAMPLE_B), n, sizes.n_b);
    timings.sampling += t0.elapsed();

    let t1 = Instant::now();
    let side_a = binomial(sizes.n_a as u64, m as u64);
    let side_b = binomial(sizes.n_b as u64, m as u64);
    let bound = side_a * side_b;
    let truncated = matches!(cap, Some(c) if bound > c as f64);

    let (list_a, list_b) = if truncated {
        let cap = cap.unwrap_or(u64::MAX).max(1) as f64;
        let (ga, gb) = (group_sample(&s_a).1, group_sample(&s_b).1);
        let total = |g: &Vec<Vec<usize>>| {
            crate::subsets::SubmultisetTable::new(&g.iter().map(Vec::len).collect::<Vec<_>>(), m).total()
        };
        let (ta, tb) = (total(&ga), total(&gb));
        let root = cap.sqrt().floor().max(1.0);
        let (ba, bb) = if ta <= root {
            (ta, (cap / ta.max(1.0)).floor())
        } else if tb <= root {
            ((cap / tb.max(1.0)).floor(), tb)
        } else {
            (root, root)
        };
        let mut ra = substream(seed, label::TRUNCATE_A);
        let mut rb = substream(seed, label::TRUNCATE_B);
        (
            list_side(points, &s_a, m, Some((ba.max(1.0) as usize, &mut ra))),
            list_side(points, &s_b, m, Some((bb.max(1.0) as usize, &mut rb))),
        )
    } else {
        let b = if side_b <= SIDE_CACHE_LIMIT {
            let mut cached = Vec::with_capacity(side_b as usize);
            let mut it = Combinations::new(s_b.len(), m);
            while let Some(sub) = it.next() {
                let mut c = vec![0.0; d];
                sum_into(points, &s_b, sub, &mut c);
                c.iter_mut().for_each(|x| *x /= m as f64);
                cached.push((sub.to_vec(), c));
            }
            SideList::Listed(cached)
        } else {
            SideList::Exhaustive
        };
        (list_side(points, &s_a, m, None), b)
    };

    let mut emitted = 0u64;
    let mut ca = vec![0.0; d];
    let mut cb = vec![0.0; d];
    let mut inner = |ca: &[f64], sub_a: &[usize], emitted: &mut u64| match &list_b {
        SideList::Listed(items) => {
            for (sub_b, cb) in items {
                emit(ca, cb, sub_a, sub_b);
                *emitted += 1;
            }
        }
        SideList::Exhaustive => {
            let mut it = Combinations::new(s_b.len(), m);
            while let Some(sub_b) = it.next() {
                sum_into(points, &s_b, sub_b, &mut cb);
                cb.iter_mut().for_each(|x| *x /= m as f64);
                emit(ca, &cb, sub_a, sub_b);
                *emitted += 1;
            }
        }
    };
    match &list_a {
        SideList::Listed(items) => {
            for (sub_a, c) in items {
                inner(c, sub_a, &mut emitted);
            }
        }
        SideList::Exhaustive => {
            let mut it = Combinations::new(s_a.len(), m);
            while let Some(sub_a) = it.next() {
                sum_into(points, &s_a, sub_a, &mut ca);
                ca.iter_mut().for_each(|x| *x /= m as f64);
                inner(&ca, sub_a, &mut emitted);
            }
        }
    }
    timings.enumeration += t1.elapsed();
    (emitted, bound, truncated)
}

/// Draws `V_a` (`M` points) and returns `c1 = c(V_a)`.
pub(crate) fn first_center(points: &PointSet, m: usize, seed: u64) -> Result<Vec<f64>> {
    let v_a = draw_from_all(&mut substream(seed, label::SAMPLE_VA), points.len(), m);
    centroid_indexed(points, &v_a)
}

/// Outcome of the peeling phase.
pub(crate) struct PeelingRun {
    pub count: u64,
    pub rounds: usize,
    pub truncated: bool,
    pub region_sizes: Vec<usize>,
    pub regions: Option<Vec<Vec<usize>>>,
}

/// Phase 2 from a given first center: sampling, multiset enumeration and
/// peeling. Emits `(c2, round, copies, subset)` for every candidate.
/// Candidates per untruncated peeling round, `sum_{t=0..=m} C(n_2, m - t)`.
pub fn phase2_round_size(m: usize, n_2: usize) -> f64 {
    (0..=m).map(|t| binomial(n_2 as u64, (m - t) as u64)).sum()
}

pub(crate) fn peeling_phase<F>(
    points: &PointSet,
    ps: &ParameterSet,
    c1: &[f64],
    seed: u64,
    config: &SamplerConfig,
    timings: &mut Timings,
    mut emit: F,
) -> Result<PeelingRun>
where
    F: FnMut(&[f64], usize, usize, &[usize]),
{
    let n = points.len();
    let d = points.dim();
    let m = count_param(ps.m, "M")?;
    let n_2 = count_param(ps.n_2, "N_2")?;
    if n_2 < m {
        return Err(Error::invalid(format!("N_2 = {n_2} must be at least M = {m}")));
    }
    let max_rounds = ps.iteration_bound(n);
    let round_full = phase2_round_size(m, n_2);
    let mut out = PeelingRun {
        count: 0,
        rounds: 0,
        truncated: false,
        region_sizes: Vec::new(),
        regions: config.record_regions.then(Vec::new),
    };
    let mut region: Vec<usize> = (0..n).collect();
    let mut round = 0;
    while round < max_rounds {
        out.region_sizes.push(region.len());
        if let Some(r) = out.regions.as_mut() {
            r.push(region.clone());
        }
        let t0 = Instant::now();
        let v_b = draw_uniform(&mut substream(seed, label::peel_sample(round)), &region, n_2);
        timings.sampling += t0.elapsed();

        let t1 = Instant::now();
        let extra = centroid_indexed(points, &v_b)?;
        match config.cap {
            Some(cap) if round_full > cap as f64 => {
                out.truncated = true;
                let (distinct, positions) = group_sample(&v_b);
                let mut mult: Vec<usize> = positions.iter().map(Vec::len).collect();
                mult.push(m);
                let mut rng = substream(seed, label::peel_truncate(round));
                let mut c = vec![0.0; d];
                for counts in select_distinct(&mult, m, cap.max(1) as usize, &mut rng) {
                    let copies = counts[distinct.len()];
                    c.iter_mut().for_each(|x| *x = 0.0);
                    for (&k, &p) in counts.iter().zip(&distinct) {
                        for (o, x) in c.iter_mut().zip(points.point(p)) {
                            *o += k as f64 * x;
                        }
                    }
                    for (o, e) in c.iter_mut().zip(&extra) {
                        *o = (*o + copies as f64 * e) / m as f64;
                    }
                    let subset = positions_for(&counts[..distinct.len()], &positions);
                    emit(&c, round, copies, &subset);
                    out.count += 1;
                }
            }
            _ => {
                out.count +=
                    enumerate_multiset_subsets(points, &v_b, &extra, m, m, |c, t, sub| emit(c, round, t, sub))?;
            }
        }
        timings.enumeration += t1.elapsed();
        round += 1;
        if region.len() <= m.max(1) {
            break;
        }
        let t2 = Instant::now();
        let mut rng = substream(seed, label::peel_vibrate(round - 1));
        let eta = (!config.no_vibrate).then_some(ps.eta);
        region = peel(points, &region, c1, ps.varsigma, eta, &mut rng)?.kept;
        timings.peeling += t2.elapsed();
    }
    out.rounds = round;
    Ok(out)
}

/// Runs the 2-means sampler and streams every candidate to `sink`.
pub fn run_2means_visit<F>(
    points: &PointSet,
    ps: &ParameterSet,
    seed: u64,
    config: &SamplerConfig,
    mut sink: F,
) -> Result<RunSummary>
where
    F: FnMut(CandidateRef<'_>),
{
    if points.is_empty() {
        return Err(Error::Empty("2-means sampler needs at least one point"));
    }
    let sizes = Sizes::new(ps.m, ps.n_a, ps.n_b)?;
    let n_2 = count_param(ps.n_2, "N_2")?;
    if n_2 < sizes.m {
        return Err(Error::invalid(format!("N_2 = {n_2} must be at least M = {}", sizes.m)));
    }
    let mut timings = Timings::default();
    let (phase1_count, phase1_bound, trunc1) =
        double_sampling(points, sizes, seed, config.cap, &mut timings, |ca, cb, sa, sb| {
            sink(CandidateRef { c1: ca, c2: cb, provenance: ProvenanceRef::Phase1 { subset_a: sa, subset_b: sb } })
        });

    let t0 = Instant::now();
    let c1 = first_center(points, sizes.m, seed)?;
    timings.sampling += t0.elapsed();
    sink(CandidateRef { c1: &c1, c2: &c1, provenance: ProvenanceRef::Bare });

    let run = peeling_phase(points, ps, &c1, seed, config, &mut timings, |c2, round, copies, subset| {
        sink(CandidateRef { c1: &c1, c2, provenance: ProvenanceRef::Phase2 { iteration: round, copies, subset } })
    })?;

    Ok(RunSummary {
        phase1_count,
        phase2_count: run.count,
        phase_iterations: run.rounds,
        truncated: trunc1 || run.truncated,
        phase1_bound,
        phase2_round_bound: phase2_round_size(sizes.m, n_2),
        iteration_bound: ps.iteration_bound(points.len()),
        region_sizes: run.region_sizes,
        first_center: c1.clone(),
        regions: run.regions,
        timings,
    })
}

/// Runs the 2-means sampler and collects the candidate list `U`.
pub fn run_2means(points: &PointSet, ps: &ParameterSet, seed: u64, config: &SamplerConfig) -> Result<CandidateSet> {
    let mut pairs = Vec::new();
    let summary = run_2means_visit(points, ps, seed, config, |c| pairs.push(c.to_owned()))?;
    Ok(CandidateSet {
        pairs,
        phase1_count: summary.phase1_count,
        phase2_count: summary.phase2_count,
        phase_iterations: summary.phase_iterations,
        truncated: summary.truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Overrides;
    use crate::rng::substream;

    fn line(n: usize) -> PointSet {
        PointSet::new((0..n).map(|i| vec![i as f64, (i * i % 7) as f64]).collect()).unwrap()
    }

    fn small_params(m: u64, na: u64, nb: u64, n2: u64) -> ParameterSet {
        let o = Overrides { m: Some(m), n_a: Some(na), n_b: Some(nb), n_2: Some(n2), ..Default::default() };
        ParameterSet::resolve(0.3, &o).unwrap()
    }

    #[test]
    fn multiset_enumeration_small_case() {
        let p = PointSet::new(vec![vec![0.0], vec![2.0]]).unwrap();
        let mut got = Vec::new();
        let count =
            enumerate_multiset_subsets(&p, &[0, 1], &[10.0], 2, 2, |c, t, s| got.push((c[0], t, s.to_vec()))).unwrap();
        assert_eq!(count, 4);
        assert_eq!(got, vec![(1.0, 0, vec![0, 1]), (5.0, 1, vec![0]), (6.0, 1, vec![1]), (10.0, 2, vec![])]);
    }

    #[test]
    fn multiset_enumeration_singletons_and_errors() {
        let p = line(5);
        let v = [0, 2, 4];
        let mut n = 0;
        let mut last = Vec::new();
        let count = enumerate_multiset_subsets(&p, &v, &[9.0, 9.0], 1, 1, |c, _, _| {
            n += 1;
            last = c.to_vec();
        })
        .unwrap();
        assert_eq!((count, n), (4, 4));
        assert_eq!(last, vec![9.0, 9.0]);
        assert!(enumerate_multiset_subsets(&p, &v, &[0.0, 0.0], 1, 5, |_, _, _| {}).is_err());
    }

    #[test]
    fn peel_target_shrinks() {
        assert_eq!(peel_target(100, 1.0), 50);
        assert_eq!(peel_target(12, 5e-4), 11);
        assert_eq!(peel_target(2, 0.5), 1);
        assert_eq!(peel_target(1, 0.5), 1);
        for len in 2..200 {
            assert!(peel_target(len, 0.3) < len);
        }
    }

    #[test]
    fn peel_on_a_circle_keeps_exact_count() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 40.0;
                vec![a.cos(), a.sin()]
            })
            .collect();
        let p = PointSet::new(rows).unwrap();
        let all: Vec<usize> = (0..40).collect();
        let step = peel(&p, &all, &[0.0, 0.0], 1.0, Some(0.05), &mut substream(1, 1)).unwrap();
        assert_eq!(step.kept.len(), 20);
        assert_ne!(step.center, vec![0.0, 0.0]);
    }

    #[test]
    fn peel_rejects_empty() {
        assert!(peel(&line(3), &[], &[0.0, 0.0], 1.0, None, &mut substream(1, 1)).is_err());
    }

    #[test]
    fn phase1_count_is_binomial_product() {
        let set = run_2means(&line(10), &small_params(2, 4, 4, 4), 3, &SamplerConfig::default()).unwrap();
        assert_eq!(set.phase1_count, 36);
        assert!(!set.truncated);
    }

    #[test]
    fn identical_points_give_identical_centers() {
        let p = PointSet::new(vec![vec![1.5, -2.0]; 3]).unwrap();
        let set = run_2means(&p, &small_params(3, 6, 6, 6), 9, &SamplerConfig::default()).unwrap();
        assert!(!set.is_empty());
        for pair in &set.pairs {
            assert_eq!(pair.c1, vec![1.5, -2.0]);
            assert_eq!(pair.c2, vec![1.5, -2.0]);
        }
    }

    #[test]
    fn truncation_respects_cap() {
        let ps = small_params(4, 16, 16, 40);
        let summary = run_2means_visit(&line(30), &ps, 5, &SamplerConfig::capped(500), |_| {}).unwrap();
        assert!(summary.truncated);
        assert!(summary.phase1_count <= 500);
        assert!(summary.phase1_count > 0);
    }

    #[test]
    fn jsonl_shape() {
        let pair = CandidatePair {
            c1: vec![1.0],
            c2: vec![2.0],
            provenance: Provenance::Phase2 { iteration: 3, copies: 1, subset: vec![0, 4] },
        };
        let s = serde_json::to_string(&pair).unwrap();
        assert_eq!(s, r#"{"c1":[1.0],"c2":[2.0],"phase":"phase2","iter":3,"copies":1,"subset":[0,4]}"#);
        let back: CandidatePair = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pair);
    }
}
