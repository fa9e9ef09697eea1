//! Constraint-aware assignment at fixed centers.
//!
//! For two centers with a size constraint the optimum is found by sorting
//! points on `||p - c1||^2 - ||p - c2||^2` and sweeping the split size. For
//! more centers a min-cost flow gives the exact optimum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointSet};
use crate::sampler::CandidatePair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ConstraintSpec {
    Unconstrained,
    /// `|Q_i| <= c |Q_j|` for every pair of clusters.
    Balanced {
        c: f64,
    },
    /// `lo_j <= |Q_j| <= hi_j`. A single pair applies to every cluster.
    SizeInterval {
        bounds: Vec<(usize, usize)>,
    },
}

impl ConstraintSpec {
    pub fn balanced(c: f64) -> Result<Self> {
        let spec = ConstraintSpec::Balanced { c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn size(lo: usize, hi: usize) -> Result<Self> {
        let spec = ConstraintSpec::SizeInterval { bounds: vec![(lo, hi)] };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        match self {
            ConstraintSpec::Unconstrained => Ok(()),
            ConstraintSpec::Balanced { c } => {
                if !(*c >= 1.0) || !c.is_finite() {
                    return Err(Error::invalid(format!("balance factor c = {c} must be a finite value >= 1")));
                }
                Ok(())
            }
            ConstraintSpec::SizeInterval { bounds } => {
                if bounds.is_empty() {
                    return Err(Error::invalid("size interval needs at least one (lo, hi) pair"));
                }
                if let Some((lo, hi)) = bounds.iter().find(|(lo, hi)| lo > hi) {
                    return Err(Error::invalid(format!("size interval lo = {lo} exceeds hi = {hi}")));
                }
                Ok(())
            }
        }
    }

    /// Per-cluster `(lo, hi)` for a size interval with `k` clusters.
    fn interval_bounds(bounds: &[(usize, usize)], k: usize) -> Result<Vec<(usize, usize)>> {
        match bounds.len() {
            1 => Ok(vec![bounds[0]; k]),
            len if len == k => Ok(bounds.to_vec()),
            len => Err(Error::invalid(format!("{len} size intervals given for k = {k} clusters"))),
        }
    }
}

impl fmt::Display for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintSpec::Unconstrained => write!(f, "none"),
            ConstraintSpec::Balanced { c } => write!(f, "balanced:c={c}"),
            ConstraintSpec::SizeInterval { bounds } => {
                let join = |sel: fn(&(usize, usize)) -> usize| {
                    bounds.iter().map(|b| sel(b).to_string()).collect::<Vec<_>>().join("/")
                };
                write!(f, "size:lo={},hi={}", join(|b| b.0), join(|b| b.1))
            }
        }
    }
}

impl FromStr for ConstraintSpec {
    type Err = Error;

    /// Parses `none`, `balanced:c=1.5` or `size:lo=4,hi=8`. Per-cluster sizes
    /// are separated by `/`: `size:lo=2/3,hi=6/6`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = |why: &str| Error::Parse(format!("constraint {s:?}: {why}"));
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut fields = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.trim().is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| bad("expected key=value"))?;
            if fields.insert(key.trim(), value.trim()).is_some() {
                return Err(bad("repeated key"));
            }
        }
        let spec = match kind.trim() {
            "none" | "unconstrained" => {
                if !fields.is_empty() {
                    return Err(bad("takes no arguments"));
                }
                ConstraintSpec::Unconstrained
            }
            "balanced" => {
                let c = match fields.remove("c") {
                    Some(v) => v.parse::<f64>().map_err(|_| bad("c is not a number"))?,
                    None => 1.0,
                };
                if !fields.is_empty() {
                    return Err(bad("unknown key"));
                }
                ConstraintSpec::Balanced { c }
            }
            "size" => {
                let list = |key: &str, fields: &mut std::collections::BTreeMap<&str, &str>| -> Result<Vec<usize>> {
                    let v = fields.remove(key).ok_or_else(|| bad(&format!("missing {key}")))?;
                    v.split('/')
                        .map(|x| x.trim().parse::<usize>().map_err(|_| bad(&format!("{key} is not a size"))))
                        .collect()
                };
                let lo = list("lo", &mut fields)?;
                let hi = list("hi", &mut fields)?;
                if !fields.is_empty() {
                    return Err(bad("unknown key"));
                }
                if lo.len() != hi.len() {
                    return Err(bad("lo and hi lists differ in length"));
                }
                ConstraintSpec::SizeInterval { bounds: lo.into_iter().zip(hi).collect() }
            }
            _ => return Err(bad("expected none, balanced:c=.. or size:lo=..,hi=..")),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<String> for ConstraintSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ConstraintSpec> for String {
    fn from(spec: ConstraintSpec) -> String {
        spec.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    /// Cluster index per point; empty when infeasible.
    pub assignment: Vec<usize>,
    /// `sum_j f2(c_j, P_j)`, or `+inf` when infeasible.
    pub cost: f64,
    pub feasible: bool,
    /// Why no assignment exists.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reason: Option<String>,
}

impl PartitionResult {
    fn infeasible(reason: String) -> Self {
        PartitionResult { assignment: Vec::new(), cost: f64::INFINITY, feasible: false, reason: Some(reason) }
    }

    fn from_assignment(points: &PointSet, centers: &[&[f64]], assignment: Vec<usize>) -> Self {
        let cost = assignment_cost(points, centers, &assignment);
        PartitionResult { assignment, cost, feasible: true, reason: None }
    }

    /// Cluster sizes of a feasible assignment.
    pub fn sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// `sum_i ||p_i - c_{a_i}||^2`.
pub fn assignment_cost(points: &PointSet, centers: &[&[f64]], assignment: &[usize]) -> f64 {
    crate::geometry::pairwise_sum(0, points.len(), &|i| squared_distance(points.point(i), centers[assignment[i]]))
}

/// Does `sizes` satisfy the constraint?
pub fn satisfies(spec: &ConstraintSpec, sizes: &[usize]) -> bool {
    match spec {
        ConstraintSpec::Unconstrained => true,
        ConstraintSpec::Balanced { c } => {
            let max = sizes.iter().copied().max().unwrap_or(0) as f64;
            let min = sizes.iter().copied().min().unwrap_or(0) as f64;
            max <= c * min
        }
        ConstraintSpec::SizeInterval { bounds } => match ConstraintSpec::interval_bounds(bounds, sizes.len()) {
            Ok(b) => sizes.iter().zip(&b).all(|(&s, &(lo, hi))| lo <= s && s <= hi),
            Err(_) => false,
        },
    }
}

/// Minimum-cost assignment of `points` to `centers` under `spec`.
pub fn assign<C: AsRef<[f64]>>(points: &PointSet, centers: &[C], spec: &ConstraintSpec) -> Result<PartitionResult> {
    let centers: Vec<&[f64]> = centers.iter().map(AsRef::as_ref).collect();
    let k = centers.len();
    if k == 0 {
        return Err(Error::invalid("at least one center is required"));
    }
    if points.is_empty() {
        return Err(Error::Empty("assignment of an empty point set"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != points.dim()) {
        return Err(Error::DimensionMismatch { expected: points.dim(), got: c.len() });
    }
    spec.validate()?;
    let n = points.len();
    match spec {
        ConstraintSpec::Unconstrained => Ok(nearest(points, &centers)),
        ConstraintSpec::Balanced { c } => {
            if k == 1 {
                return Ok(nearest(points, &centers));
            }
            if k == 2 {
                let allowed = |s: usize| {
                    let (a, b) = (s as f64, (n - s) as f64);
                    a <= c * b && b <= c * a
                };
                return Ok(sweep_two(points, &centers, allowed));
            }
            balanced_flow(points, &centers, *c)
        }
        ConstraintSpec::SizeInterval { bounds } => {
            let b = ConstraintSpec::interval_bounds(bounds, k)?;
            let (lo_sum, hi_sum) = b.iter().fold((0usize, 0usize), |(l, h), &(lo, hi)| (l + lo, h.saturating_add(hi)));
            if lo_sum > n || hi_sum < n {
                return Ok(PartitionResult::infeasible(format!(
                    "size bounds admit totals in [{lo_sum}, {hi_sum}] but n = {n}"
                )));
            }
            if k == 1 {
                return Ok(nearest(points, &centers));
            }
            if k == 2 {
                let allowed = |s: usize| b[0].0 <= s && s <= b[0].1 && b[1].0 <= n - s && n - s <= b[1].1;
                return Ok(sweep_two(points, &centers, allowed));
            }
            Ok(flow_assign(points, &centers, &b))
        }
    }
}

fn nearest(points: &PointSet, centers: &[&[f64]]) -> PartitionResult {
    let assignment = points
        .iter()
        .map(|p| {
            let mut best = (f64::INFINITY, 0);
            for (j, c) in centers.iter().enumerate() {
                let d = squared_distance(p, c);
                if d < best.0 {
                    best = (d, j);
                }
            }
            best.1
        })
        .collect();
    PartitionResult::from_assignment(points, centers, assignment)
}

/// Exact two-center sweep: the first `s` points in order of
/// `||p - c1||^2 - ||p - c2||^2` (ties by index) go to `c1`.
fn sweep_two<F: Fn(usize) -> bool>(points: &PointSet, centers: &[&[f64]], allowed: F) -> PartitionResult {
    let n = points.len();
    let d1: Vec<f64> = points.iter().map(|p| squared_distance(p, centers[0])).collect();
    let d2: Vec<f64> = points.iter().map(|p| squared_distance(p, centers[1])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| (d1[a] - d2[a]).total_cmp(&(d1[b] - d2[b])).then(a.cmp(&b)));
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + d2[order[i]];
    }
    let mut best: Option<(f64, usize)> = None;
    let mut prefix = 0.0;
    for s in 0..=n {
        if s > 0 {
            prefix += d1[order[s - 1]];
        }
        if allowed(s) {
            let cost = prefix + suffix[s];
            if best.is_none_or(|(b, _)| cost < b) {
                best = Some((cost, s));
            }
        }
    }
    match best {
        None => PartitionResult::infeasible(format!("no split of {n} points satisfies the size constraint")),
        Some((_, s)) => {
            let mut assignment = vec![1; n];
            for &i in &order[..s] {
                assignment[i] = 0;
            }
            PartitionResult::from_assignment(points, centers, assignment)
        }
    }
}

/// Balanced with `k > 2`: best over the smallest cluster size `s` of the flow
/// with every size in `[s, floor(c s)]`.
fn balanced_flow(points: &PointSet, centers: &[&[f64]], c: f64) -> Result<PartitionResult> {
    let n = points.len();
    let k = centers.len();
    let mut best: Option<PartitionResult> = None;
    for s in 1..=n / k {
        let hi = ((c * s as f64).floor() as usize).min(n);
        if hi * k < n {
            continue;
        }
        let r = flow_assign(points, centers, &vec![(s, hi); k]);
        if r.feasible && best.as_ref().is_none_or(|b| r.cost < b.cost) {
            best = Some(r);
        }
    }
    Ok(best.unwrap_or_else(|| {
        PartitionResult::infeasible(format!("no {k}-way split of {n} points is balanced with c = {c}"))
    }))
}

/// Lexicographic cost: (units routed through a lower-bound surplus edge,
/// squared distance). Keeps lower bounds exact without a big-M constant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct Cost(i64, f64);

impl Cost {
    fn add(self, o: Cost) -> Cost {
        Cost(self.0 + o.0, self.1 + o.1)
    }
    fn sub(self, o: Cost) -> Cost {
        Cost(self.0 - o.0, self.1 - o.1)
    }
    fn neg(self) -> Cost {
        Cost(-self.0, -self.1)
    }
    fn cmp(&self, o: &Cost) -> Ordering {
        self.0.cmp(&o.0).then(self.1.total_cmp(&o.1))
    }
}

struct Edge {
    to: usize,
    cap: usize,
    cost: Cost,
}

struct Graph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl Graph {
    fn new(nodes: usize) -> Self {
        Graph { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add(&mut self, from: usize, to: usize, cap: usize, cost: Cost) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.edges.push(Edge { to: from, cap: 0, cost: cost.neg() });
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }
}

#[derive(PartialEq)]
struct Entry(Cost, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.cmp(&self.0).then(o.1.cmp(&self.1))
    }
}

/// Min-cost assignment with per-cluster size bounds, by successive shortest
/// paths. Each cluster has a `lo` edge of cost 0 and a surplus edge of
/// penalty 1 to the sink; the penalty is lexicographically dominant, so lower
/// bounds are met whenever `sum lo <= n`.
fn flow_assign(points: &PointSet, centers: &[&[f64]], bounds: &[(usize, usize)]) -> PartitionResult {
    let n = points.len();
    let k = centers.len();
    let lo_sum: usize = bounds.iter().map(|b| b.0).sum();
    let hi_sum: usize = bounds.iter().map(|b| b.1).fold(0, usize::saturating_add);
    if lo_sum > n || hi_sum < n {
        return PartitionResult::infeasible(format!("size bounds admit totals in [{lo_sum}, {hi_sum}] but n = {n}"));
    }
    let source = n + k;
    let sink = n + k + 1;
    let mut g = Graph::new(n + k + 2);
    for i in 0..n {
        g.add(source, i, 1, Cost::default());
    }
    let mut point_edges = Vec::with_capacity(n * k);
    for i in 0..n {
        for (j, c) in centers.iter().enumerate() {
            point_edges.push(g.add(i, n + j, 1, Cost(0, squared_distance(points.point(i), c))));
        }
    }
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        if lo > 0 {
            g.add(n + j, sink, lo, Cost(0, 0.0));
        }
        if hi > lo {
            g.add(n + j, sink, hi - lo, Cost(1, 0.0));
        }
    }

    let nodes = n + k + 2;
    let mut potential = vec![Cost::default(); nodes];
    for _ in 0..n {
        let mut dist: Vec<Option<Cost>> = vec![None; nodes];
        let mut prev = vec![usize::MAX; nodes];
        let mut heap = BinaryHeap::new();
        dist[source] = Some(Cost::default());
        heap.push(Entry(Cost::default(), source));
        while let Some(Entry(du, u)) = heap.pop() {
            if dist[u].is_some_and(|d| d.cmp(&du) == Ordering::Less) {
                continue;
            }
            for &e in &g.adj[u] {
                let edge = &g.edges[e];
                if edge.cap == 0 {
                    continue;
                }
                let mut reduced = edge.cost.add(potential[u]).sub(potential[edge.to]);
                if reduced.0 == 0 && reduced.1 < 0.0 {
                    reduced.1 = 0.0;
                }
                let nd = du.add(reduced);
                if dist[edge.to].is_none_or(|d| nd.cmp(&d) == Ordering::Less) {
                    dist[edge.to] = Some(nd);
                    prev[edge.to] = e;
                    heap.push(Entry(nd, edge.to));
                }
            }
        }
        if dist[sink].is_none() {
            return PartitionResult::infeasible("flow network saturated before all points were assigned".into());
        }
        for v in 0..nodes {
            if let Some(d) = dist[v] {
                potential[v] = potential[v].add(d);
            }
        }
        let mut v = sink;
        while v != source {
            let e = prev[v];
            g.edges[e].cap -= 1;
            g.edges[e ^ 1].cap += 1;
            v = g.edges[e ^ 1].to;
        }
    }

    let mut assignment = vec![0; n];
    for i in 0..n {
        for j in 0..k {
            if g.edges[point_edges[i * k + j]].cap == 0 {
                assignment[i] = j;
            }
        }
    }
    let r = PartitionResult::from_assignment(points, centers, assignment);
    let sizes = r.sizes(k);
    if sizes.iter().zip(bounds).any(|(&s, &(lo, hi))| s < lo || s > hi) {
        return PartitionResult::infeasible("size bounds could not be met".into());
    }
    r
}

/// Best candidate under `spec`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Position of the winning pair in the candidate list.
    pub index: usize,
    pub pair: CandidatePair,
    pub result: PartitionResult,
}

/// Evaluates every pair in parallel and returns the feasible one of least
/// cost, ties to the earliest.
pub fn evaluate_candidates(points: &PointSet, pairs: &[CandidatePair], spec: &ConstraintSpec) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::Empty("candidate list"));
    }
    spec.validate()?;
    let best = pairs
        .par_iter()
        .enumerate()
        .map(|(i, pair)| assign(points, &[&pair.c1[..], &pair.c2[..]], spec).map(|r| (i, r)))
        .try_reduce_with(|a, b| {
            let better = match (a.1.feasible, b.1.feasible) {
                (true, false) => true,
                (false, true) => false,
                _ => a.1.cost.total_cmp(&b.1.cost).then(a.0.cmp(&b.0)) != Ordering::Greater,
            };
            Ok(if better { a } else { b })
        });
    let (index, result) = best.expect("nonempty candidate list")?;
    if !result.feasible {
        return Err(Error::Infeasible(
            result.reason.unwrap_or_else(|| "no candidate pair admits a feasible assignment".into()),
        ));
    }
    Ok(Evaluation { index, pair: pairs[index].clone(), result })
}
