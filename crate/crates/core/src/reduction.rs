//! Reduction from maximum bisection to 1-balanced 2-means.
//!
//! Vertex `v` becomes a point in `R^|E|` with `+1` in the column of every
//! edge `(v, j)`, `j > v`, and `-1` in the column of every edge `(i, v)`,
//! `i < v`. For a bisection `(P, Q)` of an even vertex set the 2-means cost
//! is `2|E| - (4/n) |E(P, Q)|`.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::oracle::partition_cost;
use crate::subsets::Combinations;

/// Largest vertex count for [`max_bisection`].
pub const BISECTION_LIMIT: usize = 20;
/// Largest vertex count for [`verify_identity`].
pub const IDENTITY_LIMIT: usize = 12;

/// A simple undirected graph. Edges are stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphInstance {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
}

impl GraphInstance {
    /// Validates and normalises the edge list (endpoints are reordered so
    /// that `i < j`; self-loops, repeats and out-of-range vertices are
    /// rejected).
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let (i, j) = (a.min(b), a.max(b));
            if i == j {
                return Err(Error::invalid(format!("self-loop at vertex {i}")));
            }
            if j >= n_vertices {
                return Err(Error::invalid(format!("edge ({a}, {b}) outside 0..{n_vertices}")));
            }
            if !seen.insert((i, j)) {
                return Err(Error::invalid(format!("duplicate edge ({i}, {j})")));
            }
            out.push((i, j));
        }
        Ok(GraphInstance { n_vertices, edges: out })
    }

    /// Parses the edge-list format: a vertex-count line, then one `i j` pair
    /// per line. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(no, l)| (no + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (no, header) = lines.next().ok_or_else(|| Error::Parse("graph file is empty".into()))?;
        let n = header
            .parse::<usize>()
            .map_err(|_| Error::Parse(format!("line {no}: expected a vertex count, got {header:?}")))?;
        let mut edges = Vec::new();
        for (no, line) in lines {
            let mut it = line.split_whitespace();
            let mut next = || -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("line {no}: expected two vertices")))?
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("line {no}: bad vertex in {line:?}")))
            };
            let (i, j) = (next()?, next()?);
            if it.next().is_some() {
                return Err(Error::Parse(format!("line {no}: trailing fields in {line:?}")));
            }
            edges.push((i, j));
        }
        GraphInstance::new(n, edges)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n_vertices);
        for (i, j) in &self.edges {
            let _ = writeln!(s, "{i} {j}");
        }
        s
    }

    /// Number of edges between `side` and its complement.
    pub fn cut_size(&self, side: &[bool]) -> usize {
        self.edges.iter().filter(|&&(i, j)| side[i] != side[j]).count()
    }

    fn adjacency(&self) -> Vec<u32> {
        let mut adj = vec![0u32; self.n_vertices];
        for &(i, j) in &self.edges {
            adj[i] |= 1 << j;
            adj[j] |= 1 << i;
        }
        adj
    }
}

/// Embeds an even graph as `n` points in `R^|E|` (`R^1` zeros if edgeless).
pub fn reduce_to_points(g: &GraphInstance) -> Result<PointSet> {
    let n = g.n_vertices;
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid(format!(
            "reduction needs an even number of vertices (at least 2), got {n}; pad odd graphs with pad_vertex first"
        )));
    }
    let d = g.edges.len().max(1);
    let mut data = vec![0.0; n * d];
    for (k, &(i, j)) in g.edges.iter().enumerate() {
        data[i * d + k] = 1.0;
        data[j * d + k] = -1.0;
    }
    PointSet::from_flat(d, data)
}

/// Adds an isolated vertex to an odd graph. Even graphs are returned
/// unchanged with a warning.
pub fn pad_vertex(g: &GraphInstance) -> GraphInstance {
    if g.n_vertices.is_multiple_of(2) {
        log::warn!("pad_vertex called on a graph with an even vertex count ({}); left unchanged", g.n_vertices);
        return g.clone();
    }
    GraphInstance { n_vertices: g.n_vertices + 1, edges: g.edges.clone() }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bisection {
    pub cut: usize,
    /// `true` for vertices on the side of vertex 0.
    pub side: Vec<bool>,
}

fn check_even(g: &GraphInstance, limit: usize, what: &'static str) -> Result<()> {
    let n = g.n_vertices;
    if n > limit {
        return Err(Error::TooLarge { what, got: n, limit });
    }
    if n < 2 || n % 2 == 1 {
        return Err(Error::invalid(format!("bisection needs an even number of vertices (at least 2), got {n}")));
    }
    Ok(())
}

/// Calls `f(mask)` for every bisection with vertex 0 on side `mask`.
fn for_each_bisection<F: FnMut(u32)>(n: usize, mut f: F) {
    let mut it = Combinations::new(n - 1, n / 2 - 1);
    while let Some(rest) = it.next() {
        let mask = rest.iter().fold(1u32, |m, &v| m | 1 << (v + 1));
        f(mask);
    }
}

/// Exact maximum bisection by enumeration (vertex 0 fixed on one side).
pub fn max_bisection(g: &GraphInstance) -> Result<Bisection> {
    check_even(g, BISECTION_LIMIT, "vertices for exact max bisection")?;
    let n = g.n_vertices;
    let adj = g.adjacency();
    let mut best = (0usize, 0u32);
    let mut first = true;
    for_each_bisection(n, |mask| {
        let cut: u32 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| (adj[v] & !mask).count_ones()).sum();
        if first || cut as usize > best.0 {
            best = (cut as usize, mask);
            first = false;
        }
    });
    Ok(Bisection { cut: best.0, side: (0..n).map(|v| best.1 >> v & 1 == 1).collect() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub splits_checked: usize,
    /// Largest `|cost - (2|E| - (4/n) cut)|` over all bisections.
    pub max_abs_error: f64,
    pub holds: bool,
    pub min_cost: f64,
    pub max_bisection: usize,
    /// `2|E| - (4/n) max_bisection`.
    pub predicted_min_cost: f64,
}

/// Checks `cost(P, Q) = 2|E| - (4/n)|E(P, Q)|` on every bisection.
pub fn verify_identity(g: &GraphInstance) -> Result<IdentityReport> {
    check_even(g, IDENTITY_LIMIT, "vertices for identity check")?;
    let n = g.n_vertices;
    let points = reduce_to_points(g)?;
    let e = g.edges.len() as f64;
    let mut report = IdentityReport {
        splits_checked: 0,
        max_abs_error: 0.0,
        holds: true,
        min_cost: f64::INFINITY,
        max_bisection: 0,
        predicted_min_cost: 0.0,
    };
    let mut err = None;
    for_each_bisection(n, |mask| {
        if err.is_some() {
            return;
        }
        let side: Vec<bool> = (0..n).map(|v| mask >> v & 1 == 1).collect();
        let labels: Vec<usize> = side.iter().map(|&s| usize::from(!s)).collect();
        let cost = match partition_cost(&points, &labels, 2) {
            Ok(c) => c,
            Err(x) => {
                err = Some(x);
                return;
            }
        };
        let cut = g.cut_size(&side);
        let predicted = 2.0 * e - 4.0 / n as f64 * cut as f64;
        report.max_abs_error = report.max_abs_error.max((cost - predicted).abs());
        report.min_cost = report.min_cost.min(cost);
        report.max_bisection = report.max_bisection.max(cut);
        report.splits_checked += 1;
    });
    if let Some(x) = err {
        return Err(x);
    }
    report.predicted_min_cost = 2.0 * e - 4.0 / n as f64 * report.max_bisection as f64;
    report.holds = report.max_abs_error <= 1e-9;
    Ok(report)
}
