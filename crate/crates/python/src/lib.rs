//! Python bindings: `import pypeelmeans`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use peelmeans::constraints::{assign as assign_centers, evaluate_candidates, ConstraintSpec};
use peelmeans::extension::{build_extension, run_kmeans_framework as framework, ExtensionParams};
use peelmeans::io::{read_candidates_jsonl, write_candidates_jsonl};
use peelmeans::oracle::{brute_opt2 as opt2, check_case_lemmas as lemmas};
use peelmeans::params::{epsilon_thresholds, failure_budget, Overrides};
use peelmeans::reduction::{max_bisection as bisection, reduce_to_points, verify_identity as identity, GraphInstance};
use peelmeans::sampler::{run_2means as sample, CandidatePair, SamplerConfig};
use peelmeans::{geometry, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Validation(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn spec(s: &str) -> PyResult<ConstraintSpec> {
    s.parse().map_err(err)
}

/// An ordered set of points in R^d.
#[pyclass(name = "PointSet", module = "pypeelmeans", frozen)]
struct PyPointSet {
    inner: peelmeans::PointSet,
}

#[pymethods]
impl PyPointSet {
    #[new]
    fn new(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        Ok(Self { inner: peelmeans::PointSet::new(rows).map_err(err)? })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn rows(&self) -> Vec<Vec<f64>> {
        self.inner.to_rows()
    }

    fn centroid(&self) -> PyResult<Vec<f64>> {
        geometry::centroid(&self.inner).map_err(err)
    }

    /// Sum of squared distances from `q` to every point.
    fn f2(&self, q: Vec<f64>) -> PyResult<f64> {
        geometry::f2(&q, &self.inner).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("PointSet(n={}, d={})", self.inner.len(), self.inner.dim())
    }
}

/// Resolved constants for one accuracy level.
#[pyclass(name = "ParameterSet", module = "pypeelmeans", frozen)]
struct PyParameterSet {
    inner: peelmeans::ParameterSet,
}

#[pymethods]
impl PyParameterSet {
    #[new]
    #[pyo3(signature = (epsilon, *, m=None, n_a=None, n_b=None, n_2=None, varsigma=None, delta1=None, delta2=None, eta=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        epsilon: f64,
        m: Option<u64>,
        n_a: Option<u64>,
        n_b: Option<u64>,
        n_2: Option<u64>,
        varsigma: Option<f64>,
        delta1: Option<f64>,
        delta2: Option<f64>,
        eta: Option<f64>,
    ) -> PyResult<Self> {
        let o = Overrides { delta2, varsigma, delta1, eta, m, n_a, n_b, n_2 };
        Ok(Self { inner: peelmeans::ParameterSet::resolve(epsilon, &o).map_err(err)? })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon
    }

    #[getter]
    fn paper_faithful(&self) -> bool {
        self.inner.paper_faithful
    }

    #[getter]
    fn violations(&self) -> Vec<String> {
        self.inner.violations.clone()
    }

    fn iteration_bound(&self, n: usize) -> usize {
        self.inner.iteration_bound(n)
    }

    /// All constants as a dict.
    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner)
    }

    fn thresholds(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &epsilon_thresholds(&self.inner))
    }

    fn failure_budget(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &failure_budget(&self.inner))
    }

    fn __repr__(&self) -> String {
        format!("ParameterSet(epsilon={}, paper_faithful={})", self.inner.epsilon, self.inner.paper_faithful)
    }
}

/// Candidate center pairs with their provenance.
#[pyclass(name = "CandidateSet", module = "pypeelmeans", frozen)]
struct PyCandidateSet {
    pairs: Vec<CandidatePair>,
    #[pyo3(get)]
    phase1_count: u64,
    #[pyo3(get)]
    phase2_count: u64,
    #[pyo3(get)]
    phase_iterations: usize,
    #[pyo3(get)]
    truncated: bool,
}

#[pymethods]
impl PyCandidateSet {
    fn __len__(&self) -> usize {
        self.pairs.len()
    }

    fn pair(&self, i: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let p = self.pairs.get(i).ok_or_else(|| PyValueError::new_err(format!("index {i} out of range")))?;
        Ok((p.c1.clone(), p.c2.clone()))
    }

    fn pairs(&self) -> Vec<(Vec<f64>, Vec<f64>)> {
        self.pairs.iter().map(|p| (p.c1.clone(), p.c2.clone())).collect()
    }

    /// JSON Lines, one pair per line.
    fn to_jsonl(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        write_candidates_jsonl(&mut buf, &self.pairs).map_err(err)?;
        String::from_utf8(buf).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_jsonl(text: &str) -> PyResult<Self> {
        let pairs = read_candidates_jsonl(text.as_bytes()).map_err(err)?;
        let phase1_count =
            pairs.iter().filter(|p| matches!(p.provenance, peelmeans::Provenance::Phase1 { .. })).count() as u64;
        let phase2_count =
            pairs.iter().filter(|p| matches!(p.provenance, peelmeans::Provenance::Phase2 { .. })).count() as u64;
        Ok(Self { pairs, phase1_count, phase2_count, phase_iterations: 0, truncated: false })
    }

    /// Best pair under `constraint`: `(index, cost, assignment)`.
    #[pyo3(signature = (points, constraint="none"))]
    fn best(&self, py: Python<'_>, points: &PyPointSet, constraint: &str) -> PyResult<(usize, f64, Vec<usize>)> {
        let spec = spec(constraint)?;
        let e = py.detach(|| evaluate_candidates(&points.inner, &self.pairs, &spec)).map_err(err)?;
        Ok((e.index, e.result.cost, e.result.assignment))
    }
}

/// Run the two-phase sampler.
#[pyfunction]
#[pyo3(signature = (points, params, seed=0, cap=None, no_vibrate=false))]
fn run_2means(
    py: Python<'_>,
    points: &PyPointSet,
    params: &PyParameterSet,
    seed: u64,
    cap: Option<u64>,
    no_vibrate: bool,
) -> PyResult<PyCandidateSet> {
    let config = SamplerConfig { cap, no_vibrate, record_regions: false };
    let set = py.detach(|| sample(&points.inner, &params.inner, seed, &config)).map_err(err)?;
    Ok(PyCandidateSet {
        pairs: set.pairs,
        phase1_count: set.phase1_count,
        phase2_count: set.phase2_count,
        phase_iterations: set.phase_iterations,
        truncated: set.truncated,
    })
}

/// Assign points to fixed centers: `(assignment, cost, feasible)`.
#[pyfunction]
#[pyo3(signature = (points, centers, constraint="none"))]
fn assign(points: &PyPointSet, centers: Vec<Vec<f64>>, constraint: &str) -> PyResult<(Vec<usize>, f64, bool)> {
    let r = assign_centers(&points.inner, &centers, &spec(constraint)?).map_err(err)?;
    Ok((r.assignment, r.cost, r.feasible))
}

/// Exact optimum 2-clustering for n <= 20: `(labels, cost)`.
#[pyfunction]
#[pyo3(signature = (points, constraint="none"))]
fn brute_opt2(py: Python<'_>, points: &PyPointSet, constraint: &str) -> PyResult<(Vec<usize>, f64)> {
    let spec = spec(constraint)?;
    let o = py.detach(|| opt2(&points.inner, &spec)).map_err(err)?;
    Ok((o.labels, o.cost))
}

/// Evaluate the case-analysis inequalities; returns the report as a dict.
#[pyfunction]
fn check_case_lemmas(
    py: Python<'_>,
    points: &PyPointSet,
    labels: Vec<usize>,
    c1: Vec<f64>,
    c2: Vec<f64>,
    params: &PyParameterSet,
) -> PyResult<Py<PyAny>> {
    let report = lemmas(&points.inner, &labels, &c1, &c2, &params.inner).map_err(err)?;
    to_py(py, &report)
}

/// Embed a graph with an even vertex count as a point set.
#[pyfunction]
fn reduce_graph(n_vertices: usize, edges: Vec<(usize, usize)>) -> PyResult<PyPointSet> {
    let g = GraphInstance::new(n_vertices, edges).map_err(err)?;
    Ok(PyPointSet { inner: reduce_to_points(&g).map_err(err)? })
}

/// Check the balanced 2-means cost identity by exhaustive search.
#[pyfunction]
fn verify_identity(py: Python<'_>, n_vertices: usize, edges: Vec<(usize, usize)>) -> PyResult<Py<PyAny>> {
    let g = GraphInstance::new(n_vertices, edges).map_err(err)?;
    let r = py.detach(|| identity(&g)).map_err(err)?;
    to_py(py, &r)
}

/// Maximum bisection by brute force: `(cut, side)`.
#[pyfunction]
fn max_bisection(n_vertices: usize, edges: Vec<(usize, usize)>) -> PyResult<(usize, Vec<bool>)> {
    let g = GraphInstance::new(n_vertices, edges).map_err(err)?;
    let b = bisection(&g).map_err(err)?;
    Ok((b.cut, b.side))
}

type Tuples = Vec<Vec<Vec<f64>>>;

/// Run the k-means prefix framework with a named extension.
/// Returns `(tuples, info)` where `info` holds the prefix accounting.
#[pyfunction]
#[pyo3(signature = (points, k, epsilon, extension="greedy", constraint="none", seed=0, cap=None, m=None, n_a=None, n_b=None))]
#[allow(clippy::too_many_arguments)]
fn run_kmeans_framework(
    py: Python<'_>,
    points: &PyPointSet,
    k: usize,
    epsilon: f64,
    extension: &str,
    constraint: &str,
    seed: u64,
    cap: Option<u64>,
    m: Option<u64>,
    n_a: Option<u64>,
    n_b: Option<u64>,
) -> PyResult<(Tuples, Py<PyAny>)> {
    let spec = spec(constraint)?;
    let params = ExtensionParams::new(k, epsilon).and_then(|p| p.with_sizes(m, n_a, n_b)).map_err(err)?;
    let two_means = if extension == "peel" {
        let o = Overrides { m, n_a, n_b, ..Default::default() };
        Some(peelmeans::ParameterSet::resolve(epsilon, &o).map_err(err)?)
    } else {
        None
    };
    let config = SamplerConfig { cap, ..Default::default() };
    let ext = build_extension(extension, &spec, two_means.as_ref(), &config).map_err(err)?;
    let out = py.detach(|| framework(&points.inner, ext.as_ref(), &params, seed, cap)).map_err(err)?;
    let info = serde_json::json!({
        "prefix_count": out.prefix_count,
        "prefix_bound": out.prefix_bound,
        "distinct_prefixes": out.distinct_prefixes,
        "failed_prefixes": out.failed_prefixes,
        "truncated": out.truncated,
    });
    Ok((out.tuples, to_py(py, &info)?))
}

#[pymodule]
fn pypeelmeans(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyPointSet>()?;
    m.add_class::<PyParameterSet>()?;
    m.add_class::<PyCandidateSet>()?;
    m.add_function(wrap_pyfunction!(run_2means, m)?)?;
    m.add_function(wrap_pyfunction!(assign, m)?)?;
    m.add_function(wrap_pyfunction!(brute_opt2, m)?)?;
    m.add_function(wrap_pyfunction!(check_case_lemmas, m)?)?;
    m.add_function(wrap_pyfunction!(reduce_graph, m)?)?;
    m.add_function(wrap_pyfunction!(verify_identity, m)?)?;
    m.add_function(wrap_pyfunction!(max_bisection, m)?)?;
    m.add_function(wrap_pyfunction!(run_kmeans_framework, m)?)?;
    Ok(())
}
