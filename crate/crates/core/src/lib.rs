//! Candidate-center generation for constrained 2-means (and k-means) by
//! double sampling and peeling.
//!
//! The 2-means sampler ([`sampler::run_2means`]) returns a list of center
//! pairs, one of which induces a `(1 + eps)`-approximate partition with high
//! probability; [`constraints`] turns pairs into constrained partitions and
//! picks the best. [`extension`] generalises the prefix sampling to k
//! centers, [`oracle`] holds exact solvers for small instances and
//! [`reduction`] the embedding of maximum bisection into balanced 2-means.

// Negated comparisons such as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod error;
pub mod extension;
pub mod generate;
pub mod geometry;
pub mod io;
pub mod oracle;
pub mod params;
pub mod reduction;
pub mod rng;
pub mod sampler;
pub mod subsets;

pub use constraints::{assign, evaluate_candidates, ConstraintSpec, Evaluation, PartitionResult};
pub use error::{Error, Result};
pub use extension::{run_kmeans_framework, ExtensionAlgorithm, ExtensionParams, FrameworkOutput};
pub use geometry::{centroid, distance, f2, squared_distance, ClusteringStats, PointSet};
pub use oracle::{brute_opt2, check_case_lemmas, probe, AnalysisProbe, Case, LemmaReport};
pub use params::{Overrides, ParameterSet};
pub use reduction::{max_bisection, pad_vertex, reduce_to_points, verify_identity, GraphInstance};
pub use sampler::{run_2means, run_2means_visit, CandidatePair, CandidateSet, Provenance, SamplerConfig};
