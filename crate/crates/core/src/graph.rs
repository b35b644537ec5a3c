//! Proximity-graph construction: threshold graphs for the dense and sparse
//! regimes and exact kNN graphs, with degree and edge statistics.
//!
//! Threshold graphs connect `x_i` and `x_j` iff their spherical distance is
//! at most `arcsin(M n^(-1/d))` (dense, `M > 1`) or
//! `arccos(sqrt(2 M ln n / d))` (sparse, `0 < M < 1`). Construction is
//! exhaustive `O(n^2 d)`: approximate construction would confound the
//! experiments this crate exists to run. Pair checks compare inner products
//! against the cosine of the threshold, which avoids an `arccos` per pair and
//! keeps tie semantics (`<=` on distance, so ties at the exact threshold are
//! included).
//!
//! kNN graphs are directed out-edge lists; threshold graphs are symmetric.
//! Rows build in parallel; a finished graph is immutable and shared freely
//! across query threads.

use std::fmt;

use rayon::prelude::*;

use crate::data::{dot, Dataset};
use crate::geometry::{cap_volume, CapSpec};
use crate::long_edges::LongEdgeTag;

#[derive(Debug)]
pub enum GraphError {
    InvalidParam(String),
    /// Dense threshold argument `M n^(-1/d)` exceeded 1 and capping was not
    /// requested.
    AngleOutOfRange { arg: f64 },
    /// Sparse threshold argument `2 M ln n / d` exceeded 1; the dataset is
    /// not in the sparse regime for this `M`.
    RegimeMismatch { arg: f64 },
    /// Graph refers to a different dataset than the one supplied.
    DatasetMismatch { expected: u64, found: u64 },
    /// Long-edge lists do not match the graph.
    EdgeIndexMismatch(String),
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphError::InvalidParam(s) => write!(f, "invalid parameter: {s}"),
            GraphError::AngleOutOfRange { arg } => {
                write!(f, "dense threshold argument {arg} > 1 (arcsin undefined)")
            }
            GraphError::RegimeMismatch { arg } => {
                write!(f, "sparse threshold argument {arg} > 1 (sqrt exceeds 1)")
            }
            GraphError::DatasetMismatch { expected, found } => write!(
                f,
                "graph built for dataset {expected:#x}, supplied dataset hashes to {found:#x}"
            ),
            GraphError::EdgeIndexMismatch(s) => write!(f, "long-edge mismatch: {s}"),
            GraphError::Io(e) => write!(f, "io error: {e}"),
            GraphError::Format(s) => write!(f, "graph file format error: {s}"),
        }
    }
}

impl std::error::Error for GraphError {}

impl From<std::io::Error> for GraphError {
    fn from(e: std::io::Error) -> Self {
        GraphError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GraphConfig {
    ThresholdDense { m: f64 },
    ThresholdSparse { m: f64 },
    Knn { k: usize, symmetrize: bool },
}

impl GraphConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            GraphConfig::ThresholdDense { .. } => "threshold-dense",
            GraphConfig::ThresholdSparse { .. } => "threshold-sparse",
            GraphConfig::Knn { .. } => "knn",
        }
    }

    pub fn is_threshold(&self) -> bool {
        !matches!(self, GraphConfig::Knn { .. })
    }
}

/// Read access to a node's neighborhood, split into local edges and
/// long-range edges. Search algorithms are generic over this so benchmark
/// views (e.g. degree-truncated kNN tables) can avoid materializing a full
/// graph.
pub trait Neighborhoods: Sync {
    fn node_count(&self) -> usize;
    fn local(&self, u: usize) -> &[u32];
    fn long(&self, u: usize) -> &[u32];
}

/// Adjacency of a built graph: per-node local neighbor lists (sorted by
/// index) plus separately tagged long-range edge lists, initially empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchGraph {
    config: GraphConfig,
    dataset_id: String,
    dataset_hash: u64,
    local: Vec<Vec<u32>>,
    long: Vec<Vec<u32>>,
    long_tag: Option<LongEdgeTag>,
}

impl Neighborhoods for SearchGraph {
    fn node_count(&self) -> usize {
        self.local.len()
    }

    fn local(&self, u: usize) -> &[u32] {
        &self.local[u]
    }

    fn long(&self, u: usize) -> &[u32] {
        &self.long[u]
    }
}

/// Stable identity of a dataset for graph/dataset mismatch detection.
pub fn dataset_hash(ds: &Dataset) -> u64 {
    let mut h = crate::mix::fnv1a64(ds.id().as_bytes());
    h = crate::mix::splitmix64(h ^ ds.n() as u64);
    crate::mix::splitmix64(h ^ ds.dim() as u64)
}

impl SearchGraph {
    /// Assemble a graph from explicit adjacency lists. Validates index
    /// ranges, absence of self-loops, and (for threshold kinds) symmetry.
    pub fn from_parts(
        local: Vec<Vec<u32>>,
        config: GraphConfig,
        ds: &Dataset,
    ) -> Result<Self, GraphError> {
        let n = local.len();
        if n != ds.n() {
            return Err(GraphError::InvalidParam(format!(
                "adjacency has {n} rows, dataset has {}",
                ds.n()
            )));
        }
        for (u, row) in local.iter().enumerate() {
            for &v in row {
                if v as usize >= n {
                    return Err(GraphError::InvalidParam(format!(
                        "node {u} lists out-of-range neighbor {v}"
                    )));
                }
                if v as usize == u {
                    return Err(GraphError::InvalidParam(format!("self-loop at {u}")));
                }
            }
        }
        if config.is_threshold() {
            for (u, row) in local.iter().enumerate() {
                for &v in row {
                    if local[v as usize].binary_search(&(u as u32)).is_err() {
                        return Err(GraphError::InvalidParam(format!(
                            "threshold adjacency is not symmetric at ({u}, {v})"
                        )));
                    }
                }
            }
        }
        let long = vec![Vec::new(); n];
        Ok(SearchGraph {
            config,
            dataset_id: ds.id().to_string(),
            dataset_hash: dataset_hash(ds),
            local,
            long,
            long_tag: None,
        })
    }

    pub(crate) fn from_parts_unchecked(
        local: Vec<Vec<u32>>,
        config: GraphConfig,
        dataset_id: String,
        dataset_hash: u64,
    ) -> Self {
        let n = local.len();
        SearchGraph {
            config,
            dataset_id,
            dataset_hash,
            local,
            long: vec![Vec::new(); n],
            long_tag: None,
        }
    }

    pub fn config(&self) -> GraphConfig {
        self.config
    }

    pub fn dataset_id(&self) -> &str {
        &self.dataset_id
    }

    pub fn dataset_hash(&self) -> u64 {
        self.dataset_hash
    }

    pub fn long_tag(&self) -> Option<&LongEdgeTag> {
        self.long_tag.as_ref()
    }

    pub fn local_lists(&self) -> &[Vec<u32>] {
        &self.local
    }

    pub fn long_lists(&self) -> &[Vec<u32>] {
        &self.long
    }

    /// Replace (not append) the long-range edge lists. Used by
    /// `long_edges::attach`.
    pub(crate) fn set_long_edges(
        &mut self,
        lists: Vec<Vec<u32>>,
        tag: LongEdgeTag,
    ) -> Result<(), GraphError> {
        let n = self.local.len();
        if lists.len() != n {
            return Err(GraphError::EdgeIndexMismatch(format!(
                "{} long-edge rows for {n} nodes",
                lists.len()
            )));
        }
        for (u, row) in lists.iter().enumerate() {
            for &v in row {
                if v as usize >= n {
                    return Err(GraphError::EdgeIndexMismatch(format!(
                        "node {u} lists out-of-range target {v}"
                    )));
                }
                if v as usize == u {
                    return Err(GraphError::EdgeIndexMismatch(format!(
                        "long self-loop at {u}"
                    )));
                }
            }
        }
        self.long = lists;
        self.long_tag = Some(tag);
        Ok(())
    }

    pub(crate) fn set_long_edges_raw(&mut self, lists: Vec<Vec<u32>>, tag: Option<LongEdgeTag>) {
        self.long = lists;
        self.long_tag = tag;
    }
}

/// Threshold angle used by a config on a given dataset shape. Errors mirror
/// the builder preconditions; `cap_angle` substitutes `pi/2` when the dense
/// argument leaves the arcsin domain.
pub fn threshold_angle(
    config: GraphConfig,
    n: usize,
    sphere_dim: usize,
    cap_angle: bool,
) -> Result<f64, GraphError> {
    match config {
        GraphConfig::ThresholdDense { m } => {
            if !(m > 1.0) {
                return Err(GraphError::InvalidParam(format!(
                    "dense threshold needs M > 1, got {m}"
                )));
            }
            let arg = m * (n as f64).powf(-1.0 / sphere_dim as f64);
            if arg > 1.0 {
                if cap_angle {
                    Ok(std::f64::consts::FRAC_PI_2)
                } else {
                    Err(GraphError::AngleOutOfRange { arg })
                }
            } else {
                Ok(arg.asin())
            }
        }
        GraphConfig::ThresholdSparse { m } => {
            if !(m > 0.0 && m < 1.0) {
                return Err(GraphError::InvalidParam(format!(
                    "sparse threshold needs 0 < M < 1, got {m}"
                )));
            }
            let arg = 2.0 * m * (n as f64).ln() / sphere_dim as f64;
            if arg > 1.0 {
                return Err(GraphError::RegimeMismatch { arg });
            }
            Ok(arg.sqrt().acos())
        }
        GraphConfig::Knn { .. } => Err(GraphError::InvalidParam(
            "kNN graphs have no threshold angle".into(),
        )),
    }
}

fn build_threshold(
    ds: &Dataset,
    config: GraphConfig,
    cap_angle: bool,
) -> Result<SearchGraph, GraphError> {
    let n = ds.n();
    let angle = threshold_angle(config, n, ds.sphere_dim(), cap_angle)?;
    // rho(x, y) <= angle  <=>  <x, y> >= cos(angle) for unit vectors.
    let min_dot = angle.cos();
    let local: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = ds.point(i);
            let mut row = Vec::new();
            for j in 0..n {
                if j != i && dot(xi, ds.point(j)) >= min_dot {
                    row.push(j as u32);
                }
            }
            row
        })
        .collect();
    Ok(SearchGraph::from_parts_unchecked(
        local,
        config,
        ds.id().to_string(),
        dataset_hash(ds),
    ))
}

/// Dense-regime threshold graph: connect within `arcsin(M n^(-1/d))`.
/// `cap_angle` replaces an out-of-range threshold with `pi/2` instead of
/// erroring.
pub fn build_threshold_dense(
    ds: &Dataset,
    m: f64,
    cap_angle: bool,
) -> Result<SearchGraph, GraphError> {
    build_threshold(ds, GraphConfig::ThresholdDense { m }, cap_angle)
}

/// Sparse-regime threshold graph: connect within
/// `arccos(sqrt(2 M ln n / d))`.
pub fn build_threshold_sparse(ds: &Dataset, m: f64) -> Result<SearchGraph, GraphError> {
    build_threshold(ds, GraphConfig::ThresholdSparse { m }, false)
}

/// Exact kNN graph by exhaustive scan: each node out-connected to its `k`
/// nearest neighbors, ties broken by lower index. Directed by default;
/// `symmetrize` adds every reverse edge (off by default: search follows
/// out-edges only).
pub fn build_knn(ds: &Dataset, k: usize, symmetrize: bool) -> Result<SearchGraph, GraphError> {
    let n = ds.n();
    if k < 1 || k >= n {
        return Err(GraphError::InvalidParam(format!(
            "k = {k} must satisfy 1 <= k < n = {n}"
        )));
    }
    let mut local = knn_rows(ds, k);
    if symmetrize {
        let mut extra: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (u, row) in local.iter().enumerate() {
            for &v in row {
                extra[v as usize].push(u as u32);
            }
        }
        for (u, row) in local.iter_mut().enumerate() {
            row.extend_from_slice(&extra[u]);
            row.sort_unstable();
            row.dedup();
        }
    }
    Ok(SearchGraph::from_parts_unchecked(
        local,
        GraphConfig::Knn { k, symmetrize },
        ds.id().to_string(),
        dataset_hash(ds),
    ))
}

/// Out-neighbor rows of the exact kNN graph, sorted by index.
/// Nearest-neighbor order uses descending inner product, which is equivalent
/// to ascending distance for unit vectors under all supported metrics.
fn knn_rows(ds: &Dataset, k: usize) -> Vec<Vec<u32>> {
    let n = ds.n();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = ds.point(i);
            let mut cand: Vec<(f64, u32)> = Vec::with_capacity(n - 1);
            for j in 0..n {
                if j != i {
                    cand.push((-dot(xi, ds.point(j)), j as u32));
                }
            }
            cand.select_nth_unstable_by(k - 1, |a, b| {
                a.partial_cmp(b).expect("inner products are finite")
            });
            let mut row: Vec<u32> = cand[..k].iter().map(|&(_, j)| j).collect();
            row.sort_unstable();
            row
        })
        .collect()
}

/// Degree and edge statistics of a graph over its dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphStats {
    pub mean_degree: f64,
    pub min_degree: usize,
    pub max_degree: usize,
    /// Undirected edge count for threshold graphs, directed for kNN.
    pub edge_count: u64,
    /// Expected local degree `(n - 1) C(alpha_M)` for threshold graphs
    /// (computed through the geometry module); `k` for kNN graphs.
    pub expected_f: f64,
}

pub fn graph_stats(g: &SearchGraph, ds: &Dataset) -> Result<GraphStats, GraphError> {
    if g.dataset_hash() != dataset_hash(ds) {
        return Err(GraphError::DatasetMismatch {
            expected: g.dataset_hash(),
            found: dataset_hash(ds),
        });
    }
    let n = ds.n();
    let degrees: Vec<usize> = (0..n).map(|u| g.local(u).len()).collect();
    let total: u64 = degrees.iter().map(|&d| d as u64).sum();
    let expected_f = match g.config() {
        GraphConfig::Knn { k, .. } => k as f64,
        config => {
            let angle = threshold_angle(config, n, ds.sphere_dim(), true)?;
            let spec = CapSpec::new(angle.cos().clamp(0.0, 1.0), ds.sphere_dim() as u32)
                .map_err(|e| GraphError::InvalidParam(e.to_string()))?;
            (n as f64 - 1.0) * cap_volume(spec).value
        }
    };
    Ok(GraphStats {
        mean_degree: total as f64 / n as f64,
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        edge_count: if g.config().is_threshold() {
            total / 2
        } else {
            total
        },
        expected_f,
    })
}
