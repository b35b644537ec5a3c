//! Datasets of unit vectors, query generation, metrics, and the
//! nearest-neighbor distance histogram.
//!
//! Points live on `S^d` embedded in `R^(d+1)`; `Dataset::dim` is the ambient
//! dimension, `Dataset::sphere_dim` the `d` used everywhere in the geometry
//! module. Datasets are immutable after construction and safe to share
//! across query threads. Generation is single-threaded per seed stream so a
//! given seed always produces the same bytes; ground-truth scans parallelize
//! over queries.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Maximum allowed deviation of a stored point's norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug)]
pub enum DataError {
    InvalidParams(String),
    /// Vector could not be normalized (zero norm).
    DegenerateVector { index: usize },
    /// A stored vector is not unit-norm within tolerance.
    NotNormalized { index: usize, norm: f64 },
    Io(std::io::Error),
    MalformedHeader { detail: String },
    InconsistentDimension { expected: usize, found: usize, index: usize },
    Truncated { index: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::InvalidParams(s) => write!(f, "invalid parameters: {s}"),
            DataError::DegenerateVector { index } => {
                write!(f, "vector {index} has zero norm and cannot be normalized")
            }
            DataError::NotNormalized { index, norm } => {
                write!(f, "vector {index} has norm {norm}, expected 1")
            }
            DataError::Io(e) => write!(f, "io error: {e}"),
            DataError::MalformedHeader { detail } => write!(f, "malformed header: {detail}"),
            DataError::InconsistentDimension {
                expected,
                found,
                index,
            } => write!(
                f,
                "vector {index} has dimension {found}, expected {expected}"
            ),
            DataError::Truncated { index } => write!(f, "file truncated inside vector {index}"),
        }
    }
}

impl std::error::Error for DataError {}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Geodesic distance `arccos(<a, b>)` on the unit sphere.
    Spherical,
    Euclidean,
    /// Same distance as `Spherical`; kept as a separate tag for datasets
    /// conventionally described as angular.
    Angular,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Spherical => write!(f, "spherical"),
            Metric::Euclidean => write!(f, "euclidean"),
            Metric::Angular => write!(f, "angular"),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Distance between two vectors. Spherical and Angular expect unit vectors;
/// the inner product is clamped to `[-1, 1]` before `arccos`. Identical
/// inputs return exactly 0 (arccos of a rounded self-inner-product would
/// not).
pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    if a == b {
        return 0.0;
    }
    match metric {
        Metric::Spherical | Metric::Angular => dot(a, b).clamp(-1.0, 1.0).acos(),
        Metric::Euclidean => {
            let mut acc = 0.0;
            for i in 0..a.len() {
                let d = a[i] - b[i];
                acc += d * d;
            }
            acc.sqrt()
        }
    }
}

/// An immutable set of `n` unit vectors in `R^(d+1)` plus a metric tag.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    dim: usize,
    metric: Metric,
    points: Vec<f64>,
}

impl Dataset {
    /// Wrap raw row-major vectors. With `normalize` every vector is projected
    /// to the unit sphere; otherwise norms are verified against
    /// [`NORM_TOLERANCE`].
    pub fn from_vectors(
        id: impl Into<String>,
        dim: usize,
        metric: Metric,
        mut raw: Vec<f64>,
        normalize: bool,
    ) -> Result<Self, DataError> {
        if dim < 2 {
            return Err(DataError::InvalidParams(format!(
                "ambient dimension {dim} must be >= 2"
            )));
        }
        if raw.is_empty() || raw.len() % dim != 0 {
            return Err(DataError::InvalidParams(format!(
                "{} values do not form whole vectors of dimension {dim}",
                raw.len()
            )));
        }
        let n = raw.len() / dim;
        if n < 2 {
            return Err(DataError::InvalidParams(format!("n = {n} must be >= 2")));
        }
        for i in 0..n {
            let row = &mut raw[i * dim..(i + 1) * dim];
            let norm = dot(row, row).sqrt();
            if normalize {
                if norm < 1e-12 {
                    return Err(DataError::DegenerateVector { index: i });
                }
                let inv = norm.recip();
                for v in row.iter_mut() {
                    *v *= inv;
                }
            } else if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(DataError::NotNormalized { index: i, norm });
            }
        }
        Ok(Dataset {
            id: id.into(),
            dim,
            metric,
            points: raw,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.dim
    }

    /// Ambient dimension `d + 1`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sphere dimension `d` (points live on `S^d`).
    pub fn sphere_dim(&self) -> usize {
        self.dim - 1
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn distance_between(&self, i: usize, j: usize) -> f64 {
        distance(self.point(i), self.point(j), self.metric)
    }

    pub fn distance_to(&self, q: &[f64], i: usize) -> f64 {
        distance(q, self.point(i), self.metric)
    }

    /// Index of the exact nearest neighbor of `q`, ties broken by lowest
    /// index, optionally skipping one index (used when scanning a point
    /// against its own dataset).
    pub fn nearest_excluding(&self, q: &[f64], skip: Option<usize>) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for i in 0..self.n() {
            if Some(i) == skip {
                continue;
            }
            let d = self.distance_to(q, i);
            if d < best.1 || (d == best.1 && i < best.0) {
                best = (i, d);
            }
        }
        (best.0, best.1)
    }
}

/// Density/dimension regime of an `(n, d)` pair, with the derived scale
/// parameters used by the threshold-graph constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    pub n: usize,
    pub d: usize,
    /// `log2(n) / d` in the dense regime, `d / log2(n)` in the sparse one.
    pub omega: f64,
    /// Nearest-neighbor scale: `2^-omega` (dense, a cap radius) or
    /// `2 ln 2 / omega` (sparse, a squared cap height).
    pub delta: f64,
    pub regime: Regime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Dense,
    Sparse,
    Moderate,
}

impl RegimeParams {
    pub fn classify(n: usize, d: usize) -> Self {
        let log2n = (n as f64).log2();
        let df = d as f64;
        if df < log2n {
            let omega = log2n / df;
            RegimeParams {
                n,
                d,
                omega,
                delta: 2f64.powf(-omega),
                regime: Regime::Dense,
            }
        } else if df > log2n {
            let omega = df / log2n;
            RegimeParams {
                n,
                d,
                omega,
                delta: 2.0 * std::f64::consts::LN_2 / omega,
                regime: Regime::Sparse,
            }
        } else {
            RegimeParams {
                n,
                d,
                omega: 1.0,
                delta: 0.5,
                regime: Regime::Moderate,
            }
        }
    }
}

/// Queries plus exhaustively computed ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    dim: usize,
    queries: Vec<f64>,
    /// Exact nearest neighbor index per query (ties by lowest index).
    pub ground_truth: Vec<u32>,
    /// Geodesic radius used when the queries were planted.
    pub planted_radius: Option<f64>,
    /// Dataset element each query was planted around, when planted.
    pub planted_index: Option<Vec<u32>>,
}

impl QuerySet {
    pub fn new(
        dim: usize,
        queries: Vec<f64>,
        ground_truth: Vec<u32>,
        planted_radius: Option<f64>,
        planted_index: Option<Vec<u32>>,
    ) -> Result<Self, DataError> {
        if dim < 2 || queries.len() % dim != 0 {
            return Err(DataError::InvalidParams(
                "query buffer does not match dimension".into(),
            ));
        }
        if queries.len() / dim != ground_truth.len() {
            return Err(DataError::InvalidParams(
                "ground truth length does not match query count".into(),
            ));
        }
        Ok(QuerySet {
            dim,
            queries,
            ground_truth,
            planted_radius,
            planted_index,
        })
    }

    pub fn m(&self) -> usize {
        self.ground_truth.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn query(&self, i: usize) -> &[f64] {
        &self.queries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn queries_flat(&self) -> &[f64] {
        &self.queries
    }
}

fn gaussian_vector(rng: &mut impl Rng, dim: usize, out: &mut Vec<f64>) {
    out.clear();
    for _ in 0..dim {
        out.push(rng.sample(StandardNormal));
    }
}

fn normalize_in_place(v: &mut [f64]) -> bool {
    let norm = dot(v, v).sqrt();
    if norm < 1e-12 {
        return false;
    }
    let inv = norm.recip();
    for x in v.iter_mut() {
        *x *= inv;
    }
    true
}

/// `n` i.i.d. uniform points on `S^d`, from normalized Gaussian vectors.
/// Deterministic given the seed.
pub fn generate_uniform(n: usize, d: usize, seed: u64) -> Result<Dataset, DataError> {
    if n < 2 {
        return Err(DataError::InvalidParams(format!("n = {n} must be >= 2")));
    }
    if d < 1 {
        return Err(DataError::InvalidParams(format!("d = {d} must be >= 1")));
    }
    let dim = d + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n * dim);
    let mut buf = Vec::with_capacity(dim);
    for _ in 0..n {
        loop {
            gaussian_vector(&mut rng, dim, &mut buf);
            if normalize_in_place(&mut buf) {
                break;
            }
        }
        points.extend_from_slice(&buf);
    }
    Dataset::from_vectors(
        format!("uniform-n{n}-d{d}-s{seed}"),
        dim,
        Metric::Spherical,
        points,
        false,
    )
}

/// Clustered synthetic data: a mixture of low-rank Gaussian blobs around
/// uniform centers, normalized to the sphere. Serves as a stand-in for real
/// feature datasets (clustered, low intrinsic dimension) when none is on
/// disk; `rank` controls the intrinsic dimension of each blob.
pub fn generate_clustered(
    n: usize,
    d: usize,
    clusters: usize,
    rank: usize,
    spread: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    if n < 2 || d < 1 || clusters < 1 || rank < 1 {
        return Err(DataError::InvalidParams(
            "need n >= 2, d >= 1, clusters >= 1, rank >= 1".into(),
        ));
    }
    let dim = d + 1;
    let rank = rank.min(dim);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(clusters * dim);
    let mut buf = Vec::with_capacity(dim);
    for _ in 0..clusters {
        loop {
            gaussian_vector(&mut rng, dim, &mut buf);
            if normalize_in_place(&mut buf) {
                break;
            }
        }
        centers.extend_from_slice(&buf);
    }
    // Per-cluster basis of `rank` random directions.
    let mut bases = Vec::with_capacity(clusters * rank * dim);
    for _ in 0..clusters * rank {
        gaussian_vector(&mut rng, dim, &mut buf);
        normalize_in_place(&mut buf);
        bases.extend_from_slice(&buf);
    }
    let mut points = Vec::with_capacity(n * dim);
    let mut point = vec![0.0; dim];
    loop {
        let c = rng.gen_range(0..clusters);
        point.copy_from_slice(&centers[c * dim..(c + 1) * dim]);
        for j in 0..rank {
            let g: f64 = rng.sample(StandardNormal);
            let basis = &bases[(c * rank + j) * dim..(c * rank + j + 1) * dim];
            for (p, b) in point.iter_mut().zip(basis) {
                *p += spread * g * b;
            }
        }
        if normalize_in_place(&mut point) {
            points.extend_from_slice(&point);
        }
        if points.len() == n * dim {
            break;
        }
    }
    Dataset::from_vectors(
        format!("clustered-n{n}-d{d}-c{clusters}-s{seed}"),
        dim,
        Metric::Spherical,
        points,
        false,
    )
}

/// Inverse-CDF sampler for the polar angle of a uniform point in a cap of
/// geodesic radius `r` on `S^d` (density proportional to `sin^(d-1)`),
/// tabulated on a dense grid. Rejection sampling degenerates for small radii.
struct CapAngleSampler {
    radius: f64,
    cdf: Vec<f64>,
}

const CAP_GRID: usize = 4096;

impl CapAngleSampler {
    fn new(radius: f64, d: usize) -> Self {
        let mut cdf = Vec::with_capacity(CAP_GRID + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        let step = radius / CAP_GRID as f64;
        let density = |psi: f64| psi.sin().powi(d as i32 - 1);
        let mut prev = density(0.0);
        for k in 1..=CAP_GRID {
            let cur = density(step * k as f64);
            acc += 0.5 * (prev + cur) * step;
            cdf.push(acc);
            prev = cur;
        }
        let total = acc.max(f64::MIN_POSITIVE);
        for v in cdf.iter_mut() {
            *v /= total;
        }
        *cdf.last_mut().unwrap() = 1.0;
        CapAngleSampler { radius, cdf }
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        let u: f64 = rng.gen();
        let pos = self.cdf.partition_point(|&c| c < u);
        let hi = pos.clamp(1, CAP_GRID);
        let lo = hi - 1;
        let (c0, c1) = (self.cdf[lo], self.cdf[hi]);
        let frac = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        let step = self.radius / CAP_GRID as f64;
        step * (lo as f64 + frac)
    }
}

/// Queries planted uniformly within geodesic distance `radius` of a uniformly
/// chosen dataset element. Ground truth is recomputed exhaustively: the
/// planted point may be beaten by a closer element.
pub fn plant_queries(
    ds: &Dataset,
    m: usize,
    radius: f64,
    seed: u64,
) -> Result<QuerySet, DataError> {
    if !(radius > 0.0 && radius < std::f64::consts::FRAC_PI_2) {
        return Err(DataError::InvalidParams(format!(
            "planted radius {radius} outside (0, pi/2)"
        )));
    }
    if m == 0 {
        return Err(DataError::InvalidParams("m must be >= 1".into()));
    }
    let dim = ds.dim();
    let sampler = CapAngleSampler::new(radius, ds.sphere_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(m * dim);
    let mut planted = Vec::with_capacity(m);
    let mut dir = Vec::with_capacity(dim);
    for _ in 0..m {
        let anchor_idx = rng.gen_range(0..ds.n());
        let anchor = ds.point(anchor_idx);
        planted.push(anchor_idx as u32);
        let psi = sampler.sample(&mut rng);
        // Uniform direction orthogonal to the anchor.
        loop {
            gaussian_vector(&mut rng, dim, &mut dir);
            let proj = dot(&dir, anchor);
            for (v, a) in dir.iter_mut().zip(anchor.iter()) {
                *v -= proj * a;
            }
            if normalize_in_place(&mut dir) {
                break;
            }
        }
        let (sin_psi, cos_psi) = psi.sin_cos();
        let base = queries.len();
        for i in 0..dim {
            queries.push(cos_psi * anchor[i] + sin_psi * dir[i]);
        }
        normalize_in_place(&mut queries[base..base + dim]);
    }
    let ground_truth = exhaustive_ground_truth(ds, &queries, dim);
    QuerySet::new(
        dim,
        queries,
        ground_truth,
        Some(radius),
        Some(planted),
    )
}

/// Queries uniform on the sphere, ground truth exhaustive.
pub fn sample_queries_uniform(ds: &Dataset, m: usize, seed: u64) -> Result<QuerySet, DataError> {
    if m == 0 {
        return Err(DataError::InvalidParams("m must be >= 1".into()));
    }
    let dim = ds.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queries = Vec::with_capacity(m * dim);
    let mut buf = Vec::with_capacity(dim);
    for _ in 0..m {
        loop {
            gaussian_vector(&mut rng, dim, &mut buf);
            if normalize_in_place(&mut buf) {
                break;
            }
        }
        queries.extend_from_slice(&buf);
    }
    let ground_truth = exhaustive_ground_truth(ds, &queries, dim);
    QuerySet::new(dim, queries, ground_truth, None, None)
}

/// Build a query set from externally supplied query vectors (e.g. the query
/// half of a benchmark dataset), with exhaustive ground truth.
pub fn queries_from_vectors(
    ds: &Dataset,
    queries: Vec<f64>,
) -> Result<QuerySet, DataError> {
    let dim = ds.dim();
    if queries.len() % dim != 0 || queries.is_empty() {
        return Err(DataError::InvalidParams(
            "query buffer does not match dataset dimension".into(),
        ));
    }
    let ground_truth = exhaustive_ground_truth(ds, &queries, dim);
    QuerySet::new(dim, queries, ground_truth, None, None)
}

pub(crate) fn exhaustive_ground_truth(ds: &Dataset, queries: &[f64], dim: usize) -> Vec<u32> {
    let m = queries.len() / dim;
    (0..m)
        .into_par_iter()
        .map(|qi| ds.nearest_excluding(&queries[qi * dim..(qi + 1) * dim], None).0 as u32)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` bin edges, uniform over `[0, max]`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn mode_bin_center(&self) -> f64 {
        let (mut best, mut best_count) = (0, 0);
        for (i, &c) in self.counts.iter().enumerate() {
            if c > best_count {
                best = i;
                best_count = c;
            }
        }
        0.5 * (self.edges[best] + self.edges[best + 1])
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Exhaustive nearest-neighbor distance of every dataset point, binned into
/// `bins` equal-width bins over the observed range.
pub fn nn_distance_histogram(ds: &Dataset, bins: usize) -> Result<Histogram, DataError> {
    if bins == 0 {
        return Err(DataError::InvalidParams("bins must be >= 1".into()));
    }
    let dists = nn_distances(ds);
    let max = dists.iter().cloned().fold(0.0f64, f64::max);
    let span = if max > 0.0 { max } else { 1e-12 };
    let mut counts = vec![0u64; bins];
    for &v in &dists {
        let idx = ((v / span) * bins as f64) as usize;
        counts[idx.min(bins - 1)] += 1;
    }
    let edges = (0..=bins).map(|i| span * i as f64 / bins as f64).collect();
    Ok(Histogram { edges, counts })
}

/// Exact distance to the nearest neighbor for every point (parallel scan).
pub fn nn_distances(ds: &Dataset) -> Vec<f64> {
    (0..ds.n())
        .into_par_iter()
        .map(|i| ds.nearest_excluding(ds.point(i), Some(i)).1)
        .collect()
}
