//! Two-space search: map the dataset to a lower-dimensional, more uniform
//! sphere, search the graph there, then re-rank the beam candidates in the
//! original space.
//!
//! The transform is pluggable (seeded orthonormalized random projection, PCA
//! fit on the dataset, or identity); the pipeline contract is that the final
//! answer is the original-space argmin over the low-space beam pool, with
//! the two spaces' distance evaluations accounted separately: the
//! original-space evaluations are the expensive ones the technique
//! amortizes.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{distance, DataError, Dataset};
use crate::graph::Neighborhoods;
use crate::search::{beam_search_with_pool, SearchConfig, SearchResult};

#[derive(Debug)]
pub enum TransformError {
    TargetDimTooLarge { target: usize, dim: usize },
    DimensionMismatch { expected: usize, found: usize },
    InvalidSpec(String),
    Data(DataError),
    Io(std::io::Error),
    Format(String),
}

impl fmt::Display for TransformError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformError::TargetDimTooLarge { target, dim } => {
                write!(f, "target dimension {target} exceeds input dimension {dim}")
            }
            TransformError::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            TransformError::InvalidSpec(s) => write!(f, "invalid transform spec: {s}"),
            TransformError::Data(e) => write!(f, "dataset error: {e}"),
            TransformError::Io(e) => write!(f, "io error: {e}"),
            TransformError::Format(s) => write!(f, "transform file format error: {s}"),
        }
    }
}

impl std::error::Error for TransformError {}

impl From<DataError> for TransformError {
    fn from(e: DataError) -> Self {
        TransformError::Data(e)
    }
}

impl From<std::io::Error> for TransformError {
    fn from(e: std::io::Error) -> Self {
        TransformError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    RandomProjection,
    PcaProjection,
    Identity,
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformKind::RandomProjection => write!(f, "rp"),
            TransformKind::PcaProjection => write!(f, "pca"),
            TransformKind::Identity => write!(f, "id"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformSpec {
    pub kind: TransformKind,
    /// Ambient dimension of the image space (the low sphere is
    /// `S^(target_dim - 1)`).
    pub target_dim: usize,
    pub seed: u64,
}

/// A fitted transform: `out_dim x in_dim` projection matrix (absent for
/// identity) plus an optional centering vector (PCA). Output vectors are
/// re-normalized to the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct Transform {
    kind: TransformKind,
    in_dim: usize,
    out_dim: usize,
    matrix: Option<Vec<f64>>,
    mean: Option<Vec<f64>>,
}

impl Transform {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Map one vector into the image space and renormalize. A vector that
    /// projects to (numerically) zero maps to the first basis vector. The
    /// identity transform passes its input through bit-for-bit (inputs are
    /// unit vectors already).
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>, TransformError> {
        if v.len() != self.in_dim {
            return Err(TransformError::DimensionMismatch {
                expected: self.in_dim,
                found: v.len(),
            });
        }
        let mut out: Vec<f64> = match &self.matrix {
            None => return Ok(v.to_vec()),
            Some(m) => {
                let mut centered;
                let src = match &self.mean {
                    Some(mean) => {
                        centered = v.to_vec();
                        for (c, mu) in centered.iter_mut().zip(mean) {
                            *c -= mu;
                        }
                        &centered[..]
                    }
                    None => v,
                };
                (0..self.out_dim)
                    .map(|r| {
                        let row = &m[r * self.in_dim..(r + 1) * self.in_dim];
                        row.iter().zip(src).map(|(a, b)| a * b).sum()
                    })
                    .collect()
            }
        };
        let norm = out.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in out.iter_mut() {
                *x /= norm;
            }
        } else {
            out.iter_mut().for_each(|x| *x = 0.0);
            out[0] = 1.0;
        }
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TransformError> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(b"PGXF")?;
        w.write_u16::<LittleEndian>(1)?;
        w.write_u8(match self.kind {
            TransformKind::RandomProjection => 0,
            TransformKind::PcaProjection => 1,
            TransformKind::Identity => 2,
        })?;
        w.write_u32::<LittleEndian>(self.in_dim as u32)?;
        w.write_u32::<LittleEndian>(self.out_dim as u32)?;
        w.write_u8(self.matrix.is_some() as u8)?;
        w.write_u8(self.mean.is_some() as u8)?;
        if let Some(m) = &self.matrix {
            for &x in m {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        if let Some(m) = &self.mean {
            for &x in m {
                w.write_f64::<LittleEndian>(x)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TransformError> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"PGXF" {
            return Err(TransformError::Format("bad magic".into()));
        }
        if r.read_u16::<LittleEndian>()? != 1 {
            return Err(TransformError::Format("unsupported version".into()));
        }
        let kind = match r.read_u8()? {
            0 => TransformKind::RandomProjection,
            1 => TransformKind::PcaProjection,
            2 => TransformKind::Identity,
            other => return Err(TransformError::Format(format!("unknown kind {other}"))),
        };
        let in_dim = r.read_u32::<LittleEndian>()? as usize;
        let out_dim = r.read_u32::<LittleEndian>()? as usize;
        let has_matrix = r.read_u8()? != 0;
        let has_mean = r.read_u8()? != 0;
        let matrix = if has_matrix {
            let mut m = vec![0.0; in_dim * out_dim];
            r.read_f64_into::<LittleEndian>(&mut m)?;
            Some(m)
        } else {
            None
        };
        let mean = if has_mean {
            let mut m = vec![0.0; in_dim];
            r.read_f64_into::<LittleEndian>(&mut m)?;
            Some(m)
        } else {
            None
        };
        Ok(Transform {
            kind,
            in_dim,
            out_dim,
            matrix,
            mean,
        })
    }
}

/// Fit a transform on the dataset and map every point, renormalizing onto
/// the image sphere. Deterministic given the spec.
pub fn fit_transform(
    ds: &Dataset,
    spec: TransformSpec,
) -> Result<(Dataset, Transform), TransformError> {
    let in_dim = ds.dim();
    if spec.target_dim > in_dim {
        return Err(TransformError::TargetDimTooLarge {
            target: spec.target_dim,
            dim: in_dim,
        });
    }
    if spec.target_dim < 2 {
        return Err(TransformError::InvalidSpec(format!(
            "target dimension {} must be >= 2",
            spec.target_dim
        )));
    }
    let transform = match spec.kind {
        TransformKind::Identity => {
            if spec.target_dim != in_dim {
                return Err(TransformError::InvalidSpec(format!(
                    "identity transform needs target_dim == {in_dim}"
                )));
            }
            Transform {
                kind: spec.kind,
                in_dim,
                out_dim: in_dim,
                matrix: None,
                mean: None,
            }
        }
        TransformKind::RandomProjection => Transform {
            kind: spec.kind,
            in_dim,
            out_dim: spec.target_dim,
            matrix: Some(random_orthonormal_rows(spec.target_dim, in_dim, spec.seed)),
            mean: None,
        },
        TransformKind::PcaProjection => {
            let (matrix, mean) = pca_rows(ds, spec.target_dim);
            Transform {
                kind: spec.kind,
                in_dim,
                out_dim: spec.target_dim,
                matrix: Some(matrix),
                mean: Some(mean),
            }
        }
    };
    let mut low = Vec::with_capacity(ds.n() * transform.out_dim);
    for i in 0..ds.n() {
        low.extend_from_slice(&transform.apply(ds.point(i))?);
    }
    let low_ds = Dataset::from_vectors(
        format!("{}-{}{}", ds.id(), transform.kind, transform.out_dim),
        transform.out_dim,
        ds.metric(),
        low,
        false,
    )?;
    Ok((low_ds, transform))
}

/// Seeded Gaussian matrix with rows orthonormalized by modified
/// Gram-Schmidt.
fn random_orthonormal_rows(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = vec![0.0; rows * cols];
    loop {
        for x in m.iter_mut() {
            *x = rng.sample(rand_distr::StandardNormal);
        }
        if orthonormalize_rows(&mut m, rows, cols) {
            return m;
        }
        // Degenerate draw (measure zero); redraw.
    }
}

fn orthonormalize_rows(m: &mut [f64], rows: usize, cols: usize) -> bool {
    for r in 0..rows {
        for prev in 0..r {
            let proj: f64 = (0..cols).map(|c| m[r * cols + c] * m[prev * cols + c]).sum();
            for c in 0..cols {
                m[r * cols + c] -= proj * m[prev * cols + c];
            }
        }
        let norm: f64 = (0..cols)
            .map(|c| m[r * cols + c] * m[r * cols + c])
            .sum::<f64>()
            .sqrt();
        if norm < 1e-10 {
            return false;
        }
        for c in 0..cols {
            m[r * cols + c] /= norm;
        }
    }
    true
}

/// Top principal directions of the (centered) dataset as matrix rows.
fn pca_rows(ds: &Dataset, out_dim: usize) -> (Vec<f64>, Vec<f64>) {
    let n = ds.n();
    let dim = ds.dim();
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(ds.point(i)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        let p = ds.point(i);
        let centered = DVector::from_iterator(dim, p.iter().zip(&mean).map(|(x, m)| x - m));
        cov.syger(1.0 / n as f64, &centered, &centered, 1.0);
    }
    // syger fills the lower triangle; mirror it.
    for r in 0..dim {
        for c in (r + 1)..dim {
            cov[(r, c)] = cov[(c, r)];
        }
    }
    let eig = cov.symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let mut rows = Vec::with_capacity(out_dim * dim);
    for &col in order.iter().take(out_dim) {
        rows.extend(eig.eigenvectors.column(col).iter().copied());
    }
    (rows, mean)
}

/// Result of a two-space search: low-space search result plus the re-ranked
/// original-space answer and the count of original-space distance
/// evaluations spent on re-ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankResult {
    /// Search result in the transformed space (its `success_exact` refers to
    /// the original ground truth: it is the "low-space-only" answer quality).
    pub low: SearchResult,
    pub answer: usize,
    pub answer_distance: f64,
    pub success_exact: bool,
    pub original_distance_computations: usize,
}

/// Beam-search in the transformed space, then return the candidate closest
/// to the original query in the original space.
pub fn search_and_rerank(
    g_low: &impl Neighborhoods,
    ds_low: &Dataset,
    ds_orig: &Dataset,
    q_orig: &[f64],
    ground_truth: Option<usize>,
    transform: &Transform,
    cfg: &SearchConfig,
) -> Result<RerankResult, TransformError> {
    if ds_low.n() != ds_orig.n() {
        return Err(TransformError::DimensionMismatch {
            expected: ds_orig.n(),
            found: ds_low.n(),
        });
    }
    if ds_low.dim() != transform.out_dim() {
        return Err(TransformError::DimensionMismatch {
            expected: transform.out_dim(),
            found: ds_low.dim(),
        });
    }
    let q_low = transform.apply(q_orig)?;
    let (mut low, pool) = beam_search_with_pool(g_low, ds_low, &q_low, ground_truth, cfg);
    low.success_exact = ground_truth == Some(low.answer);
    let mut best: Option<(f64, u32)> = None;
    for &(node, _) in &pool {
        let d = distance(q_orig, ds_orig.point(node as usize), ds_orig.metric());
        let better = match best {
            None => true,
            Some((bd, bv)) => d < bd || (d == bd && node < bv),
        };
        if better {
            best = Some((d, node));
        }
    }
    let (answer_distance, answer) = best.expect("pool is nonempty");
    Ok(RerankResult {
        low,
        answer: answer as usize,
        answer_distance,
        success_exact: ground_truth == Some(answer as usize),
        original_distance_computations: pool.len(),
    })
}

/// Run a whole query set through the two-space pipeline (parallel, per-query
/// derived seeds, like `search::run_query_set`). Ground truth refers to the
/// original space.
pub fn rerank_query_set(
    g_low: &impl Neighborhoods,
    ds_low: &Dataset,
    ds_orig: &Dataset,
    qs: &crate::data::QuerySet,
    transform: &Transform,
    cfg: &SearchConfig,
) -> Result<Vec<RerankResult>, TransformError> {
    use rayon::prelude::*;
    (0..qs.m())
        .into_par_iter()
        .map(|qi| {
            let per_query = SearchConfig {
                seed: crate::mix::derive_seed(cfg.seed, qi as u64),
                ..*cfg
            };
            search_and_rerank(
                g_low,
                ds_low,
                ds_orig,
                qs.query(qi),
                Some(qs.ground_truth[qi] as usize),
                transform,
                &per_query,
            )
        })
        .collect()
}
