//! Readers and writers for the little-endian `fvecs`/`bvecs`/`ivecs` vector
//! files used by the common ANN benchmark datasets, plus the TOML metadata
//! sidecars this crate stores next to them.
//!
//! Each vector is a 4-byte little-endian dimension prefix followed by `dim`
//! payload elements (`f32`, `u8`, or `i32`). All vectors in a file must share
//! one dimension.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::data::{DataError, Dataset, Metric, QuerySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Fvecs,
    Bvecs,
}

/// Sanity cap on the per-vector dimension prefix; anything larger is treated
/// as a corrupt header.
const MAX_DIM: usize = 1 << 20;

fn read_dim(
    reader: &mut impl Read,
    index: usize,
    expected: Option<usize>,
) -> Result<Option<usize>, DataError> {
    let dim = match reader.read_i32::<LittleEndian>() {
        Ok(d) => d,
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    if dim <= 0 || dim as usize > MAX_DIM {
        return Err(DataError::MalformedHeader {
            detail: format!("vector {index} declares dimension {dim}"),
        });
    }
    let dim = dim as usize;
    if let Some(expected) = expected {
        if dim != expected {
            return Err(DataError::InconsistentDimension {
                expected,
                found: dim,
                index,
            });
        }
    }
    Ok(Some(dim))
}

/// Read raw `fvecs` content: returns the flat `f64` buffer and the dimension.
pub fn read_fvecs(mut reader: impl Read) -> Result<(Vec<f64>, usize), DataError> {
    let mut out = Vec::new();
    let mut dim = None;
    let mut index = 0;
    while let Some(d) = read_dim(&mut reader, index, dim)? {
        dim = Some(d);
        let mut buf = vec![0f32; d];
        reader
            .read_f32_into::<LittleEndian>(&mut buf)
            .map_err(|e| truncated_or_io(e, index))?;
        out.extend(buf.iter().map(|&v| v as f64));
        index += 1;
    }
    let dim = dim.ok_or(DataError::MalformedHeader {
        detail: "empty file".into(),
    })?;
    Ok((out, dim))
}

/// Read raw `bvecs` content (byte payloads widened to `f64`).
pub fn read_bvecs(mut reader: impl Read) -> Result<(Vec<f64>, usize), DataError> {
    let mut out = Vec::new();
    let mut dim = None;
    let mut index = 0;
    while let Some(d) = read_dim(&mut reader, index, dim)? {
        dim = Some(d);
        let mut buf = vec![0u8; d];
        reader
            .read_exact(&mut buf)
            .map_err(|e| truncated_or_io(e, index))?;
        out.extend(buf.iter().map(|&v| v as f64));
        index += 1;
    }
    let dim = dim.ok_or(DataError::MalformedHeader {
        detail: "empty file".into(),
    })?;
    Ok((out, dim))
}

/// Read `ivecs` content (used for ground-truth indices).
pub fn read_ivecs(mut reader: impl Read) -> Result<(Vec<i32>, usize), DataError> {
    let mut out = Vec::new();
    let mut dim = None;
    let mut index = 0;
    while let Some(d) = read_dim(&mut reader, index, dim)? {
        dim = Some(d);
        let mut buf = vec![0i32; d];
        reader
            .read_i32_into::<LittleEndian>(&mut buf)
            .map_err(|e| truncated_or_io(e, index))?;
        out.extend_from_slice(&buf);
        index += 1;
    }
    let dim = dim.ok_or(DataError::MalformedHeader {
        detail: "empty file".into(),
    })?;
    Ok((out, dim))
}

fn truncated_or_io(e: std::io::Error, index: usize) -> DataError {
    if e.kind() == ErrorKind::UnexpectedEof {
        DataError::Truncated { index }
    } else {
        DataError::Io(e)
    }
}

pub fn write_fvecs(path: &Path, data: &[f64], dim: usize) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in data.chunks(dim) {
        w.write_i32::<LittleEndian>(dim as i32)?;
        for &v in row {
            w.write_f32::<LittleEndian>(v as f32)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ivecs(path: &Path, data: &[i32], dim: usize) -> Result<(), DataError> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in data.chunks(dim) {
        w.write_i32::<LittleEndian>(dim as i32)?;
        for &v in row {
            w.write_i32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Load a vector file into a [`Dataset`]. With `normalize` the vectors are
/// projected onto the unit sphere (required before building spherical-metric
/// graphs); otherwise they must already be unit-norm. The dataset id defaults
/// to the file stem and the metric to spherical.
pub fn load_vectors(
    path: impl AsRef<Path>,
    format: VectorFormat,
    normalize: bool,
) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    load_vectors_with(path, format, normalize, Metric::Spherical, id)
}

pub fn load_vectors_with(
    path: impl AsRef<Path>,
    format: VectorFormat,
    normalize: bool,
    metric: Metric,
    id: impl Into<String>,
) -> Result<Dataset, DataError> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let (raw, dim) = match format {
        VectorFormat::Fvecs => read_fvecs(reader)?,
        VectorFormat::Bvecs => read_bvecs(reader)?,
    };
    Dataset::from_vectors(id, dim, metric, raw, normalize)
}

/// Sidecar describing a stored dataset, written as `<base>.meta.toml`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub id: String,
    pub n: usize,
    /// Ambient dimension (`sphere_d + 1`).
    pub dim: usize,
    /// Sphere dimension `d`: points live on `S^d`.
    pub sphere_d: usize,
    pub metric: Metric,
}

/// Sidecar describing a stored query set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryMeta {
    pub dataset_id: String,
    pub m: usize,
    pub dim: usize,
    pub planted_radius: Option<f64>,
}

fn meta_path(base: &Path) -> PathBuf {
    with_suffix(base, ".meta.toml")
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn toml_error(detail: String) -> DataError {
    DataError::MalformedHeader { detail }
}

/// Write `<base>.fvecs` plus `<base>.meta.toml`.
pub fn save_dataset(base: impl AsRef<Path>, ds: &Dataset) -> Result<(), DataError> {
    let base = base.as_ref();
    write_fvecs(&with_suffix(base, ".fvecs"), ds.points_flat(), ds.dim())?;
    let meta = DatasetMeta {
        id: ds.id().to_string(),
        n: ds.n(),
        dim: ds.dim(),
        sphere_d: ds.sphere_dim(),
        metric: ds.metric(),
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_error(e.to_string()))?;
    std::fs::write(meta_path(base), text)?;
    Ok(())
}

/// Load a dataset stored by [`save_dataset`]. Stored vectors are re-checked
/// against the unit-norm invariant (fvecs payloads are f32, so they are
/// re-normalized on load).
pub fn load_dataset(base: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let base = base.as_ref();
    let text = std::fs::read_to_string(meta_path(base))?;
    let meta: DatasetMeta = toml::from_str(&text).map_err(|e| toml_error(e.to_string()))?;
    if meta.sphere_d + 1 != meta.dim {
        return Err(DataError::MalformedHeader {
            detail: format!(
                "metadata sphere_d {} inconsistent with dim {}",
                meta.sphere_d, meta.dim
            ),
        });
    }
    let (raw, dim) = read_fvecs(BufReader::new(File::open(with_suffix(base, ".fvecs"))?))?;
    if dim != meta.dim {
        return Err(DataError::InconsistentDimension {
            expected: meta.dim,
            found: dim,
            index: 0,
        });
    }
    let ds = Dataset::from_vectors(meta.id, dim, meta.metric, raw, true)?;
    if ds.n() != meta.n {
        return Err(DataError::MalformedHeader {
            detail: format!("metadata declares n = {}, file holds {}", meta.n, ds.n()),
        });
    }
    Ok(ds)
}

/// Write `<base>.fvecs`, `<base>.gt.ivecs`, and `<base>.meta.toml` for a
/// query set.
pub fn save_queries(
    base: impl AsRef<Path>,
    qs: &QuerySet,
    dataset_id: &str,
) -> Result<(), DataError> {
    let base = base.as_ref();
    write_fvecs(&with_suffix(base, ".fvecs"), qs.queries_flat(), qs.dim())?;
    let gt: Vec<i32> = qs.ground_truth.iter().map(|&g| g as i32).collect();
    write_ivecs(&with_suffix(base, ".gt.ivecs"), &gt, 1)?;
    let meta = QueryMeta {
        dataset_id: dataset_id.to_string(),
        m: qs.m(),
        dim: qs.dim(),
        planted_radius: qs.planted_radius,
    };
    let text = toml::to_string_pretty(&meta).map_err(|e| toml_error(e.to_string()))?;
    std::fs::write(meta_path(base), text)?;
    Ok(())
}

pub fn load_queries(base: impl AsRef<Path>) -> Result<(QuerySet, QueryMeta), DataError> {
    let base = base.as_ref();
    let text = std::fs::read_to_string(meta_path(base))?;
    let meta: QueryMeta = toml::from_str(&text).map_err(|e| toml_error(e.to_string()))?;
    let (mut raw, dim) = read_fvecs(BufReader::new(File::open(with_suffix(base, ".fvecs"))?))?;
    let (gt, gt_dim) = read_ivecs(BufReader::new(File::open(with_suffix(base, ".gt.ivecs"))?))?;
    if gt_dim != 1 {
        return Err(DataError::MalformedHeader {
            detail: format!("ground truth rows have dimension {gt_dim}, expected 1"),
        });
    }
    // Queries went through f32 storage; snap them back onto the sphere.
    for row in raw.chunks_mut(dim) {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    let qs = QuerySet::new(
        dim,
        raw,
        gt.iter().map(|&g| g as u32).collect(),
        meta.planted_radius,
        None,
    )?;
    Ok((qs, meta))
}
