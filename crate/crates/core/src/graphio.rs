//! Binary graph files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"PGRF"
//! u16     version (currently 1)
//! u8      kind: 0 threshold-dense, 1 threshold-sparse, 2 knn
//!         kind 0/1: f64 M
//!         kind 2:   u32 k, u8 symmetrize
//! u64     n
//! u64     dataset hash (id, n, ambient dim)
//! u8      long-edge scheme tag: 255 none, 0 kl-dist, 1 kl-rank,
//!         2 kl-rank-presampled, 3 uniform
//!         if tagged: u32 edges_per_node, f64 phi, u64 seed
//! n x     varint neighbor count, then that many varint node indices (local)
//! n x     same for long-range lists
//! ```
//!
//! The dataset hash lets `load_graph` reject a graph/dataset mismatch before
//! any search runs against the wrong adjacency.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::data::Dataset;
use crate::graph::{dataset_hash, GraphConfig, GraphError, Neighborhoods, SearchGraph};
use crate::long_edges::{LongEdgeScheme, LongEdgeTag};

const MAGIC: &[u8; 4] = b"PGRF";
const VERSION: u16 = 1;

pub(crate) fn write_varint(w: &mut impl Write, mut v: u64) -> std::io::Result<()> {
    loop {
        let byte = (v & 0x7f) as u8;
        v >>= 7;
        if v == 0 {
            w.write_all(&[byte])?;
            return Ok(());
        }
        w.write_all(&[byte | 0x80])?;
    }
}

pub(crate) fn read_varint(r: &mut impl Read) -> Result<u64, GraphError> {
    let mut out = 0u64;
    let mut shift = 0u32;
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)?;
        let b = byte[0];
        if shift >= 63 && b > 1 {
            return Err(GraphError::Format("varint overflows u64".into()));
        }
        out |= u64::from(b & 0x7f) << shift;
        if b & 0x80 == 0 {
            return Ok(out);
        }
        shift += 7;
    }
}

fn scheme_to_byte(s: LongEdgeScheme) -> u8 {
    match s {
        LongEdgeScheme::KleinbergDistance => 0,
        LongEdgeScheme::KleinbergRank => 1,
        LongEdgeScheme::RankPresampled => 2,
        LongEdgeScheme::UniformRandom => 3,
    }
}

fn scheme_from_byte(b: u8) -> Result<Option<LongEdgeScheme>, GraphError> {
    Ok(Some(match b {
        0 => LongEdgeScheme::KleinbergDistance,
        1 => LongEdgeScheme::KleinbergRank,
        2 => LongEdgeScheme::RankPresampled,
        3 => LongEdgeScheme::UniformRandom,
        255 => return Ok(None),
        other => return Err(GraphError::Format(format!("unknown scheme tag {other}"))),
    }))
}

fn write_lists(w: &mut impl Write, lists: &[Vec<u32>]) -> std::io::Result<()> {
    for row in lists {
        write_varint(w, row.len() as u64)?;
        for &v in row {
            write_varint(w, v as u64)?;
        }
    }
    Ok(())
}

fn read_lists(r: &mut impl Read, n: usize) -> Result<Vec<Vec<u32>>, GraphError> {
    let mut lists = Vec::with_capacity(n);
    for _ in 0..n {
        let len = read_varint(r)? as usize;
        if len > n {
            return Err(GraphError::Format(format!(
                "neighbor list of length {len} exceeds node count {n}"
            )));
        }
        let mut row = Vec::with_capacity(len);
        for _ in 0..len {
            let v = read_varint(r)?;
            if v >= n as u64 {
                return Err(GraphError::Format(format!("node index {v} out of range")));
            }
            row.push(v as u32);
        }
        lists.push(row);
    }
    Ok(lists)
}

pub fn save_graph(path: impl AsRef<Path>, g: &SearchGraph) -> Result<(), GraphError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_graph(&mut w, g)?;
    w.flush()?;
    Ok(())
}

pub fn write_graph(w: &mut impl Write, g: &SearchGraph) -> Result<(), GraphError> {
    w.write_all(MAGIC)?;
    w.write_u16::<LittleEndian>(VERSION)?;
    match g.config() {
        GraphConfig::ThresholdDense { m } => {
            w.write_u8(0)?;
            w.write_f64::<LittleEndian>(m)?;
        }
        GraphConfig::ThresholdSparse { m } => {
            w.write_u8(1)?;
            w.write_f64::<LittleEndian>(m)?;
        }
        GraphConfig::Knn { k, symmetrize } => {
            w.write_u8(2)?;
            w.write_u32::<LittleEndian>(k as u32)?;
            w.write_u8(symmetrize as u8)?;
        }
    }
    w.write_u64::<LittleEndian>(g.node_count() as u64)?;
    w.write_u64::<LittleEndian>(g.dataset_hash())?;
    match g.long_tag() {
        Some(tag) => {
            w.write_u8(scheme_to_byte(tag.scheme))?;
            w.write_u32::<LittleEndian>(tag.edges_per_node)?;
            w.write_f64::<LittleEndian>(tag.phi)?;
            w.write_u64::<LittleEndian>(tag.seed)?;
        }
        None => w.write_u8(255)?,
    }
    write_lists(w, g.local_lists())?;
    write_lists(w, g.long_lists())?;
    Ok(())
}

/// Load a graph and verify it belongs to `ds`.
pub fn load_graph(path: impl AsRef<Path>, ds: &Dataset) -> Result<SearchGraph, GraphError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(GraphError::Format("bad magic".into()));
    }
    let version = r.read_u16::<LittleEndian>()?;
    if version != VERSION {
        return Err(GraphError::Format(format!("unsupported version {version}")));
    }
    let config = match r.read_u8()? {
        0 => GraphConfig::ThresholdDense {
            m: r.read_f64::<LittleEndian>()?,
        },
        1 => GraphConfig::ThresholdSparse {
            m: r.read_f64::<LittleEndian>()?,
        },
        2 => {
            let k = r.read_u32::<LittleEndian>()? as usize;
            let symmetrize = r.read_u8()? != 0;
            GraphConfig::Knn { k, symmetrize }
        }
        other => return Err(GraphError::Format(format!("unknown graph kind {other}"))),
    };
    let n = r.read_u64::<LittleEndian>()? as usize;
    let hash = r.read_u64::<LittleEndian>()?;
    let expected = dataset_hash(ds);
    if hash != expected || n != ds.n() {
        return Err(GraphError::DatasetMismatch {
            expected: hash,
            found: expected,
        });
    }
    let tag = match scheme_from_byte(r.read_u8()?)? {
        Some(scheme) => {
            let edges_per_node = r.read_u32::<LittleEndian>()?;
            let phi = r.read_f64::<LittleEndian>()?;
            let seed = r.read_u64::<LittleEndian>()?;
            Some(LongEdgeTag {
                scheme,
                edges_per_node,
                phi,
                seed,
            })
        }
        None => None,
    };
    let local = read_lists(&mut r, n)?;
    let long = read_lists(&mut r, n)?;
    let mut g = SearchGraph::from_parts_unchecked(local, config, ds.id().to_string(), hash);
    g.set_long_edges_raw(long, tag);
    Ok(g)
}

/// Serialize a graph to bytes (used by determinism checks).
pub fn graph_bytes(g: &SearchGraph) -> Result<Vec<u8>, GraphError> {
    let mut bytes = Vec::new();
    write_graph(&mut bytes, g)?;
    Ok(bytes)
}
