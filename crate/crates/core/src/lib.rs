//! Proximity-graph nearest-neighbor search on the unit sphere.
//!
//! The crate builds threshold and kNN graphs over datasets on `S^d`,
//! augments them with long-range shortcut edges (distance-based,
//! rank-based, pre-sampled, or uniform), and answers queries with greedy or
//! beam search under exact step/distance-computation accounting. The
//! [`geometry`] module evaluates the spherical-cap volumes that predict
//! graph degrees and step probabilities; [`bench`] runs the experiment
//! suites that check those predictions empirically. [`rerank`] implements
//! the two-space pipeline: search a reduced-dimension image of the dataset,
//! then re-rank the beam pool in the original space.
//!
//! Every randomized component is deterministic given its seed, independent
//! of thread count.

mod mix;

pub mod bench;
pub mod data;
pub mod geometry;
pub mod graph;
pub mod graphio;
pub mod long_edges;
pub mod rerank;
pub mod search;
pub mod vecio;
