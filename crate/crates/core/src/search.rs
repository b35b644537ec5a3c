//! Greedy and beam search over a [`Neighborhoods`] graph, with exact
//! accounting of steps and distance computations.
//!
//! Both algorithms never evaluate the distance from a node to the query more
//! than once: a per-query visited set gates every evaluation, so
//! `distance_computations == visited <= n`. Start-node evaluations (including
//! the rejected hemisphere draws) are charged to the same counter.
//!
//! Greedy moves only on strict improvement, so it terminates without a loop
//! check; distance ties everywhere break toward the lower node index. Beam
//! search keeps a bounded pool ordered by `(distance, index)`, expands the
//! closest unexpanded member, and terminates when every member is expanded
//! (the stable-pool criterion). Eviction requires strictly smaller distance
//! than the pool's worst member; with `beam_width = 1` the trajectory,
//! answer, and counters coincide with greedy search.
//!
//! `steps` counts node-to-node moves for greedy and `expansions - 1` for
//! beam (the two agree at width 1 because the final, non-improving
//! neighborhood evaluation of greedy corresponds to the last expansion).
//! `max_steps` bounds that same quantity for both; it is a livelock guard
//! set far above any expected trajectory by default.
//!
//! With `llf` enabled, a node's long-range edges are evaluated first and its
//! local neighbors are skipped whenever some long edge already improves on
//! the node's own distance.
//!
//! Graph and dataset are immutable during querying; queries run
//! independently in parallel with per-query seeds derived from the config
//! seed, so results do not depend on the parallelism degree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Metric, QuerySet};
use crate::graph::Neighborhoods;
use crate::mix::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Greedy,
    Beam { width: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartRule {
    /// Up to 64 seeded uniform draws; the first within distance `pi/2` of the
    /// query wins, otherwise the best draw seen.
    RandomHemisphere,
    FixedIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    pub llf: bool,
    pub start: StartRule,
    /// `None`: `16 n^(1/d) log2 n`, a far-out safety bound.
    pub max_steps: Option<usize>,
    pub seed: u64,
}

impl SearchConfig {
    pub fn greedy(seed: u64) -> Self {
        SearchConfig {
            algorithm: Algorithm::Greedy,
            llf: false,
            start: StartRule::RandomHemisphere,
            max_steps: None,
            seed,
        }
    }

    pub fn beam(width: usize, seed: u64) -> Self {
        SearchConfig {
            algorithm: Algorithm::Beam { width },
            ..SearchConfig::greedy(seed)
        }
    }

    pub fn with_llf(self, llf: bool) -> Self {
        SearchConfig { llf, ..self }
    }

    pub fn with_start(self, start: StartRule) -> Self {
        SearchConfig { start, ..self }
    }

    fn resolved_max_steps(&self, n: usize, sphere_dim: usize) -> usize {
        match self.max_steps {
            Some(s) => s.max(1),
            None => {
                let nf = n as f64;
                let bound = 16.0 * nf.powf(1.0 / sphere_dim as f64) * nf.log2();
                bound.ceil() as usize
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub answer: usize,
    /// Distance from the query to the answer.
    pub answer_distance: f64,
    /// Node-to-node moves (greedy) or expansions minus one (beam).
    pub steps: usize,
    /// Unique distance evaluations, start draws included.
    pub distance_computations: usize,
    /// Nodes whose distance was evaluated; always equals
    /// `distance_computations`.
    pub visited: usize,
    pub success_exact: bool,
    /// The `max_steps` guard fired.
    pub exhausted: bool,
}

/// Bounded ordered candidate set for beam search. Entries are unique nodes
/// sorted by `(distance, index)`; inserting into a full pool requires a
/// distance strictly below the worst member's.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    cap: usize,
    entries: Vec<PoolEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub dist: f64,
    pub node: u32,
    pub expanded: bool,
}

impl CandidatePool {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "beam width must be >= 1");
        CandidatePool {
            cap: capacity,
            entries: Vec::with_capacity(capacity.min(1024)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn best(&self) -> Option<PoolEntry> {
        self.entries.first().copied()
    }

    /// Insert unless the pool is full and `dist` does not strictly improve
    /// on the worst member. Returns whether the node was admitted.
    pub fn try_insert(&mut self, node: u32, dist: f64) -> bool {
        debug_assert!(
            self.entries.iter().all(|e| e.node != node),
            "node {node} inserted twice"
        );
        if self.entries.len() == self.cap {
            let worst = self.entries.last().expect("cap >= 1");
            if dist >= worst.dist {
                return false;
            }
            self.entries.pop();
        }
        let key = (dist, node);
        let pos = self
            .entries
            .partition_point(|e| (e.dist, e.node) < key);
        self.entries.insert(
            pos,
            PoolEntry {
                dist,
                node,
                expanded: false,
            },
        );
        true
    }

    /// Closest unexpanded member, marked expanded.
    fn pop_unexpanded(&mut self) -> Option<(u32, f64)> {
        let e = self.entries.iter_mut().find(|e| !e.expanded)?;
        e.expanded = true;
        Some((e.node, e.dist))
    }
}

/// Per-query evaluation context: distances with a visited gate.
struct Evaluator<'a> {
    ds: &'a Dataset,
    q: &'a [f64],
    visited: Vec<bool>,
    evals: usize,
}

impl<'a> Evaluator<'a> {
    fn new(ds: &'a Dataset, q: &'a [f64]) -> Self {
        Evaluator {
            ds,
            q,
            visited: vec![false; ds.n()],
            evals: 0,
        }
    }

    /// Distance to node `v`, or `None` if `v` was evaluated before.
    fn eval(&mut self, v: u32) -> Option<f64> {
        let v = v as usize;
        if self.visited[v] {
            return None;
        }
        self.visited[v] = true;
        self.evals += 1;
        Some(self.ds.distance_to(self.q, v))
    }
}

const HEMISPHERE_TRIES: usize = 64;

fn hemisphere_bound(metric: Metric) -> f64 {
    match metric {
        Metric::Spherical | Metric::Angular => std::f64::consts::FRAC_PI_2,
        // <q, x> > 0 corresponds to Euclidean distance below sqrt(2) on the
        // unit sphere.
        Metric::Euclidean => std::f64::consts::SQRT_2,
    }
}

/// Choose the start node per the config rule; evaluations (including
/// rejected draws) are charged to the query's counter.
fn pick_start(ds: &Dataset, cfg: &SearchConfig, ev: &mut Evaluator) -> (usize, f64) {
    match cfg.start {
        StartRule::FixedIndex(i) => {
            let d = ev.eval(i as u32).expect("start evaluated first");
            (i, d)
        }
        StartRule::RandomHemisphere => {
            let n = ds.n();
            let bound = hemisphere_bound(ds.metric());
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut seen: Vec<(usize, f64)> = Vec::new();
            let mut best = (usize::MAX, f64::INFINITY);
            for _ in 0..HEMISPHERE_TRIES {
                let i = rng.gen_range(0..n);
                let d = match seen.iter().find(|(j, _)| *j == i) {
                    Some(&(_, d)) => d,
                    None => {
                        let d = ev.eval(i as u32).expect("fresh draw");
                        seen.push((i, d));
                        d
                    }
                };
                if d < bound {
                    return (i, d);
                }
                if d < best.1 || (d == best.1 && i < best.0) {
                    best = (i, d);
                }
            }
            best
        }
    }
}

/// Expand one node: evaluate its unvisited long edges, then (unless `llf`
/// short-circuits) its local neighbors. `on_candidate` receives every fresh
/// evaluation.
fn expand_node(
    g: &impl Neighborhoods,
    ev: &mut Evaluator,
    node: usize,
    node_dist: f64,
    llf: bool,
    mut on_candidate: impl FnMut(u32, f64),
) {
    let mut long_improved = false;
    for &v in g.long(node) {
        if let Some(d) = ev.eval(v) {
            if d < node_dist {
                long_improved = true;
            }
            on_candidate(v, d);
        }
    }
    if llf && long_improved {
        return;
    }
    for &v in g.local(node) {
        if let Some(d) = ev.eval(v) {
            on_candidate(v, d);
        }
    }
}

/// Greedy descent: move to the best strictly improving neighbor until none
/// exists (or the step guard fires).
pub fn greedy_search(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    ground_truth: Option<usize>,
    cfg: &SearchConfig,
) -> SearchResult {
    debug_assert_eq!(g.node_count(), ds.n());
    let max_steps = cfg.resolved_max_steps(ds.n(), ds.sphere_dim());
    let mut ev = Evaluator::new(ds, q);
    let (mut cur, mut cur_dist) = pick_start(ds, cfg, &mut ev);
    let mut steps = 0;
    let mut exhausted = false;
    loop {
        let mut best: Option<(f64, u32)> = None;
        expand_node(g, &mut ev, cur, cur_dist, cfg.llf, |v, d| {
            let better = match best {
                None => true,
                Some((bd, bv)) => d < bd || (d == bd && v < bv),
            };
            if better {
                best = Some((d, v));
            }
        });
        match best {
            Some((d, v)) if d < cur_dist => {
                debug_assert!(d < cur_dist, "moves strictly decrease the distance");
                cur = v as usize;
                cur_dist = d;
                steps += 1;
                if steps >= max_steps {
                    exhausted = true;
                    break;
                }
            }
            _ => break,
        }
    }
    finish(cur, cur_dist, steps, exhausted, &ev, ground_truth)
}

/// Beam search returning the final candidate pool alongside the result.
/// The pool holds the `beam_width` closest evaluated nodes, ascending.
pub fn beam_search_with_pool(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    ground_truth: Option<usize>,
    cfg: &SearchConfig,
) -> (SearchResult, Vec<(u32, f64)>) {
    debug_assert_eq!(g.node_count(), ds.n());
    let width = match cfg.algorithm {
        Algorithm::Beam { width } => width.max(1),
        Algorithm::Greedy => 1,
    };
    let max_steps = cfg.resolved_max_steps(ds.n(), ds.sphere_dim());
    let mut ev = Evaluator::new(ds, q);
    let (start, start_dist) = pick_start(ds, cfg, &mut ev);
    let mut pool = CandidatePool::new(width);
    pool.try_insert(start as u32, start_dist);
    let mut expansions = 0usize;
    let mut exhausted = false;
    while let Some((node, node_dist)) = pool.pop_unexpanded() {
        if expansions > max_steps {
            exhausted = true;
            break;
        }
        expansions += 1;
        expand_node(g, &mut ev, node as usize, node_dist, cfg.llf, |v, d| {
            pool.try_insert(v, d);
        });
    }
    let best = pool.best().expect("pool holds at least the start");
    let result = finish(
        best.node as usize,
        best.dist,
        expansions.saturating_sub(1),
        exhausted,
        &ev,
        ground_truth,
    );
    let snapshot = pool.entries().iter().map(|e| (e.node, e.dist)).collect();
    (result, snapshot)
}

pub fn beam_search(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    ground_truth: Option<usize>,
    cfg: &SearchConfig,
) -> SearchResult {
    beam_search_with_pool(g, ds, q, ground_truth, cfg).0
}

/// Dispatch on the configured algorithm.
pub fn search(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    ground_truth: Option<usize>,
    cfg: &SearchConfig,
) -> SearchResult {
    match cfg.algorithm {
        Algorithm::Greedy => greedy_search(g, ds, q, ground_truth, cfg),
        Algorithm::Beam { .. } => beam_search(g, ds, q, ground_truth, cfg),
    }
}

fn finish(
    answer: usize,
    answer_distance: f64,
    steps: usize,
    exhausted: bool,
    ev: &Evaluator,
    ground_truth: Option<usize>,
) -> SearchResult {
    SearchResult {
        answer,
        answer_distance,
        steps,
        distance_computations: ev.evals,
        visited: ev.evals,
        success_exact: ground_truth == Some(answer),
        exhausted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueryAggregate {
    pub queries: usize,
    pub recall_at_1: f64,
    pub mean_steps: f64,
    pub mean_distance_computations: f64,
    pub mean_visited: f64,
    pub wall_seconds: f64,
}

/// Run every query of a set (in parallel, per-query derived seeds) and
/// return the raw results.
pub fn run_query_set(
    g: &impl Neighborhoods,
    ds: &Dataset,
    qs: &QuerySet,
    cfg: &SearchConfig,
) -> Vec<SearchResult> {
    (0..qs.m())
        .into_par_iter()
        .map(|qi| {
            let per_query = SearchConfig {
                seed: derive_seed(cfg.seed, qi as u64),
                ..*cfg
            };
            search(
                g,
                ds,
                qs.query(qi),
                Some(qs.ground_truth[qi] as usize),
                &per_query,
            )
        })
        .collect()
}

/// Aggregate per-query results: recall@1 plus mean counters. Counter means
/// are exact integer sums divided by the query count.
pub fn evaluate_query_set(
    g: &impl Neighborhoods,
    ds: &Dataset,
    qs: &QuerySet,
    cfg: &SearchConfig,
) -> (QueryAggregate, Vec<SearchResult>) {
    let t0 = std::time::Instant::now();
    let results = run_query_set(g, ds, qs, cfg);
    let wall_seconds = t0.elapsed().as_secs_f64();
    (aggregate(&results, wall_seconds), results)
}

pub fn aggregate(results: &[SearchResult], wall_seconds: f64) -> QueryAggregate {
    let m = results.len();
    let hits = results.iter().filter(|r| r.success_exact).count();
    let steps: u64 = results.iter().map(|r| r.steps as u64).sum();
    let dc: u64 = results.iter().map(|r| r.distance_computations as u64).sum();
    let visited: u64 = results.iter().map(|r| r.visited as u64).sum();
    QueryAggregate {
        queries: m,
        recall_at_1: hits as f64 / m as f64,
        mean_steps: steps as f64 / m as f64,
        mean_distance_computations: dc as f64 / m as f64,
        mean_visited: visited as f64 / m as f64,
        wall_seconds,
    }
}
