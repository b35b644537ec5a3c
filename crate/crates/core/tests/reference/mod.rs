//! Plain-loop reference implementation of greedy and beam search, kept
//! deliberately independent of the library's search code: it reimplements
//! the documented semantics (hemisphere start protocol, long-edges-first
//! evaluation, strict-improvement moves, bounded candidate list with
//! strict-improvement eviction) using a memo map and fully re-sorted
//! candidate vectors.

use std::collections::HashMap;

use proxgraph::data::{distance, Dataset, Metric};
use proxgraph::graph::Neighborhoods;
use proxgraph::search::{Algorithm, SearchConfig, StartRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct NaiveOutcome {
    pub answer: usize,
    pub steps: usize,
    pub dist_comps: usize,
}

struct Memo<'a> {
    ds: &'a Dataset,
    q: &'a [f64],
    dists: HashMap<usize, f64>,
}

impl<'a> Memo<'a> {
    fn new(ds: &'a Dataset, q: &'a [f64]) -> Self {
        Memo {
            ds,
            q,
            dists: HashMap::new(),
        }
    }

    fn known(&self, v: usize) -> bool {
        self.dists.contains_key(&v)
    }

    fn eval(&mut self, v: usize) -> f64 {
        let d = distance(self.q, self.ds.point(v), self.ds.metric());
        self.dists.insert(v, d);
        d
    }

    fn get(&self, v: usize) -> f64 {
        self.dists[&v]
    }
}

fn start_node(ds: &Dataset, cfg: &SearchConfig, memo: &mut Memo) -> usize {
    match cfg.start {
        StartRule::FixedIndex(i) => {
            memo.eval(i);
            i
        }
        StartRule::RandomHemisphere => {
            let bound = match ds.metric() {
                Metric::Euclidean => std::f64::consts::SQRT_2,
                _ => std::f64::consts::FRAC_PI_2,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut best: Option<(usize, f64)> = None;
            for _ in 0..64 {
                let i = rng.gen_range(0..ds.n());
                let d = if memo.known(i) { memo.get(i) } else { memo.eval(i) };
                if d < bound {
                    return i;
                }
                let replace = match best {
                    None => true,
                    Some((bi, bd)) => d < bd || (d == bd && i < bi),
                };
                if replace {
                    best = Some((i, d));
                }
            }
            best.expect("at least one draw").0
        }
    }
}

/// Evaluate the fresh neighbors of `node`, long edges first; returns them
/// with their distances. Locals are skipped when llf is set and some long
/// edge beats the node's own distance.
fn neighbor_round(
    g: &impl Neighborhoods,
    memo: &mut Memo,
    node: usize,
    llf: bool,
) -> Vec<(usize, f64)> {
    let node_dist = memo.get(node);
    let mut fresh = Vec::new();
    let mut long_wins = false;
    for &v in g.long(node) {
        let v = v as usize;
        if !memo.known(v) {
            let d = memo.eval(v);
            if d < node_dist {
                long_wins = true;
            }
            fresh.push((v, d));
        }
    }
    if !(llf && long_wins) {
        for &v in g.local(node) {
            let v = v as usize;
            if !memo.known(v) {
                fresh.push((v, memo.eval(v)));
            }
        }
    }
    fresh
}

pub fn naive_search(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    cfg: &SearchConfig,
) -> NaiveOutcome {
    match cfg.algorithm {
        Algorithm::Greedy => naive_greedy(g, ds, q, cfg),
        Algorithm::Beam { width } => naive_beam(g, ds, q, cfg, width),
    }
}

fn max_steps(cfg: &SearchConfig, ds: &Dataset) -> usize {
    match cfg.max_steps {
        Some(s) => s.max(1),
        None => {
            let n = ds.n() as f64;
            (16.0 * n.powf(1.0 / ds.sphere_dim() as f64) * n.log2()).ceil() as usize
        }
    }
}

fn naive_greedy(g: &impl Neighborhoods, ds: &Dataset, q: &[f64], cfg: &SearchConfig) -> NaiveOutcome {
    let limit = max_steps(cfg, ds);
    let mut memo = Memo::new(ds, q);
    let mut cur = start_node(ds, cfg, &mut memo);
    let mut steps = 0;
    loop {
        let mut fresh = neighbor_round(g, &mut memo, cur, cfg.llf);
        fresh.sort_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).unwrap());
        match fresh.first() {
            Some(&(v, d)) if d < memo.get(cur) => {
                cur = v;
                steps += 1;
                if steps >= limit {
                    break;
                }
            }
            _ => break,
        }
    }
    NaiveOutcome {
        answer: cur,
        steps,
        dist_comps: memo.dists.len(),
    }
}

fn naive_beam(
    g: &impl Neighborhoods,
    ds: &Dataset,
    q: &[f64],
    cfg: &SearchConfig,
    width: usize,
) -> NaiveOutcome {
    let limit = max_steps(cfg, ds);
    let mut memo = Memo::new(ds, q);
    let start = start_node(ds, cfg, &mut memo);
    // (node, expanded); kept sorted by (distance, node) after every change.
    let mut pool: Vec<(usize, bool)> = vec![(start, false)];
    let mut expansions = 0usize;
    loop {
        pool.sort_by(|a, b| {
            (memo.get(a.0), a.0)
                .partial_cmp(&(memo.get(b.0), b.0))
                .unwrap()
        });
        let next = pool.iter().position(|&(_, expanded)| !expanded);
        let Some(pos) = next else { break };
        if expansions > limit {
            break;
        }
        let node = pool[pos].0;
        pool[pos].1 = true;
        expansions += 1;
        for (v, d) in neighbor_round(g, &mut memo, node, cfg.llf) {
            if pool.len() < width {
                pool.push((v, false));
            } else {
                let (worst_pos, &(worst, _)) = pool
                    .iter()
                    .enumerate()
                    .max_by(|a, b| {
                        (memo.get(a.1 .0), a.1 .0)
                            .partial_cmp(&(memo.get(b.1 .0), b.1 .0))
                            .unwrap()
                    })
                    .expect("pool nonempty");
                if d < memo.get(worst) {
                    pool[worst_pos] = (v, false);
                }
            }
        }
    }
    let answer = pool
        .iter()
        .map(|&(v, _)| v)
        .min_by(|&a, &b| (memo.get(a), a).partial_cmp(&(memo.get(b), b)).unwrap())
        .expect("pool nonempty");
    NaiveOutcome {
        answer,
        steps: expansions.saturating_sub(1),
        dist_comps: memo.dists.len(),
    }
}
