//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them for passing tests).
//!
//! Criteria that need a fixed desk-scale budget share cached fixtures; every
//! tolerance is pinned in code.

use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use proxgraph::bench::{
    bootstrap_mean_diff, llf_ablation, step_scaling_experiment, table2_analog,
};
use proxgraph::data::{
    generate_clustered, generate_uniform, plant_queries, Dataset, QuerySet,
};
use proxgraph::geometry::{
    cap_volume, cap_volume_mc, intersection_volume, intersection_volume_mc, CapSpec,
    IntersectionSpec,
};
use proxgraph::graph::{
    build_threshold_dense, build_threshold_sparse, graph_stats, Neighborhoods, SearchGraph,
};
use proxgraph::long_edges::{
    attach, default_edges_per_node, distance_probabilities, presampled_draw, rank_order,
    rank_probabilities, sample_long_edges, DiscreteCdf, LongEdgeConfig, LongEdgeScheme,
};
use proxgraph::rerank::{fit_transform, rerank_query_set, TransformKind, TransformSpec};
use proxgraph::search::{
    aggregate, beam_search, greedy_search, run_query_set, SearchConfig, StartRule,
};

mod reference;

fn banner(criterion: u32, name: &str, pass: bool, detail: String) {
    println!(
        "[criterion {criterion}] {}: {} - {detail}",
        name,
        if pass { "PASS" } else { "FAIL" }
    );
}

// ---------------------------------------------------------------------------
// Criterion 1: geometry oracle suite
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_geometry_oracle_suite() {
    let t0 = Instant::now();

    // Hemisphere exactness for every sphere dimension up to 64.
    let mut hemi_ok = true;
    for d in 1..=64u32 {
        let v = cap_volume(CapSpec::new(0.0, d).unwrap()).value;
        if (v - 0.5).abs() > 1e-9 {
            hemi_ok = false;
            println!("  hemisphere d={d}: {v}");
        }
    }

    // 200-spec random grid: quadrature versus 1e6-sample Monte Carlo within
    // three standard errors (sigma from the quadrature value, plus the 1/N
    // discreteness atom).
    let samples = 1_000_000u64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut agree = 0usize;
    let mut cap_agree = 0usize;
    for i in 0..100 {
        let gamma = rng.gen_range(0.0..0.95);
        let d = rng.gen_range(1..=32u32);
        let spec = CapSpec::new(gamma, d).unwrap();
        let q = cap_volume(spec).value;
        let mc = cap_volume_mc(spec, samples, 0xC1_00 + i).unwrap();
        let sigma = (q * (1.0 - q) / samples as f64).sqrt();
        if (q - mc.value).abs() <= 3.0 * sigma + 1.0 / samples as f64 {
            agree += 1;
            cap_agree += 1;
        } else {
            println!("  cap gamma={gamma:.4} d={d}: q={q:.3e} mc={:.3e}", mc.value);
        }
    }
    let mut isec_agree = 0usize;
    for i in 0..100 {
        let alpha = rng.gen_range(0.0..0.9);
        let beta = rng.gen_range(0.0..0.9);
        let theta = rng.gen_range(0.2..std::f64::consts::PI - 0.2);
        let d = rng.gen_range(1..=16u32);
        let spec = IntersectionSpec::new(alpha, beta, theta, d).unwrap();
        let q = intersection_volume(spec).value;
        let mc = intersection_volume_mc(spec, samples, 0xC1_F0 + i).unwrap();
        let sigma = (q * (1.0 - q) / samples as f64).sqrt();
        if (q - mc.value).abs() <= 3.0 * sigma + 1.0 / samples as f64 {
            agree += 1;
            isec_agree += 1;
        } else {
            println!(
                "  isec a={alpha:.3} b={beta:.3} t={theta:.3} d={d}: q={q:.3e} mc={:.3e}",
                mc.value
            );
        }
    }

    // Monotonicity of the step-probability volume in alpha_s on a 50-point
    // decreasing grid.
    let alpha_m = 0.9;
    let mut mono_ok = true;
    let mut prev = -f64::INFINITY;
    for i in 0..50 {
        let alpha_s = 0.98 - 0.96 * i as f64 / 49.0;
        let spec = IntersectionSpec::new(alpha_m, alpha_s, alpha_s.acos(), 8).unwrap();
        let w = intersection_volume(spec).value;
        if w < prev - 1e-8 {
            mono_ok = false;
            println!("  monotonicity breach at alpha_s={alpha_s}: {w} < {prev}");
        }
        prev = w;
    }

    let pass = hemi_ok && agree >= 190 && mono_ok;
    banner(
        1,
        "geometry oracle suite",
        pass,
        format!(
            "hemisphere 1..=64 {}; quad-vs-mc {agree}/200 within 3 sigma \
             (caps {cap_agree}/100, intersections {isec_agree}/100); \
             step-volume monotone {}; {:.0?}",
            if hemi_ok { "exact" } else { "broken" },
            if mono_ok { "yes" } else { "no" },
            t0.elapsed()
        ),
    );
    assert!(hemi_ok, "hemisphere volumes drifted beyond 1e-9");
    assert!(agree >= 190, "only {agree}/200 specs within 3 sigma");
    assert!(mono_ok, "step volume not monotone in alpha_s");
}

// ---------------------------------------------------------------------------
// Criterion 2: degree and edge-count concentration
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_degree_and_edge_concentration() {
    let t0 = Instant::now();
    let n = 20_000usize;
    let ds = generate_uniform(n, 8, 0xC2).unwrap();
    let g = build_threshold_dense(&ds, 1.3, false).unwrap();
    let stats = graph_stats(&g, &ds).unwrap();
    let f = stats.expected_f;

    let mean_ok = (stats.mean_degree - f).abs() / f <= 0.15;
    let in_bracket = (0..n)
        .filter(|&u| {
            let deg = g.local(u).len() as f64;
            deg >= 0.5 * f && deg <= 1.5 * f
        })
        .count();
    let bracket_frac = in_bracket as f64 / n as f64;
    let bracket_ok = bracket_frac >= 0.95;
    let edges = stats.edge_count as f64;
    let edges_ok = edges >= 0.25 * f * n as f64 && edges <= 0.75 * f * n as f64;

    banner(
        2,
        "degree/edge concentration (n=2e4, d=8, M=1.3)",
        mean_ok && bracket_ok && edges_ok,
        format!(
            "mean degree {:.3} vs f {:.3} ({}); degrees in [f/2, 3f/2]: {:.1}% \
             (need >= 95%, {}); |E| = {} in [fn/4, 3fn/4] = [{:.0}, {:.0}] ({}); {:.0?}",
            stats.mean_degree,
            f,
            if mean_ok { "ok" } else { "off" },
            100.0 * bracket_frac,
            if bracket_ok { "ok" } else { "violated" },
            stats.edge_count,
            0.25 * f * n as f64,
            0.75 * f * n as f64,
            if edges_ok { "ok" } else { "violated" },
            t0.elapsed()
        ),
    );
    assert!(mean_ok, "mean degree {} vs expected f {}", stats.mean_degree, f);
    assert!(
        bracket_ok,
        "only {:.1}% of degrees inside [f/2, 3f/2] with f = {f:.3}",
        100.0 * bracket_frac
    );
    assert!(edges_ok, "edge count {} outside [fn/4, 3fn/4]", stats.edge_count);
}

// ---------------------------------------------------------------------------
// Criterion 3: sampler exactness
// ---------------------------------------------------------------------------

/// Count-space multinomial check: every cell within
/// `3 sqrt(N p (1-p)) + 1` of its expectation.
fn multinomial_within_3sigma(counts: &[u64], probs: &[f64], total: u64, label: &str) -> bool {
    let mut ok = true;
    for (i, (&c, &p)) in counts.iter().zip(probs).enumerate() {
        let expect = total as f64 * p;
        let bound = 3.0 * (total as f64 * p * (1.0 - p)).sqrt() + 1.0;
        if (c as f64 - expect).abs() > bound {
            ok = false;
            println!("  {label} cell {i}: count {c} vs expected {expect:.1} (bound {bound:.1})");
        }
    }
    ok
}

#[test]
fn criterion_3_sampler_exactness() {
    let t0 = Instant::now();
    let draws = 100_000u64;

    // Distance-based targets on n = 100.
    let ds = generate_uniform(100, 2, 0xC3).unwrap();
    let probs = distance_probabilities(&ds, 0, false).unwrap();
    let cdf = DiscreteCdf::new(&probs);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3_01);
    let mut counts = vec![0u64; 100];
    for _ in 0..draws {
        counts[cdf.sample(&mut rng)] += 1;
    }
    let dist_ok = multinomial_within_3sigma(&counts, &probs, draws, "eq-dist");

    // Rank-based targets on n = 100 (99 ranks).
    let rank_p = rank_probabilities(100);
    let cdf = DiscreteCdf::new(&rank_p);
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3_02);
    let mut counts = vec![0u64; 99];
    for _ in 0..draws {
        counts[cdf.sample(&mut rng)] += 1;
    }
    let rank_ok = multinomial_within_3sigma(&counts, &rank_p, draws, "eq-rank");

    // Pre-sampled ratio band at phi = 0.5, n = 1e4: for ranks beyond
    // n^(1-phi) = 100 the ratio of pre-sampled to plain rank probability is
    // a constant consistent with Theta(1/phi): fitted constant inside
    // [1, 4/phi] and every log-spaced bin within a factor 2 of it.
    let n = 10_000usize;
    let big = generate_uniform(n, 4, 0xC3_03).unwrap();
    let order = rank_order(&big, 0);
    let rank_p = rank_probabilities(n);
    let pres_cdf = DiscreteCdf::new(&rank_probabilities(101));
    let total_draws = 1_000_000usize;
    let chunks: Vec<Vec<u64>> = (0..128usize)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(0xC3_1000 + c as u64);
            let mut counts = vec![0u64; n];
            for _ in 0..total_draws / 128 {
                let v = presampled_draw(&big, 0, 100, &pres_cdf, &mut rng);
                counts[v as usize] += 1;
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; n];
    for c in chunks {
        for (a, b) in counts.iter_mut().zip(c) {
            *a += b;
        }
    }
    let total: u64 = counts.iter().sum();
    let bins = [
        (100usize, 200usize),
        (200, 400),
        (400, 800),
        (800, 1600),
        (1600, 3200),
        (3200, 6400),
        (6400, 9999),
    ];
    let mut ratios = Vec::new();
    for (lo, hi) in bins {
        let emp: f64 = (lo + 1..=hi)
            .map(|k| counts[order[k - 1] as usize] as f64)
            .sum::<f64>()
            / total as f64;
        let ana: f64 = (lo + 1..=hi).map(|k| rank_p[k - 1]).sum();
        ratios.push(emp / ana);
    }
    let c_star = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    let phi = 0.5;
    let c_ok = (1.0..=4.0 / phi).contains(&c_star);
    let band_ok = ratios.iter().all(|&r| r >= c_star / 2.0 && r <= 2.0 * c_star);

    banner(
        3,
        "sampler exactness",
        dist_ok && rank_ok && c_ok && band_ok,
        format!(
            "distance-law multinomial {}; rank-law multinomial {}; \
             pre-sampling ratio c* = {c_star:.2} in [1, {:.0}] ({}), bins {:?} within \
             factor 2 ({}); {:.0?}",
            if dist_ok { "ok" } else { "violated" },
            if rank_ok { "ok" } else { "violated" },
            4.0 / phi,
            if c_ok { "ok" } else { "off" },
            ratios.iter().map(|r| (r * 100.0).round() / 100.0).collect::<Vec<_>>(),
            if band_ok { "ok" } else { "off" },
            t0.elapsed()
        ),
    );
    assert!(dist_ok, "distance-based frequencies outside 3 sigma");
    assert!(rank_ok, "rank-based frequencies outside 3 sigma");
    assert!(c_ok, "fitted pre-sampling constant {c_star} outside [1, 8]");
    assert!(band_ok, "pre-sampling ratios {ratios:?} not in a factor-2 band");
}

// ---------------------------------------------------------------------------
// Criterion 4: step scaling
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_step_scaling() {
    let t0 = Instant::now();
    let res = step_scaling_experiment(2, &[1000, 4000, 16000, 64000], 2.0, 500, None, None, 0xC4)
        .unwrap();
    for p in &res.points {
        println!(
            "  n={:6} mean_steps={:8.3} recall={:.3} dist_comps={:8.1}",
            p.n, p.mean_steps, p.recall_at_1, p.mean_distance_computations
        );
    }
    let pass = res.slope >= 0.35 && res.slope <= 0.65;
    banner(
        4,
        "step scaling (d=2, M=2, n=1k..64k)",
        pass,
        format!(
            "fitted steps-vs-n exponent {:.3}, target [0.35, 0.65] (prediction 0.5); {:.0?}",
            res.slope,
            t0.elapsed()
        ),
    );
    assert!(
        pass,
        "fitted exponent {:.3} outside [0.35, 0.65]: at M = 2 the threshold graph \
         has mean degree about 1 (expected f = (n-1) C(alpha_M) is approximately 1.0 \
         independent of n), greedy walks stall after a constant number of moves, and \
         mean steps cannot scale as n^(1/d) at this desk scale",
        res.slope
    );
}

// ---------------------------------------------------------------------------
// Criteria 5 and 9 share the d=2, n=64k long-edge setup
// ---------------------------------------------------------------------------

struct LongEdgeFixture {
    ds: Dataset,
    qs: QuerySet,
    plain: SearchGraph,
    kl_rank: SearchGraph,
    uniform: SearchGraph,
}

static LONG_EDGE_FIXTURE: OnceLock<LongEdgeFixture> = OnceLock::new();

/// d = 2, n = 64000, threshold M = 8 (chosen for a navigable plain graph:
/// mean degree ~16, plain-graph recall ~0.9), 500 planted queries at the
/// natural NN radius, and ceil(log2 n) = 16 long edges per node.
fn long_edge_fixture() -> &'static LongEdgeFixture {
    LONG_EDGE_FIXTURE.get_or_init(|| {
        let n = 64_000usize;
        let ds = generate_uniform(n, 2, 0xC5).unwrap();
        let radius = (n as f64).powf(-0.5).asin();
        let qs = plant_queries(&ds, 500, radius, 0xC5_01).unwrap();
        let plain = build_threshold_dense(&ds, 8.0, false).unwrap();
        let budget = default_edges_per_node(n);
        let kl = sample_long_edges(
            &ds,
            &LongEdgeConfig::new(LongEdgeScheme::KleinbergRank, budget, 0xC5_02),
        )
        .unwrap();
        let uni = sample_long_edges(
            &ds,
            &LongEdgeConfig::new(LongEdgeScheme::UniformRandom, budget, 0xC5_03),
        )
        .unwrap();
        let kl_rank = attach(plain.clone(), &kl).unwrap();
        let uniform = attach(plain.clone(), &uni).unwrap();
        LongEdgeFixture {
            ds,
            qs,
            plain,
            kl_rank,
            uniform,
        }
    })
}

#[test]
fn criterion_5_long_edge_effect() {
    let t0 = Instant::now();
    let fx = long_edge_fixture();
    let cfg = SearchConfig::greedy(0xC5_10);
    let plain = run_query_set(&fx.plain, &fx.ds, &fx.qs, &cfg);
    let kl = run_query_set(&fx.kl_rank, &fx.ds, &fx.qs, &cfg);
    let uni = run_query_set(&fx.uniform, &fx.ds, &fx.qs, &cfg);
    let mean = |rs: &[proxgraph::search::SearchResult]| {
        rs.iter().map(|r| r.steps as f64).sum::<f64>() / rs.len() as f64
    };
    let (sp, sk, su) = (mean(&plain), mean(&kl), mean(&uni));
    let ratio = sk / sp;
    let steps_of = |rs: &[proxgraph::search::SearchResult]| -> Vec<u64> {
        rs.iter().map(|r| r.steps as u64).collect()
    };
    let (lo, hi) = bootstrap_mean_diff(&steps_of(&uni), &steps_of(&kl), 0xC5_11);
    let ratio_ok = ratio <= 1.0 / 3.0;
    let sep_ok = lo > 0.0;
    banner(
        5,
        "long-edge effect (d=2, n=64k, M=8, 16 kl-rank edges)",
        ratio_ok && sep_ok,
        format!(
            "mean steps plain {sp:.2}, kl-rank {sk:.2} (ratio {ratio:.3}, need <= 0.333), \
             uniform {su:.2}; uniform-minus-kl 95% CI ({lo:.2}, {hi:.2}); {:.0?}",
            t0.elapsed()
        ),
    );
    assert!(ratio_ok, "kl-rank steps {sk:.2} not <= 1/3 of plain {sp:.2}");
    assert!(sep_ok, "bootstrap CI ({lo:.2}, {hi:.2}) does not separate uniform from kl-rank");
}

#[test]
fn criterion_9_llf_ablation() {
    let t0 = Instant::now();
    let fx = long_edge_fixture();
    let ab = llf_ablation(&fx.kl_rank, &fx.ds, &fx.qs, &SearchConfig::greedy(0xC9));
    let dc_ok = ab.with_llf.mean_distance_computations
        < ab.without_llf.mean_distance_computations;
    let recall_ok = (ab.with_llf.recall_at_1 - ab.without_llf.recall_at_1).abs() <= 0.005;
    banner(
        9,
        "llf ablation",
        dc_ok && recall_ok,
        format!(
            "dist comps {:.1} -> {:.1} with llf; recall {:.4} -> {:.4} (|diff| <= 0.005); {:.0?}",
            ab.without_llf.mean_distance_computations,
            ab.with_llf.mean_distance_computations,
            ab.without_llf.recall_at_1,
            ab.with_llf.recall_at_1,
            t0.elapsed()
        ),
    );
    assert!(dc_ok, "llf did not reduce mean distance computations");
    assert!(recall_ok, "llf changed recall by more than 0.5%");
}

// ---------------------------------------------------------------------------
// Criterion 6: beam-versus-degree trade
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_beam_vs_degree() {
    let t0 = Instant::now();

    // Exact beam(1) == greedy on a fixture, per query.
    let ds = generate_uniform(2_000, 16, 0xC6_01).unwrap();
    let g = proxgraph::graph::build_knn(&ds, 16, false).unwrap();
    let qs = plant_queries(&ds, 100, 0.4, 0xC6_02).unwrap();
    for qi in 0..qs.m() {
        let truth = qs.ground_truth[qi] as usize;
        let seed = 0xC6_0300 + qi as u64;
        let a = greedy_search(&g, &ds, qs.query(qi), Some(truth), &SearchConfig::greedy(seed));
        let b = beam_search(&g, &ds, qs.query(qi), Some(truth), &SearchConfig::beam(1, seed));
        assert_eq!(a, b, "beam(1) != greedy on query {qi}");
    }

    // Minimal kNN degree reaching recall 0.99: greedy versus beam(100).
    let ladder = [
        8usize, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 512, 768, 1024, 1536, 2048,
    ];
    let rows = table2_analog(100_000, &[16], &ladder, 0.99, 100, 1000, 0xC6).unwrap();
    for r in &rows {
        println!(
            "  d={} mode={} min_degree={:?} recall={:.4} steps={:.2}",
            r.d, r.mode, r.min_degree, r.recall_at_1, r.mean_steps
        );
    }
    let greedy_deg = rows
        .iter()
        .find(|r| r.mode == "greedy")
        .and_then(|r| r.min_degree)
        .expect("greedy reached the recall target within the ladder");
    let beam_deg = rows
        .iter()
        .find(|r| r.mode == "beam100")
        .and_then(|r| r.min_degree)
        .expect("beam reached the recall target within the ladder");
    let ratio = greedy_deg as f64 / beam_deg as f64;
    let pass = greedy_deg >= 10 * beam_deg;
    banner(
        6,
        "beam-vs-degree trade (d=16, n=1e5)",
        pass,
        format!(
            "greedy needs degree {greedy_deg}, beam(100) needs {beam_deg} \
             (ratio {ratio:.1}, need >= 10); beam(1) == greedy on 100 fixtures; {:.0?}",
            t0.elapsed()
        ),
    );
    assert!(pass, "degree ratio {ratio:.1} below 10");
}

// ---------------------------------------------------------------------------
// Criterion 7: sparse-regime convergence
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_sparse_convergence() {
    let t0 = Instant::now();
    let n = 10_000usize;
    let ds = generate_uniform(n, 128, 0xC7).unwrap();
    // M = 0.15: inside the regime bound (2 M ln n / d < 1) and below the
    // c = 2 theorem threshold alpha_c^2 / (alpha_c^2 + 1) = 1/3.
    let g = build_threshold_sparse(&ds, 0.15).unwrap();
    let qs = plant_queries(&ds, 1000, std::f64::consts::FRAC_PI_4, 0xC7_01).unwrap();
    let results = run_query_set(&g, &ds, &qs, &SearchConfig::greedy(0xC7_02));
    let within3 =
        results.iter().filter(|r| r.steps <= 3).count() as f64 / results.len() as f64;
    // c,R-ANN success with c = 2, R = pi/4: answer within pi/2 of the query.
    let c_r = std::f64::consts::FRAC_PI_2;
    let within_cr = results.iter().filter(|r| r.answer_distance <= c_r).count() as f64
        / results.len() as f64;
    let steps_ok = within3 >= 0.95;
    let cr_ok = within_cr >= 0.9;
    let agg = aggregate(&results, 0.0);
    banner(
        7,
        "sparse-regime convergence (d=128, n=1e4, M=0.15)",
        steps_ok && cr_ok,
        format!(
            "{:.1}% of searches finish within 3 steps (need >= 95%); \
             c,R success {:.1}% (need >= 90%); exact recall {:.3}; mean steps {:.2}; {:.0?}",
            100.0 * within3,
            100.0 * within_cr,
            agg.recall_at_1,
            agg.mean_steps,
            t0.elapsed()
        ),
    );
    assert!(steps_ok, "only {:.3} of searches finished within 3 steps", within3);
    assert!(cr_ok, "c,R success rate {:.3} below 0.9", within_cr);
}

// ---------------------------------------------------------------------------
// Criterion 8: search oracle equivalence
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_search_oracle_equivalence() {
    let t0 = Instant::now();
    let n = 2_000usize;
    let ds = generate_uniform(n, 2, 0xC8).unwrap();

    // Fixture graphs: the spec's threshold example plus a kNN graph with
    // long edges (exercising llf and beam interplay).
    let threshold = build_threshold_dense(&ds, 2.0, false).unwrap();
    let knn = proxgraph::graph::build_knn(&ds, 8, false).unwrap();
    let set = sample_long_edges(
        &ds,
        &LongEdgeConfig::new(LongEdgeScheme::KleinbergRank, 4, 0xC8_01),
    )
    .unwrap();
    let knn_long = attach(knn, &set).unwrap();

    let mut checked = 0usize;
    for seed in 0..5u64 {
        let qs = plant_queries(&ds, 200, 0.05, 0xC8_10 + seed).unwrap();
        for (gname, g) in [("threshold", &threshold), ("knn+long", &knn_long)] {
            for llf in [false, true] {
                for qi in 0..qs.m() {
                    let truth = qs.ground_truth[qi] as usize;
                    let qseed = 0xC8_0100 + seed * 1000 + qi as u64;
                    for cfg in [
                        SearchConfig::greedy(qseed).with_llf(llf),
                        SearchConfig::beam(4, qseed).with_llf(llf),
                        SearchConfig::greedy(qseed)
                            .with_llf(llf)
                            .with_start(StartRule::FixedIndex(qi % n)),
                    ] {
                        let ours = proxgraph::search::search(
                            g,
                            &ds,
                            qs.query(qi),
                            Some(truth),
                            &cfg,
                        );
                        let naive = reference::naive_search(g, &ds, qs.query(qi), &cfg);
                        assert_eq!(
                            (ours.answer, ours.steps, ours.distance_computations, ours.visited),
                            (naive.answer, naive.steps, naive.dist_comps, naive.dist_comps),
                            "{gname} llf={llf} seed={seed} query={qi} cfg={cfg:?}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }
    banner(
        8,
        "search oracle equivalence",
        true,
        format!(
            "{checked} (graph, query, config) runs identical to the naive reference; {:.0?}",
            t0.elapsed()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion 10: pipeline dominance
// ---------------------------------------------------------------------------

/// SIFT-style dataset: the real SIFT base file when `PROXGRAPH_SIFT` points
/// at an fvecs file, otherwise a clustered low-intrinsic-dimension surrogate
/// of the same shape (10^4 vectors, 128 ambient dimensions).
fn sift_like_dataset() -> Dataset {
    if let Ok(path) = std::env::var("PROXGRAPH_SIFT") {
        let ds = proxgraph::vecio::load_vectors(&path, proxgraph::vecio::VectorFormat::Fvecs, true)
            .expect("readable fvecs at PROXGRAPH_SIFT");
        let take = 10_000.min(ds.n());
        return Dataset::from_vectors(
            format!("{}-first{take}", ds.id()),
            ds.dim(),
            ds.metric(),
            ds.points_flat()[..take * ds.dim()].to_vec(),
            false,
        )
        .unwrap();
    }
    generate_clustered(10_000, 127, 64, 16, 0.2, 0xCA).unwrap()
}

#[test]
fn criterion_10_pipeline_dominance() {
    let t0 = Instant::now();
    let ds = sift_like_dataset();
    let (low, transform) = fit_transform(
        &ds,
        TransformSpec {
            kind: TransformKind::RandomProjection,
            target_dim: 8,
            seed: 0xCA_01,
        },
    )
    .unwrap();
    // Clustered data fragments a bare kNN graph into per-cluster islands;
    // rank-based long edges make it navigable across clusters.
    let knn_low = proxgraph::graph::build_knn(&low, 16, false).unwrap();
    let set = sample_long_edges(
        &low,
        &LongEdgeConfig::new(
            LongEdgeScheme::KleinbergRank,
            default_edges_per_node(low.n()),
            0xCA_04,
        ),
    )
    .unwrap();
    let g_low = attach(knn_low, &set).unwrap();
    let qs = plant_queries(&ds, 500, 0.15, 0xCA_02).unwrap();

    let mut lines = Vec::new();
    let mut all_ok = true;
    for width in [4usize, 16, 64] {
        let cfg = SearchConfig::beam(width, 0xCA_03);
        let results = rerank_query_set(&g_low, &low, &ds, &qs, &transform, &cfg).unwrap();
        let low_recall = results.iter().filter(|r| r.low.success_exact).count() as f64
            / results.len() as f64;
        let rr_recall = results.iter().filter(|r| r.success_exact).count() as f64
            / results.len() as f64;
        all_ok &= rr_recall >= low_recall;
        lines.push(format!("beam {width}: low {low_recall:.3} rerank {rr_recall:.3}"));
        assert!(
            rr_recall >= low_recall,
            "beam {width}: rerank recall {rr_recall} below low-space recall {low_recall}"
        );
    }
    banner(
        10,
        "pipeline dominance",
        all_ok,
        format!("dataset {}; {}; {:.0?}", ds.id(), lines.join("; "), t0.elapsed()),
    );
}
