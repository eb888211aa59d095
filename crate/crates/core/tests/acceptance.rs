//! Acceptance suite. Runs every criterion at its stated tolerance, prints one
//! PASS/FAIL line each, then reruns all of them with the same master seed
//! and checks the results are bit-identical.
//!
//! Run with `cargo test --release --test acceptance`.

use std::collections::HashSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde_json::json;

use perturbed_scenery::detectors::k_u_fires;
use perturbed_scenery::harness::{run_detection_experiment, DetectionReport, ExperimentConfig};
use perturbed_scenery::lattice::{
    estimate_intersection_tail, oriented_intersection_via_difference, range_intersection, sample_walk, LatticePoint,
    PathSample, StopRule, WalkSpec,
};
use perturbed_scenery::measures::MeasurePair;
use perturbed_scenery::scenery::{exact_g_sequence, sample_null, Domain, Provenance, SceneryWindow};
use perturbed_scenery::seeds::{mix, stream_rng};
use perturbed_scenery::stats::{wilson_interval, Z95};
use perturbed_scenery::trees::{branching_number, min_cut_sum, BranchingConfig, FlowSpec, FlowTree, LevelProfile, TreeGenerator};
use perturbed_scenery::{ExactMeasures, ExactTree, Tree};

const MASTER: u64 = 0x5CE4_E2A7;

struct Outcome {
    pass: bool,
    detail: String,
    /// Everything the criterion computed, for the reproducibility check.
    digest: String,
}

struct Criterion {
    id: u32,
    name: &'static str,
    limit: Duration,
    run: fn(u64) -> Outcome,
}

/// Config seeds are TOML integers, so they stay below 2^63.
fn seed_for(id: u32) -> u64 {
    mix(MASTER, id as u64) >> 1
}

// ---------------------------------------------------------------- trees ≤ 7

/// Every parent array with `parent[v] < v` on `n` vertices; covers every
/// rooted tree shape, several times over with different vertex orders.
fn recursive_trees(n: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![None]];
    for v in 1..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..v).map(move |q| {
                    let mut p = p.clone();
                    p.push(Some(q));
                    p
                })
            })
            .collect();
    }
    out
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn random_pair2<R: Rng>(rng: &mut R) -> ExactMeasures {
    let a = rng.gen_range(1..20);
    let b = rng.gen_range(1..20);
    MeasurePair::new(vec![q(a, 20), q(20 - a, 20)], vec![q(b, 20), q(20 - b, 20)]).unwrap()
}

/// Random unit flow: each vertex splits its mass by random integer weights.
fn random_flow<R: Rng>(tree: &ExactTree, rng: &mut R) -> Vec<BigRational> {
    let mut flow = vec![BigRational::zero(); tree.len()];
    flow[0] = BigRational::one();
    for v in tree.bfs_order() {
        let kids = tree.children(v);
        let w: Vec<i64> = kids.iter().map(|_| rng.gen_range(1..10)).collect();
        let total: i64 = w.iter().sum();
        for (&c, &wc) in kids.iter().zip(&w) {
            flow[c] = &flow[v] * q(wc, total);
        }
    }
    flow
}

/// Each ray as its root path with the mass of its stub.
fn rays(tree: &ExactTree) -> Vec<(Vec<usize>, BigRational)> {
    tree.stubs().map(|s| (tree.root_path(s), tree.flow(s).clone())).collect()
}

struct Moments {
    /// Instances where some `E_P[g_n] != 1`.
    first_failures: usize,
    /// Instances where some `E_P[g_n^2]` differs from the overlap formula.
    second_failures: usize,
    instances: usize,
    trees: usize,
}

/// `E_P[g_n]` and `E_P[g_n^2]` by summing over all `2^N` sceneries in exact
/// arithmetic, against 1 and `E_{Psi x Psi}[zeta^{|X1 ∩ X2 ∩ {v_1..v_n}|}]`.
fn enumerate_moments(seed: u64, with_second: bool) -> Moments {
    let mut rng = stream_rng(seed, 0);
    let mut m = Moments {
        first_failures: 0,
        second_failures: 0,
        instances: 0,
        trees: 0,
    };
    for n in 2..=7 {
        for parents in recursive_trees(n) {
            // Only leafless trees truncated at a depth are valid: every leaf
            // must sit at the maximal depth.
            let Ok(shape) = ExactTree::from_parents(parents) else { continue };
            m.trees += 1;
            for _ in 0..20 {
                let pair = random_pair2(&mut rng);
                let flow = random_flow(&shape, &mut rng);
                let tree = shape.clone().attach_flow(FlowSpec::Explicit(flow)).unwrap();
                let size = tree.len();
                let mut first = vec![BigRational::zero(); size + 1];
                let mut second = vec![BigRational::zero(); size + 1];
                for mask in 0u32..(1 << size) {
                    let labels: Vec<u8> = (0..size).map(|v| ((mask >> v) & 1) as u8).collect();
                    let p = labels
                        .iter()
                        .fold(BigRational::one(), |acc, &l| acc * &pair.mu()[l as usize]);
                    let s = SceneryWindow::new(Domain::tree(&tree), 2, labels, Provenance::Null, 0).unwrap();
                    let g = exact_g_sequence(&tree, &s, &pair).unwrap();
                    for k in 0..=size {
                        let pg = &p * &g[k];
                        if with_second {
                            second[k] += &pg * &g[k];
                        }
                        first[k] += pg;
                    }
                }
                let zeta = pair.chi_square_zeta();
                let order = tree.bfs_order();
                let all_rays = rays(&tree);
                let mut bad_first = false;
                let mut bad_second = false;
                for k in 0..=size {
                    bad_first |= !first[k].is_one();
                    if !with_second {
                        continue;
                    }
                    let revealed: HashSet<usize> = order[..k].iter().copied().collect();
                    let mut expect = BigRational::zero();
                    for (a, pa) in &all_rays {
                        for (b, pb) in &all_rays {
                            let shared = a.iter().filter(|v| b.contains(v) && revealed.contains(v)).count();
                            let mut z = BigRational::one();
                            for _ in 0..shared {
                                z *= &zeta;
                            }
                            expect += pa * pb * z;
                        }
                    }
                    bad_second |= second[k] != expect;
                }
                m.first_failures += usize::from(bad_first);
                m.second_failures += usize::from(bad_second);
                m.instances += 1;
            }
        }
    }
    m
}

fn criterion1(seed: u64) -> Outcome {
    let m = enumerate_moments(seed, false);
    Outcome {
        pass: m.first_failures == 0,
        detail: format!(
            "{} trees x 20 draws, exact arithmetic: {} instances with E_P g_n != 1",
            m.trees, m.first_failures
        ),
        digest: format!("{}/{}", m.instances, m.first_failures),
    }
}

fn criterion2(seed: u64) -> Outcome {
    let m = enumerate_moments(seed, true);
    Outcome {
        pass: m.second_failures == 0,
        detail: format!(
            "{} trees x 20 draws, exact arithmetic: {} instances with E_P g_n^2 != E[zeta^overlap]",
            m.trees, m.second_failures
        ),
        digest: format!("{}/{}", m.instances, m.second_failures),
    }
}

// ------------------------------------------------------- oriented reduction

fn oriented_paths(d: usize, len: usize) -> Vec<PathSample> {
    let mut walks: Vec<Vec<Vec<i64>>> = vec![vec![vec![0; d]]];
    for _ in 0..len {
        walks = walks
            .into_iter()
            .flat_map(|w| {
                (0..d).map(move |i| {
                    let mut next = w.last().unwrap().clone();
                    next[i] += 1;
                    let mut w = w.clone();
                    w.push(next);
                    w
                })
            })
            .collect();
    }
    walks
        .into_iter()
        .map(|w| PathSample::from_vertices(w.iter().map(|c| LatticePoint::new(c).unwrap()).collect()).unwrap())
        .collect()
}

/// `1 + #{k >= 1 : X1_k - X2_k = 0}`, computed from the coordinates.
fn one_plus_returns(a: &PathSample, b: &PathSample) -> usize {
    1 + a
        .vertices()
        .iter()
        .zip(b.vertices())
        .skip(1)
        .filter(|(x, y)| x.coords().iter().zip(y.coords()).all(|(p, q)| p - q == 0))
        .count()
}

fn criterion3(seed: u64) -> Outcome {
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for d in [2, 3] {
        for len in 0..=6 {
            let paths = oriented_paths(d, len);
            for a in &paths {
                for b in &paths {
                    let expect = one_plus_returns(a, b);
                    if range_intersection(a, b).unwrap() != expect
                        || oriented_intersection_via_difference(a, b).unwrap() != expect
                    {
                        mismatches += 1;
                    }
                    checked += 1;
                }
            }
        }
    }
    let spec = WalkSpec::oriented(4).unwrap();
    let stop = StopRule::FixedSteps { t: 1000 };
    let mut random_sum = 0usize;
    for i in 0..10_000u64 {
        let mut rng = stream_rng(seed, i);
        let a = sample_walk(&spec, stop, &mut rng).unwrap();
        let b = sample_walk(&spec, stop, &mut rng).unwrap();
        let expect = one_plus_returns(&a, &b);
        if range_intersection(&a, &b).unwrap() != expect || oriented_intersection_via_difference(&a, &b).unwrap() != expect
        {
            mismatches += 1;
        }
        random_sum += expect;
        checked += 1;
    }
    Outcome {
        pass: mismatches == 0,
        detail: format!("{checked} pairs, {mismatches} mismatches"),
        digest: format!("{checked}/{mismatches}/{random_sum}"),
    }
}

// ---------------------------------------------------------- tail transition

fn criterion4(seed: u64) -> Outcome {
    let oriented = estimate_intersection_tail(
        &WalkSpec::oriented(4).unwrap(),
        1000,
        100_000,
        None,
        &mut stream_rng(seed, 0),
    )
    .unwrap();
    let window = oriented.fit.window;
    let simple = estimate_intersection_tail(
        &WalkSpec::simple(2).unwrap(),
        1000,
        100_000,
        Some(window),
        &mut stream_rng(seed, 1),
    )
    .unwrap();
    let c4 = oriented.fit.c_hat.unwrap_or(f64::NAN);
    let r2 = oriented.fit.r_squared.unwrap_or(f64::NAN);
    let c2 = simple.fit.c_hat.unwrap_or(f64::NAN);
    Outcome {
        pass: c4 > 0.0 && r2 > 0.95 && c2 < 0.1 * c4,
        detail: format!(
            "oriented d=4: C = {c4:.4}, R^2 = {r2:.4}, window {window:?}; simple d=2: C = {c2:.4} (needs < {:.4})",
            0.1 * c4
        ),
        digest: serde_json::to_string(&json!([oriented, simple])).unwrap(),
    }
}

// --------------------------------------------------------- branching number

/// Minimum of `sum_{u in cut} beta^{-|u|}` over every cut, by listing them.
fn exhaustive_min_cut(tree: &FlowTree<BigRational>, beta: &BigRational) -> BigRational {
    fn cuts(tree: &FlowTree<BigRational>, v: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![v]];
        if !tree.children(v).is_empty() {
            out.extend(product(tree, tree.children(v)));
        }
        out
    }
    fn product(tree: &FlowTree<BigRational>, kids: &[usize]) -> Vec<Vec<usize>> {
        let mut acc: Vec<Vec<usize>> = vec![vec![]];
        for &c in kids {
            let options = cuts(tree, c);
            acc = acc
                .iter()
                .flat_map(|a| {
                    options.iter().map(move |o| {
                        let mut x = a.clone();
                        x.extend(o);
                        x
                    })
                })
                .collect();
        }
        acc
    }
    let inv = BigRational::one() / beta;
    product(tree, tree.children(0))
        .into_iter()
        .map(|cut| {
            cut.iter().fold(BigRational::zero(), |s, &u| {
                let mut w = BigRational::one();
                for _ in 0..tree.depth(u) {
                    w *= &inv;
                }
                s + w
            })
        })
        .min()
        .unwrap()
}

/// Random tree with at most `max` vertices and every leaf at the maximal
/// depth: each vertex above the last level gets one to three children.
fn random_level_tree<R: Rng>(rng: &mut R, max: usize) -> ExactTree {
    loop {
        let depth = rng.gen_range(1..=5);
        let mut parents = vec![None];
        let mut level = vec![0usize];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &v in &level {
                for _ in 0..rng.gen_range(1..=3) {
                    next.push(parents.len());
                    parents.push(Some(v));
                }
            }
            level = next;
        }
        if parents.len() <= max {
            return ExactTree::from_parents(parents).unwrap();
        }
    }
}

fn criterion5(seed: u64) -> Outcome {
    let mut estimates = Vec::new();
    let mut pass = true;
    for b in [2usize, 3, 4] {
        let e = branching_number(&LevelProfile::b_ary(b, 25), &BranchingConfig::default()).unwrap();
        pass &= (e.estimate - b as f64).abs() <= 0.01 && !e.inconclusive;
        estimates.push(e.estimate);
    }
    let mut rng = stream_rng(seed, 0);
    let mut mismatches = 0;
    for _ in 0..100 {
        let tree = random_level_tree(&mut rng, 20);
        let beta = BigRational::new(BigInt::from(rng.gen_range(11..40)), BigInt::from(10));
        if min_cut_sum(&tree, &beta).unwrap() != exhaustive_min_cut(&tree, &beta) {
            mismatches += 1;
        }
    }
    pass &= mismatches == 0;
    Outcome {
        pass,
        detail: format!("br estimates {estimates:?}; DP vs enumeration: {mismatches}/100 mismatches"),
        digest: format!("{estimates:?}/{mismatches}"),
    }
}

// ------------------------------------------------------------ tree threshold

fn tree_config(seed: u64, nu: &str, detector: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        r#"
seed = {seed}
trials = 200
[pair]
mu = [0.25, 0.25, 0.25, 0.25]
nu = {nu}
[domain]
kind = "tree"
generator = {{ kind = "b-ary", b = 2, depth = 16 }}
[detector]
{detector}
"#
    ))
    .unwrap()
}

fn fraction_in(values: &[f64], lo: f64, hi: f64) -> f64 {
    values.iter().filter(|&&g| (lo..=hi).contains(&g)).count() as f64 / values.len() as f64
}

fn digest(r: &DetectionReport) -> String {
    let mut r = r.clone();
    r.wall_clock_secs = 0.0;
    serde_json::to_string(&r).unwrap()
}

fn criterion6(seed: u64) -> Outcome {
    let cut = run_detection_experiment(&tree_config(
        seed,
        "[0.97, 0.01, 0.01, 0.01]",
        "kind = \"treecut\"\ncuts = { kind = \"levels\", from = 1, to = 16 }",
    ))
    .unwrap();
    let gap = cut.power() - cut.type_i;
    let lr = run_detection_experiment(&tree_config(
        mix(seed, 1) >> 1,
        "[0.4, 0.2, 0.2, 0.2]",
        "kind = \"lr\"\nengine = \"exact\"",
    ))
    .unwrap();
    let under_p = fraction_in(&lr.null_statistics, 0.1, 10.0);
    let under_q = fraction_in(&lr.perturbed_statistics, 0.1, 10.0);
    Outcome {
        pass: gap >= 0.5 && under_p > 0.9 && under_q > 0.9,
        detail: format!(
            "treecut: power {:.3} - false alarm {:.3} = {gap:.3}; lr: P(g_N in [0.1,10]) = {under_p:.3} (P), {under_q:.3} (Q)",
            cut.power(),
            cut.type_i
        ),
        digest: digest(&cut) + &digest(&lr),
    }
}

// ---------------------------------------------------------------- radial d=2

/// Strictly decreasing, except that one step may fail if the Wilson
/// intervals of its two ends overlap.
fn decreasing_with_one_overlap(counts: &[u64], trials: u64) -> bool {
    let mut excused = 0;
    for w in counts.windows(2) {
        if w[1] < w[0] {
            continue;
        }
        let a = wilson_interval(w[0], trials, Z95);
        let b = wilson_interval(w[1], trials, Z95);
        if a.overlaps(&b) {
            excused += 1;
        } else {
            return false;
        }
    }
    excused <= 1
}

fn criterion7(seed: u64) -> Outcome {
    let mut type_i = Vec::new();
    let mut type_ii = Vec::new();
    let mut digests = String::new();
    for n in [256i64, 1024, 4096] {
        let cfg = ExperimentConfig::from_toml_str(&format!(
            r#"
seed = {seed}
trials = 200
[pair]
mu = [0.5, 0.5]
nu = [0.75, 0.25]
[domain]
kind = "lattice"
dim = 2
half_width = {hw}
[path]
walk = "simple"
stop = {{ kind = "window-exit" }}
[detector]
kind = "radial"
shells = {n}
"#,
            hw = n + 1
        ))
        .unwrap();
        let r = run_detection_experiment(&cfg).unwrap();
        type_i.push(r.null_arm.decided_perturbed);
        type_ii.push(r.perturbed_arm.decided_null);
        digests += &digest(&r);
    }
    Outcome {
        pass: decreasing_with_one_overlap(&type_i, 200) && decreasing_with_one_overlap(&type_ii, 200),
        detail: format!("n = 256, 1024, 4096: type I counts {type_i:?}, type II counts {type_ii:?} (of 200)"),
        digest: digests,
    }
}

// ------------------------------------------------------------------ cube scan

fn criterion8(seed: u64) -> Outcome {
    let cfg = ExperimentConfig::from_toml_str(&format!(
        r#"
seed = {seed}
trials = 200
[pair]
mu = [0.5, 0.5]
nu = [0.9, 0.1]
[domain]
kind = "lattice"
dim = 2
half_width = 512
[path]
walk = "simple"
stop = {{ kind = "sup-norm-exit", factor = 2 }}
[detector]
kind = "cube"
calibration = {{ trials = 200, false_alarm = 0.1 }}
"#
    ))
    .unwrap();
    let r = run_detection_experiment(&cfg).unwrap();
    let cal_fa = r.calibration["calibration_false_alarm"].as_f64().unwrap();
    let gap = r.power() - r.type_i;
    Outcome {
        pass: gap >= 0.5 && cal_fa <= 0.1,
        detail: format!(
            "delta = {:.4}, calibration false alarm {cal_fa:.3}; power {:.3} - false alarm {:.3} = {gap:.3}",
            r.calibration["delta"].as_f64().unwrap(),
            r.power(),
            r.type_i
        ),
        digest: digest(&r),
    }
}

// ------------------------------------------------------------- K_u null bound

fn criterion9(seed: u64) -> Outcome {
    let tree: Tree = FlowTree::build(&TreeGenerator::BAry { b: 2, depth: 8 }).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    let mut digests = Vec::new();
    for (i, nu) in [[0.97, 0.01, 0.01, 0.01], [0.4, 0.2, 0.2, 0.2]].iter().enumerate() {
        let pair = MeasurePair::new(vec![0.25; 4], nu.to_vec()).unwrap();
        let h = pair.relative_entropy();
        let mut fires = [0u64; 9];
        for s in 0..10_000u64 {
            let scenery = sample_null(Domain::tree(&tree), &pair, mix(seed, (i as u64) << 32 | s)).unwrap();
            for (v, f) in k_u_fires(&tree, &scenery, &pair).unwrap().into_iter().enumerate() {
                fires[tree.depth(v)] += u64::from(f);
            }
        }
        let mut worst: f64 = 0.0;
        for (d, &f) in fires.iter().enumerate().skip(1) {
            let rate = f as f64 / (10_000.0 * (1u64 << d) as f64);
            let bound = 1.2 * (-(d as f64) * h).exp();
            pass &= rate <= bound;
            worst = worst.max(rate / bound);
        }
        lines.push(format!("nu={nu:?}: max rate/(1.2 e^(-|u|H)) = {worst:.3}"));
        digests.push(format!("{fires:?}"));
    }
    Outcome {
        pass,
        detail: lines.join("; "),
        digest: digests.join("/"),
    }
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "martingale identity", limit: Duration::from_secs(10), run: criterion1 },
        Criterion { id: 2, name: "second-moment identity", limit: Duration::from_secs(30), run: criterion2 },
        Criterion { id: 3, name: "oriented reduction", limit: Duration::from_secs(60), run: criterion3 },
        Criterion { id: 4, name: "intersection-tail transition", limit: Duration::from_secs(300), run: criterion4 },
        Criterion { id: 5, name: "branching number", limit: Duration::from_secs(60), run: criterion5 },
        Criterion { id: 6, name: "tree entropy threshold", limit: Duration::from_secs(300), run: criterion6 },
        Criterion { id: 7, name: "d=2 radial detector", limit: Duration::from_secs(600), run: criterion7 },
        Criterion { id: 8, name: "cube-scan separation", limit: Duration::from_secs(600), run: criterion8 },
        Criterion { id: 9, name: "K_u null bound", limit: Duration::from_secs(60), run: criterion9 },
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let selected: Vec<&Criterion> = criteria
        .iter()
        .filter(|c| only.as_ref().map_or(true, |o| o.contains(&c.id)))
        .collect();
    let mut all_pass = true;
    let mut digests = Vec::new();
    for c in &selected {
        let start = Instant::now();
        let out = (c.run)(seed_for(c.id));
        let took = start.elapsed();
        let ok = out.pass && took <= c.limit;
        all_pass &= ok;
        println!(
            "criterion {:>2} [{}] {}: {} ({:.1}s, limit {}s)",
            c.id,
            if ok { "PASS" } else { "FAIL" },
            c.name,
            out.detail,
            took.as_secs_f64(),
            c.limit.as_secs()
        );
        digests.push(out.digest);
    }
    let mut differing = Vec::new();
    for (c, first) in selected.iter().zip(&digests) {
        if (c.run)(seed_for(c.id)).digest != *first {
            differing.push(c.id);
        }
    }
    let ok = differing.is_empty();
    all_pass &= ok;
    println!(
        "criterion 10 [{}] reproducibility: reran criteria {:?}; differing: {:?}",
        if ok { "PASS" } else { "FAIL" },
        selected.iter().map(|c| c.id).collect::<Vec<_>>(),
        differing
    );
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
