//! Acceptance gate: one test per shipping criterion. Each test prints a
//! single `acceptance: PASS — ...` line with its measured numbers (visible
//! under `cargo test --test acceptance -- --nocapture`); a failed assert
//! marks the criterion failed.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::Rng;

use cbnet::casedata::CaseDatabase;
use cbnet::cb::{
    cb_learn, refine_skeleton, resolve_remaining, LearnConfig, OrderingMode, SepsetTable,
};
use cbnet::citest::{chi_square_pvalue, ci_test, ChiSquareOracle, DSepOracle};
use cbnet::geneval::{alarm, forward_sample, structural_diff, BayesNet};
use cbnet::graphs::{Dag, MixedGraph};
use cbnet::k2score::{k2_parents, log_g, K2Config};

use common::{db_from, exact_log_g, random_cases, random_dag, seeded, subsets};

/// Criterion 1: the closed-form node score agrees with an exact
/// integer-factorial evaluation on 200 random databases (n <= 4, r <= 3,
/// m <= 12), relative error of the recovered probability <= 1e-9.
#[test]
fn scoring_matches_exact_integer_factorials() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut evaluated = 0usize;
    for seed in 0..200u64 {
        let mut rng = seeded(seed);
        let n = rng.random_range(1..=4usize);
        let m = rng.random_range(0..=12usize);
        let (cards, cases) = random_cases(&mut rng, n, m);
        let db = db_from(&cards, cases.clone());
        for target in 0..n {
            let others: Vec<usize> = (0..n).filter(|&v| v != target).collect();
            for parents in subsets(&others) {
                let got = log_g(&db, target, &parents).unwrap().value();
                let want = exact_log_g(&cases, &cards, target, &parents);
                // relative error of exp(got) against the exact value
                worst = worst.max((got - want).exp_m1().abs());
                evaluated += 1;
            }
        }
    }
    let dt = start.elapsed();
    assert!(worst <= 1e-9, "worst relative error {worst:e}");
    assert!(dt < Duration::from_secs(5), "took {dt:.2?}");
    println!(
        "acceptance: PASS — node scores match exact integer factorials across 200 random \
         databases ({evaluated} evaluations, worst relative error {worst:.2e}, {dt:.2?})"
    );
}

/// Criterion 2: greedy parent search never scores above the exhaustive
/// maximum over predecessor subsets on 100 random databases (n = 4,
/// m <= 20); the fraction where greedy attains the maximum is reported,
/// not thresholded.
#[test]
fn greedy_never_beats_exhaustive_search() {
    let start = Instant::now();
    let mut searches = 0usize;
    let mut attained = 0usize;
    for seed in 0..100u64 {
        let mut rng = seeded(1000 + seed);
        let m = rng.random_range(1..=20usize);
        let (cards, cases) = random_cases(&mut rng, 4, m);
        let db = db_from(&cards, cases.clone());
        let mut order: Vec<usize> = (0..4).collect();
        for i in (1..4).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        for pos in 0..4 {
            let target = order[pos];
            let candidates: Vec<usize> = order[..pos].to_vec();
            let picked = k2_parents(&db, target, &candidates, K2Config::default()).unwrap();
            let greedy = exact_log_g(&cases, &cards, target, &picked);
            let best = subsets(&candidates)
                .iter()
                .map(|s| exact_log_g(&cases, &cards, target, s))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                greedy <= best + 1e-9,
                "greedy {greedy} above exhaustive max {best} (seed {seed}, node {target})"
            );
            searches += 1;
            if (greedy - best).abs() <= 1e-9 {
                attained += 1;
            }
        }
    }
    let dt = start.elapsed();
    assert!(dt < Duration::from_secs(30), "took {dt:.2?}");
    println!(
        "acceptance: PASS — greedy never exceeded the exhaustive subset maximum in {searches} \
         node searches; it attained the maximum in {attained}/{searches} \
         ({:.1}% — reported, no threshold claimed) ({dt:.2?})",
        100.0 * attained as f64 / searches as f64
    );
}

/// Criterion 3: skeleton refinement driven by the graphical separation
/// oracle recovers the exact adjacency structure of 100 random generating
/// DAGs (n <= 7, max in-degree 3).
#[test]
fn oracle_driven_skeleton_recovery_is_exact() {
    let start = Instant::now();
    for seed in 0..100u64 {
        let mut rng = seeded(2000 + seed);
        let n = rng.random_range(2..=7usize);
        let truth = random_dag(&mut rng, n, 3, 0.5);
        // data is never consulted: the oracle answers from the structure
        let db = db_from(&vec![2; n], Vec::new());
        let oracle = DSepOracle { dag: &truth };
        let mut g1 = MixedGraph::complete_undirected(n);
        let mut sepsets = SepsetTable::new();
        let mut ord = 0usize;
        loop {
            let all_small = refine_skeleton(&mut g1, &db, &mut sepsets, ord, &oracle, 0.1).unwrap();
            if all_small {
                break;
            }
            ord += 1;
        }
        for a in 0..n {
            for b in a + 1..n {
                let in_truth = truth.parents(b).contains(&a) || truth.parents(a).contains(&b);
                assert_eq!(
                    g1.is_adjacent(a, b),
                    in_truth,
                    "pair ({a},{b}) wrong at seed {seed} (refined through order {ord})"
                );
            }
        }
    }
    let dt = start.elapsed();
    assert!(dt < Duration::from_secs(60), "took {dt:.2?}");
    println!(
        "acceptance: PASS — oracle-driven refinement recovered the exact skeleton of all 100 \
         random DAGs with n <= 7, in-degree <= 3 ({dt:.2?})"
    );
}

/// Criterion 4: the chi-square test is calibrated — an independent binary
/// pair at m = 1000 is rejected at a rate inside [0.05, 0.15] over 500
/// trials at alpha = 0.1 — and reproduces published table values.
#[test]
fn chi_square_calibration_and_published_values() {
    let start = Instant::now();
    let mut rejections = 0usize;
    for seed in 0..500u64 {
        let mut rng = seeded(3000 + seed);
        let cases: Vec<Vec<u32>> = (0..1000)
            .map(|_| vec![rng.random_range(0..2u32), rng.random_range(0..2u32)])
            .collect();
        let db = db_from(&[2, 2], cases);
        let verdict = ci_test(&db, 0, 1, &BTreeSet::new(), 0.1).unwrap();
        if !verdict.independent {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / 500.0;
    assert!((0.05..=0.15).contains(&rate), "rejection rate {rate}");

    let p_20_1 = chi_square_pvalue(20.0, 1);
    assert!((p_20_1 - 7.74e-6).abs() <= 1e-7, "p(20, 1) = {p_20_1:e}");
    let p_2706_1 = chi_square_pvalue(2.706, 1);
    assert!((p_2706_1 - 0.100).abs() <= 2e-3, "p(2.706, 1) = {p_2706_1}");

    let dt = start.elapsed();
    println!(
        "acceptance: PASS — rejection rate {rate:.3} for a truly independent pair \
         (nominal 0.1, bounds [0.05, 0.15]); p(20,1) = {p_20_1:.3e}, p(2.706,1) = {p_2706_1:.4} \
         ({dt:.2?})"
    );
}

fn two_state_net(names: &[&str], edges: &[(usize, usize)], cpts: Vec<Vec<Vec<f64>>>) -> BayesNet {
    let values = names.iter().map(|_| vec!["0".to_string(), "1".to_string()]).collect();
    let mut parents = vec![BTreeSet::new(); names.len()];
    for &(p, c) in edges {
        parents[c].insert(p);
    }
    BayesNet::new(
        names.iter().map(|s| s.to_string()).collect(),
        values,
        Dag::new(parents).unwrap(),
        cpts,
    )
    .unwrap()
}

fn chain_net() -> BayesNet {
    two_state_net(
        &["a", "b", "c"],
        &[(0, 1), (1, 2)],
        vec![
            vec![vec![0.1, 0.9]],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
        ],
    )
}

fn collider_net() -> BayesNet {
    // c is a noisy OR of a and b
    two_state_net(
        &["a", "b", "c"],
        &[(0, 2), (1, 2)],
        vec![
            vec![vec![0.1, 0.9]],
            vec![vec![0.1, 0.9]],
            vec![
                vec![0.9, 0.1],
                vec![0.1, 0.9],
                vec![0.1, 0.9],
                vec![0.1, 0.9],
            ],
        ],
    )
}

fn skeleton_of(d: &Dag) -> BTreeSet<(usize, usize)> {
    d.edges().into_iter().map(|(p, c)| (p.min(c), p.max(c))).collect()
}

/// Criterion 5: desk-scale end-to-end recovery — 3-node chain and collider
/// with CPT entries in {0.1, 0.9}, m = 5000: the learned skeleton matches
/// the truth in at least 9 of 10 seeds, and the collider's two arrowheads
/// are both recovered in at least 9 of 10 seeds. Chain orientation is not
/// scored (it is not identifiable from data).
#[test]
fn desk_scale_networks_are_recovered() {
    let start = Instant::now();
    let chain = chain_net();
    let collider = collider_net();
    let mut chain_skeletons = 0usize;
    let mut collider_skeletons = 0usize;
    let mut collider_arrowheads = 0usize;
    for seed in 0..10u64 {
        let db = forward_sample(&chain, 5000, seed).unwrap();
        let learned = cb_learn(&db, &LearnConfig::default(), &ChiSquareOracle).unwrap();
        if skeleton_of(&learned.dag) == skeleton_of(chain.dag()) {
            chain_skeletons += 1;
        }

        let db = forward_sample(&collider, 5000, seed).unwrap();
        let learned = cb_learn(&db, &LearnConfig::default(), &ChiSquareOracle).unwrap();
        if skeleton_of(&learned.dag) == skeleton_of(collider.dag()) {
            collider_skeletons += 1;
        }
        if learned.dag.parents(2).contains(&0) && learned.dag.parents(2).contains(&1) {
            collider_arrowheads += 1;
        }
    }
    let dt = start.elapsed();
    assert!(chain_skeletons >= 9, "chain skeleton recovered in {chain_skeletons}/10 seeds");
    assert!(
        collider_skeletons >= 9,
        "collider skeleton recovered in {collider_skeletons}/10 seeds"
    );
    assert!(
        collider_arrowheads >= 9,
        "collider arrowheads recovered in {collider_arrowheads}/10 seeds"
    );
    assert!(dt < Duration::from_secs(30), "took {dt:.2?}");
    println!(
        "acceptance: PASS — skeleton recovery chain {chain_skeletons}/10, collider \
         {collider_skeletons}/10; both collider arrowheads {collider_arrowheads}/10 ({dt:.2?})"
    );
}

/// Criterion 6: methodology run at ALARM scale — the bundled 37-node,
/// 46-edge structure with synthetic CPTs, 10,000 sampled cases, default
/// settings. Asserted: termination, max CI order <= 4, runtime < 60 s,
/// valid acyclic output. Edge counts are reported with the published CB
/// numbers alongside for context, not asserted (the original case
/// databases are not available).
#[test]
fn alarm_scale_methodology_run() {
    let start = Instant::now();
    let bn = alarm();
    let db = forward_sample(&bn, 10_000, 20260815).unwrap();
    let learned = cb_learn(&db, &LearnConfig::default(), &ChiSquareOracle).unwrap();
    let dt = start.elapsed();

    let diff = structural_diff(&learned.dag, bn.dag()).unwrap();
    println!(
        "alarm-scale run: learned {} edges in {dt:.2?}; of {} gold edges {} correct, \
         {} missing, {} reversed; {} extra; max CI order {}; termination {:?}",
        learned.dag.edge_count(),
        bn.dag().edge_count(),
        diff.correct,
        diff.missing.len(),
        diff.reversed.len(),
        diff.extra.len(),
        learned.max_ord_used(),
        learned.termination,
    );
    for &(p, c) in &diff.missing {
        println!("  missing   {} -> {}", bn.name(p), bn.name(c));
    }
    for &(p, c) in &diff.reversed {
        println!("  reversed  {} -> {}", bn.name(p), bn.name(c));
    }
    for &(p, c) in &diff.extra {
        println!("  extra     {} -> {}", bn.name(p), bn.name(c));
    }
    println!(
        "context: the published CB evaluation on the original ALARM databases reported 45/46 \
         edges recovered with 14 extra and 2 reversed; counts here are informational because \
         those databases are not distributed and these CPTs are synthetic"
    );

    // structure is re-validated from its raw parent sets
    assert!(Dag::new(learned.dag.parent_sets().to_vec()).is_ok());
    assert!(
        learned.max_ord_used() <= 4,
        "CI order climbed to {}",
        learned.max_ord_used()
    );
    assert!(dt < Duration::from_secs(60), "took {dt:.2?}");
    println!(
        "acceptance: PASS — 37-node methodology run finished in {dt:.2?} with max CI order {} \
         and a valid acyclic result",
        learned.max_ord_used()
    );
}

/// Criterion 7: learner invariants on a battery of runs — accepted scores
/// strictly increase, the skeleton never grows, results re-validate as
/// acyclic, and identical inputs give identical results and traces.
#[test]
fn learner_invariants_hold_across_battery() {
    let start = Instant::now();
    let mut battery: Vec<(String, CaseDatabase, LearnConfig)> = vec![
        (
            "chain".into(),
            forward_sample(&chain_net(), 2000, 11).unwrap(),
            LearnConfig::default(),
        ),
        (
            "collider".into(),
            forward_sample(&collider_net(), 2000, 12).unwrap(),
            LearnConfig::default(),
        ),
        (
            "collider-partial".into(),
            forward_sample(&collider_net(), 2000, 13).unwrap(),
            LearnConfig { ordering_mode: OrderingMode::Partial, ..LearnConfig::default() },
        ),
        (
            "collider-frozen".into(),
            forward_sample(&collider_net(), 2000, 14).unwrap(),
            LearnConfig { frozen_resolve: true, ..LearnConfig::default() },
        ),
    ];
    for seed in 0..4u64 {
        let mut rng = seeded(4000 + seed);
        let n = rng.random_range(3..=6usize);
        let m = rng.random_range(100..=400usize);
        let (cards, cases) = random_cases(&mut rng, n, m);
        battery.push((format!("uniform-{seed}"), db_from(&cards, cases), LearnConfig::default()));
    }

    let mut runs = 0usize;
    for (tag, db, cfg) in &battery {
        let one = cb_learn(db, cfg, &ChiSquareOracle).unwrap();
        let two = cb_learn(db, cfg, &ChiSquareOracle).unwrap();
        assert_eq!(one, two, "{tag}: repeated run differed");
        assert_eq!(one.trace_tsv(), two.trace_tsv(), "{tag}: trace differed");

        let mut last = f64::NEG_INFINITY;
        for it in one.iterations.iter().filter(|it| it.accepted) {
            let s = it.log_score.expect("accepted round carries a score").value();
            assert!(s > last, "{tag}: accepted scores not strictly increasing");
            last = s;
        }
        for w in one.iterations.windows(2) {
            assert!(
                w[1].skeleton_edges <= w[0].skeleton_edges,
                "{tag}: skeleton grew between rounds"
            );
        }
        assert!(Dag::new(one.dag.parent_sets().to_vec()).is_ok(), "{tag}: cyclic result");
        runs += 1;
    }
    let dt = start.elapsed();
    println!(
        "acceptance: PASS — score monotonicity, skeleton monotonicity, acyclicity, and \
         run-to-run determinism held across {runs} learner configurations ({dt:.2?})"
    );
}

/// Criterion 8: the two worked examples of the edge-resolution heuristic,
/// re-derived here with the exact-factorial oracle: an exact tie goes to
/// the lower-id source, and 1/480 vs 1/540 orients toward the higher
/// product.
#[test]
fn edge_resolution_matches_oracle_worked_examples() {
    let tie_cases = vec![vec![0, 0], vec![0, 0], vec![1, 1], vec![1, 1]];
    let cards = [2usize, 2];
    let fwd = exact_log_g(&tie_cases, &cards, 0, &BTreeSet::new())
        + exact_log_g(&tie_cases, &cards, 1, &BTreeSet::from([0]));
    let rev = exact_log_g(&tie_cases, &cards, 1, &BTreeSet::new())
        + exact_log_g(&tie_cases, &cards, 0, &BTreeSet::from([1]));
    assert!((fwd - rev).abs() <= 1e-12, "expected an exact tie, got {fwd} vs {rev}");
    assert!((fwd - (1.0f64 / 270.0).ln()).abs() <= 1e-9, "tie product should be 1/270");
    let mut g = MixedGraph::new(2);
    g.set_undirected(0, 1);
    let dag = resolve_remaining(&g, vec![BTreeSet::new(); 2], &db_from(&cards, tie_cases), false)
        .unwrap();
    assert_eq!(dag.parents(1).iter().copied().collect::<Vec<_>>(), vec![0], "tie goes to lower id");

    let skew_cases = vec![vec![0, 0], vec![0, 0], vec![0, 1], vec![1, 1]];
    let fwd = exact_log_g(&skew_cases, &cards, 0, &BTreeSet::new())
        + exact_log_g(&skew_cases, &cards, 1, &BTreeSet::from([0]));
    let rev = exact_log_g(&skew_cases, &cards, 1, &BTreeSet::new())
        + exact_log_g(&skew_cases, &cards, 0, &BTreeSet::from([1]));
    assert!((fwd - (1.0f64 / 480.0).ln()).abs() <= 1e-9, "forward product should be 1/480");
    assert!((rev - (1.0f64 / 540.0).ln()).abs() <= 1e-9, "reverse product should be 1/540");
    assert!(fwd > rev);
    let mut g = MixedGraph::new(2);
    g.set_undirected(0, 1);
    let dag = resolve_remaining(&g, vec![BTreeSet::new(); 2], &db_from(&cards, skew_cases), false)
        .unwrap();
    assert_eq!(dag.parents(1).iter().copied().collect::<Vec<_>>(), vec![0]);

    println!(
        "acceptance: PASS — resolution heuristic reproduces both oracle-derived examples \
         (tie at 1/270 -> lower id; 1/480 vs 1/540 -> higher product)"
    );
}
