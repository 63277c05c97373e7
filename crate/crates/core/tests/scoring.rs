mod common;

use common::{gnp, synthetic};
use ibmap::citests::{BayesianTest, OracleTest};
use ibmap::ibscore::{ib_score, mb_closure, structure_from_mb_closure, ScoreState};
use ibmap::{Structure, TestCache, Tester};
use rand::Rng;

/// The score written out from its definition: every ordered pair, its
/// boundary-minus-partner conditioning set, and the asserted value.
fn score_by_definition(g: &Structure, tester: &Tester<'_>) -> f64 {
    let n = g.n();
    let mut total = 0.0;
    for x in 0..n {
        for y in (0..n).filter(|&y| y != x) {
            let z: Vec<usize> = (0..n).filter(|&v| v != y && g.has_edge(x, v)).collect();
            let p = tester.posterior_independent(&common::triplet(x, y, &z)).unwrap();
            total += if g.has_edge(x, y) { (1.0 - p).ln() } else { p.ln() };
        }
    }
    total
}

#[test]
fn score_matches_definition_on_small_graphs() {
    for seed in 0..10 {
        let (_, data) = synthetic(4, 1, 200, seed);
        let test = BayesianTest::new(&data);
        let cache = TestCache::new();
        let tester = Tester::new(&test, &cache);
        for g_seed in 0..8 {
            let g = gnp(4, 0.5, 100 * seed + g_seed);
            let ours = ib_score(&g, &tester).unwrap();
            assert!((ours - score_by_definition(&g, &tester)).abs() < 1e-12);
            let product: f64 = mb_closure(&g)
                .assertions
                .iter()
                .map(|a| tester.judge(&a.triplet).unwrap().probability_of(a.independent))
                .product();
            assert!((ours.exp() - product).abs() <= 1e-9 * product);
        }
    }
}

#[test]
fn oracle_closure_rebuilds_the_graph() {
    for seed in 0..30 {
        let g = gnp(8, 0.3, 7 + seed);
        let oracle = OracleTest::new(g.clone(), 0.99).unwrap();
        let closure = mb_closure(&g);
        assert_eq!(closure.len(), 56);
        // Values from the oracle rather than from the graph itself.
        let mut answered = closure.clone();
        for a in &mut answered.assertions {
            a.independent = ibmap::IndependenceTest::judge(&oracle, &a.triplet).unwrap().independent;
        }
        assert_eq!(structure_from_mb_closure(8, &answered).unwrap(), g);
    }
}

#[test]
fn fifty_variable_flip_costs_two_rows() {
    let (truth, data) = synthetic(50, 2, 200, 1);
    let test = BayesianTest::new(&data);
    let cache = TestCache::new();
    let tester = Tester::new(&test, &cache);
    let state = ScoreState::new(truth.clone(), &tester).unwrap();
    let before = cache.stats();
    let (next, delta) = state.flip_rescore(3, 17, &tester).unwrap();
    let used = cache.stats().since(&before);
    assert_eq!(used.lookups, 98);
    assert!(used.misses <= 98);
    let full = ib_score(&truth.edge_flip(3, 17).unwrap(), &tester).unwrap();
    assert!((next.total() - full).abs() < 1e-9);
    assert!((state.total() + delta - next.total()).abs() < 1e-9);
}

#[test]
fn state_stays_consistent_along_a_random_walk() {
    let (truth, data) = synthetic(9, 2, 400, 5);
    let test = BayesianTest::new(&data);
    let cache = TestCache::new();
    let tester = Tester::new(&test, &cache);
    let mut state = ScoreState::new(truth, &tester).unwrap();
    let mut rng = ibmap::seed::rng(8);
    for _ in 0..200 {
        let x = rng.gen_range(0..9);
        let y = (x + rng.gen_range(1..9)) % 9;
        let predicted = state.flip_delta(x, y, &tester).unwrap();
        let (next, delta) = state.flip_rescore(x, y, &tester).unwrap();
        assert!((predicted - delta).abs() < 1e-12);
        assert!((next.total() - next.sum_of_terms()).abs() < 1e-9);
        state = next;
    }
    assert!((state.total() - ib_score(state.structure(), &tester).unwrap()).abs() < 1e-9);
}
