mod common;

use common::{all_triplets, axiom_violations, gnp, separated_by_paths};
use ibmap::Structure;

#[test]
fn separation_matches_path_enumeration() {
    for seed in 0..30 {
        let n = 3 + (seed as usize % 5);
        let g = gnp(n, [0.2, 0.4, 0.6][seed as usize % 3], seed);
        for t in all_triplets(n) {
            assert_eq!(g.separated(&t), separated_by_paths(&g, &t), "{t} in {:?}", g.edges());
        }
    }
}

#[test]
fn axioms_hold_on_dense_and_sparse_graphs() {
    for g in [Structure::new(6), Structure::complete(6), gnp(7, 0.3, 99)] {
        assert_eq!(axiom_violations(&g), [0; 4]);
    }
}

#[test]
fn boundary_is_the_minimal_blanket() {
    // W is outside B(X) exactly when B(X) - {W} separates X from W.
    for seed in 0..20 {
        let g = gnp(7, 0.35, 500 + seed);
        for x in 0..7 {
            let b = g.boundary(x);
            for w in (0..7).filter(|&w| w != x) {
                let z: Vec<usize> = b.iter().copied().filter(|&v| v != w).collect();
                let t = common::triplet(x, w, &z);
                assert_eq!(!b.contains(&w), g.separated(&t));
            }
        }
    }
}
