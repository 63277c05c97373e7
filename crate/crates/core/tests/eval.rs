mod common;

use common::{all_triplets, gnp, synthetic};
use ibmap::citests::{BayesianTest, OracleTest};
use ibmap::eval::{
    independence_hamming_data, independence_hamming_structure, sample_triplets, stratified_independence_hamming,
    TripletSample,
};
use ibmap::{IndependenceTest, TestCache, Tester};

#[test]
fn exhaustive_sample_gives_the_exact_fraction() {
    for seed in 0..10 {
        let (a, b) = (gnp(6, 0.3, seed), gnp(6, 0.4, 50 + seed));
        let triplets = all_triplets(6);
        let mut per_cardinality = vec![0; 5];
        for t in &triplets {
            per_cardinality[t.z().len()] += 1;
        }
        let wrong = triplets.iter().filter(|t| a.separated(t) != b.separated(t)).count();
        let sample = TripletSample {
            triplets,
            per_cardinality,
            seed: 0,
        };
        let exact = wrong as f64 / sample.triplets.len() as f64;
        assert!((independence_hamming_structure(&a, &b, &sample).unwrap() - exact).abs() < 1e-15);
    }
}

#[test]
fn identical_models_have_zero_distance() {
    let g = gnp(9, 0.3, 4);
    let sample = sample_triplets(9, 500, 1).unwrap();
    assert_eq!(independence_hamming_structure(&g, &g, &sample).unwrap(), 0.0);
    assert_eq!(stratified_independence_hamming(&g, &g, 500).unwrap(), 0.0);
}

#[test]
fn data_distance_counts_test_disagreements() {
    let (truth, data) = synthetic(8, 2, 500, 3);
    let learned = gnp(8, 0.3, 12);
    let sample = sample_triplets(8, 700, 9).unwrap();
    let test = BayesianTest::new(&data);
    let cache = TestCache::new();
    let ours = independence_hamming_data(&learned, &Tester::new(&test, &cache), &sample).unwrap();
    // Same count from uncached decisions.
    let wrong = sample
        .triplets
        .iter()
        .filter(|t| learned.separated(t) != test.judge(t).unwrap().independent)
        .count();
    assert_eq!(ours, wrong as f64 / 700.0);

    // An oracle bound to the truth makes the data distance the structural one.
    let oracle = OracleTest::new(truth.clone(), 0.99).unwrap();
    let via_oracle = independence_hamming_data(&learned, &Tester::new(&oracle, &TestCache::new()), &sample).unwrap();
    assert_eq!(via_oracle, independence_hamming_structure(&learned, &truth, &sample).unwrap());
}
