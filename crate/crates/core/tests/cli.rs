use std::path::Path;

use clap::Parser;
use ibmap::cli::{run, Cli};
use ibmap::{Dataset, RunReport, Structure};

fn call(args: &[&str]) -> ibmap::Result<String> {
    let cli = Cli::try_parse_from(std::iter::once("ibmap").chain(args.iter().copied())).expect("arguments parse");
    run(&cli)
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_writes_every_graph_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen");
    call(&["generate", "--n", "6", "--tau", "1", "--graphs", "2", "--sizes", "50,20", "--seed", "4", "--burn-in", "20", "--thin", "2", "--out", path(&out)]).unwrap();
    for g in ["graph_00", "graph_01"] {
        let truth = Structure::load(out.join(g).join("structure.txt")).unwrap();
        assert_eq!(truth.n(), 6);
        let weights = std::fs::read_to_string(out.join(g).join("weights.txt")).unwrap();
        assert_eq!(weights.lines().count(), truth.edge_count());
        assert_eq!(Dataset::load(out.join(g).join("data_N50.csv")).unwrap().len(), 50);
        assert_eq!(Dataset::load(out.join(g).join("data_N20.csv")).unwrap().len(), 20);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["args"]["burn_in"], 20);
    assert_eq!(manifest["graphs"].as_array().unwrap().len(), 2);

    // The smallest legal run.
    call(&["generate", "--n", "2", "--tau", "1", "--graphs", "1", "--sizes", "5", "--out", path(&dir.path().join("tiny"))]).unwrap();
}

#[test]
fn learn_and_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    call(&["generate", "--n", "6", "--tau", "1", "--graphs", "1", "--sizes", "300", "--seed", "1", "--out", path(&gen)]).unwrap();
    let data = gen.join("graph_00/data_N300.csv");
    let truth = gen.join("graph_00/structure.txt");
    for algorithm in ["gsmn", "ibmap-hc", "ibmap-ts"] {
        let out = dir.path().join(algorithm);
        let summary = call(&["learn", "--algorithm", algorithm, "--data", path(&data), "--out", path(&out), "--dump-expansions"]).unwrap();
        assert!(summary.starts_with(algorithm), "{summary}");
        let report: RunReport = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
        let learned = Structure::load(out.join("structure.txt")).unwrap();
        assert_eq!(report.edges, learned.edges());
        assert_eq!(report.ascents.is_some(), algorithm == "ibmap-hc");
        assert!(report.tests.lookups > 0);
        assert_eq!(out.join("expansions.txt").exists(), algorithm == "ibmap-ts");

        let he = call(&["evaluate", "--metric", "he", "--learned", path(&out.join("structure.txt")), "--truth", path(&truth)]).unwrap();
        let record: serde_json::Value = serde_json::from_str(&he).unwrap();
        assert_eq!(record["value"].as_f64().unwrap().fract(), 0.0);
        for metric in ["hi-structure", "hi-data"] {
            let text = call(&["evaluate", "--metric", metric, "--learned", path(&out.join("structure.txt")), "--truth", path(&truth), "--data", path(&data), "--triplets", "100"]).unwrap();
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert!((0.0..=1.0).contains(&v["value"].as_f64().unwrap()));
        }
    }
    // Learning on a third of the rows, as in the real-data protocol.
    let sub = dir.path().join("sub");
    call(&["learn", "--algorithm", "gsmn", "--data", path(&data), "--subsample", "3", "--out", path(&sub)]).unwrap();
    let manifest = std::fs::read_to_string(sub.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"rows\": 100"), "{manifest}");
}

#[test]
fn oracle_learning_needs_only_the_truth() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    let g = Structure::from_edges(5, [(0, 1), (1, 2), (3, 4)]).unwrap();
    g.save(&truth).unwrap();
    let out = dir.path().join("o");
    call(&["learn", "--algorithm", "ibmap-hc", "--test", "oracle", "--truth", path(&truth), "--out", path(&out)]).unwrap();
    assert_eq!(Structure::load(out.join("structure.txt")).unwrap(), g);
}

#[test]
fn misuse_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    Structure::new(15).save(&truth).unwrap();
    let out = path(dir.path());
    let err = call(&["learn", "--algorithm", "ibmap-ts", "--test", "oracle", "--truth", path(&truth), "--out", out]).unwrap_err();
    assert!(err.to_string().contains("--force"), "{err}");
    assert!(call(&["learn", "--algorithm", "gsmn", "--out", out]).is_err());
    assert!(call(&["learn", "--algorithm", "gsmn", "--test", "oracle", "--out", out]).is_err());
    let err = call(&["evaluate", "--metric", "he", "--learned", path(&truth)]).unwrap_err();
    assert!(err.to_string().contains("truth"), "{err}");
    assert!(call(&["evaluate", "--metric", "hi-data", "--learned", path(&truth)]).is_err());
    assert!(call(&["generate", "--n", "3", "--tau", "3", "--out", out]).is_err());
}

#[test]
fn bench_records_failures_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("grid.toml");
    std::fs::write(
        &config,
        "name = \"tiny\"\nn = [5, 2]\ntau = [1, 2]\nsizes = [60]\ngraphs = 2\nburn_in = 20\nthin = 2\ntriplets = 40\nalgorithms = [\"gsmn\", \"ibmap-hc\", \"ibmap-ts\"]\nworkers = 2\n",
    )
    .unwrap();
    let out = dir.path().join("bench");
    let table = call(&["bench", "--config", path(&config), "--out", path(&out)]).unwrap();
    assert!(table.starts_with("name,n,tau,N"));
    let runs = std::fs::read_to_string(out.join("runs.csv")).unwrap();
    // n = 2 cannot carry tau = 2, and n = 2 has too few variables for
    // triplet sampling: those cells fail without stopping the grid.
    assert!(runs.lines().any(|l| l.starts_with("tiny,5,60,1,") && l.contains(",ok,")));
    assert!(runs.lines().any(|l| l.starts_with("tiny,2,60,2,") && l.contains("error")));
    assert_eq!(runs.lines().count(), 1 + 2 * 2 * 2 * 3);
    assert!(out.join("summary.csv").exists() && out.join("timing.csv").exists());
}
