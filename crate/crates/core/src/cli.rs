//! Command-line front end: generate benchmarks, learn structures, evaluate
//! them and run experiment grids. Every command writes a manifest with its
//! resolved options so the run can be repeated exactly.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::citests::{BayesianTest, ChiSquareTest, IndependenceTest, OracleTest, TestCache, Tester};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::eval::{self, format_mean_sd, ratio_report};
use crate::graph::Structure;
use crate::gsmn::EdgeRule;
use crate::ibmap_hc::{ibmap_hc, run_gsmn, HcOptions};
use crate::ibmap_ts::{self, ibmap_ts, TsOptions};
use crate::report::RunReport;
use crate::seed;
use crate::synth::{self, GibbsOptions};

#[derive(Debug, Parser)]
#[command(name = "ibmap", version, about = "Independence-based MAP structure learning for Markov networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample random structures, potentials and datasets.
    Generate(GenerateArgs),
    /// Learn a structure from data (or from an oracle).
    Learn(LearnArgs),
    /// Compare a learned structure with a truth structure or with data.
    Evaluate(EvaluateArgs),
    /// Run a grid of generate/learn/evaluate cells from a config file.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Bayes,
    Chi2,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum Algorithm {
    #[value(name = "gsmn")]
    #[serde(rename = "gsmn")]
    Gsmn,
    #[value(name = "ibmap-hc")]
    #[serde(rename = "ibmap-hc")]
    IbmapHc,
    #[value(name = "ibmap-ts")]
    #[serde(rename = "ibmap-ts")]
    IbmapTs,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Gsmn => "gsmn",
            Algorithm::IbmapHc => "ibmap-hc",
            Algorithm::IbmapTs => "ibmap-ts",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[value(name = "he")]
    He,
    #[value(name = "hi-structure")]
    #[serde(rename = "hi-structure")]
    HiStructure,
    #[value(name = "hi-data")]
    #[serde(rename = "hi-data")]
    HiData,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Or,
    And,
}

impl From<RuleArg> for EdgeRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Or => EdgeRule::Or,
            RuleArg::And => EdgeRule::And,
        }
    }
}

/// Independence test selection shared by the commands.
#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct TestArgs {
    #[arg(long, value_enum, default_value = "bayes")]
    pub test: TestKind,
    /// Significance level of the chi-square test.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Oracle posterior for the true independence value.
    #[arg(long = "p-hi", default_value_t = 0.99)]
    pub p_hi: f64,
    /// Prior probability of independence for the Bayesian test.
    #[arg(long, default_value_t = 0.5)]
    pub prior: f64,
    /// Decision threshold on the Bayesian posterior.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
}

impl Default for TestArgs {
    fn default() -> Self {
        TestArgs {
            test: TestKind::Bayes,
            alpha: 0.05,
            p_hi: 0.99,
            prior: 0.5,
            threshold: 0.5,
        }
    }
}

/// A concrete backend borrowing its data.
pub enum Backend<'a> {
    Bayes(BayesianTest<'a>),
    Chi2(ChiSquareTest<'a>),
    Oracle(OracleTest),
}

impl<'a> Backend<'a> {
    pub fn build(
        args: &TestArgs,
        data: Option<&'a Dataset>,
        truth: Option<&Structure>,
    ) -> Result<Self> {
        let need_data = || {
            data.ok_or_else(|| Error::InvalidArgument(format!("test {:?} needs a dataset", args.test)))
        };
        Ok(match args.test {
            TestKind::Bayes => {
                if !(args.prior > 0.0 && args.prior < 1.0) {
                    return Err(Error::InvalidArgument(format!("prior {} outside (0, 1)", args.prior)));
                }
                let mut t = BayesianTest::new(need_data()?);
                t.prior_independent = args.prior;
                t.threshold = args.threshold;
                Backend::Bayes(t)
            }
            TestKind::Chi2 => Backend::Chi2(ChiSquareTest::new(need_data()?, args.alpha)?),
            TestKind::Oracle => {
                let truth = truth.ok_or_else(|| {
                    Error::InvalidArgument("the oracle test needs a truth structure (--truth)".into())
                })?;
                if let Some(d) = data {
                    if d.n() != truth.n() {
                        return Err(Error::SizeMismatch {
                            left: d.n(),
                            right: truth.n(),
                        });
                    }
                }
                Backend::Oracle(OracleTest::new(truth.clone(), args.p_hi)?)
            }
        })
    }

    pub fn test(&self) -> &dyn IndependenceTest {
        match self {
            Backend::Bayes(t) => t,
            Backend::Chi2(t) => t,
            Backend::Oracle(t) => t,
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

// ---------------------------------------------------------------- generate

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Neighbors drawn per node.
    #[arg(long)]
    pub tau: usize,
    /// Number of random graphs.
    #[arg(long, default_value_t = 10)]
    pub graphs: usize,
    /// Comma-separated dataset sizes sampled from every graph.
    #[arg(long, value_delimiter = ',', default_value = "40,200,800,5000,12000")]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long = "burn-in", default_value_t = synth::DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = synth::DEFAULT_THIN)]
    pub thin: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct GeneratedGraph {
    index: usize,
    structure: String,
    weights: String,
    structure_seed: u64,
    parameter_seed: u64,
    /// Seeds the shared chain; smaller sizes are subsamples of it.
    data_seed: u64,
    datasets: Vec<GeneratedData>,
}

#[derive(Debug, Serialize)]
struct GeneratedData {
    rows: usize,
    file: String,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<String> {
    if args.sizes.is_empty() || args.sizes.contains(&0) {
        return Err(Error::InvalidArgument("dataset sizes must be positive".into()));
    }
    let gibbs = GibbsOptions {
        burn_in: args.burn_in,
        thin: args.thin,
    };
    let mut graphs = Vec::new();
    for index in 0..args.graphs {
        let structure_seed = seed::derive(args.seed, &[index as u64, 0]);
        let parameter_seed = seed::derive(args.seed, &[index as u64, 1]);
        let g = synth::random_structure(args.n, args.tau, structure_seed)?;
        let model = synth::random_parameters(&g, parameter_seed);
        let dir = format!("graph_{index:02}");
        write_file(&args.out.join(&dir).join("structure.txt"), &g.to_text())?;
        write_file(&args.out.join(&dir).join("weights.txt"), &model.weights_text())?;
        let data_seed = seed::derive(args.seed, &[index as u64, 2]);
        let mut datasets = Vec::new();
        for (&rows, data) in args
            .sizes
            .iter()
            .zip(synth::nested_datasets(&model, &args.sizes, data_seed, gibbs)?)
        {
            let file = format!("{dir}/data_N{rows}.csv");
            write_file(&args.out.join(&file), &data.to_csv())?;
            datasets.push(GeneratedData { rows, file });
        }
        graphs.push(GeneratedGraph {
            index,
            structure: format!("{dir}/structure.txt"),
            weights: format!("{dir}/weights.txt"),
            structure_seed,
            parameter_seed,
            data_seed,
            datasets,
        });
    }
    let manifest = serde_json::json!({
        "command": "generate",
        "args": args,
        "graphs": graphs,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    Ok(format!(
        "wrote {} structures and {} datasets to {}\n",
        args.graphs,
        args.graphs * args.sizes.len(),
        args.out.display()
    ))
}

// ---------------------------------------------------------------- learn

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct LearnArgs {
    #[arg(long, value_enum)]
    pub algorithm: Algorithm,
    /// Comma-separated data file; optional with the oracle test.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Optional `name:arity` sidecar.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Ground-truth structure, required by the oracle test.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub test: TestArgs,
    #[arg(long = "edge-rule", value_enum, default_value = "or")]
    pub edge_rule: RuleArg,
    /// Hill-climbing iteration cap; 10 n by default.
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Starting structure for hill climbing instead of GSMN's output.
    #[arg(long)]
    pub start: Option<PathBuf>,
    #[arg(long = "node-budget", default_value_t = ibmap_ts::DEFAULT_NODE_BUDGET)]
    pub node_budget: usize,
    /// Run the tree search on more than 14 variables.
    #[arg(long)]
    pub force: bool,
    /// Learn from a random 1/k subsample of the data.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for neighbor evaluation (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Also dump the tree-search expansion order.
    #[arg(long = "dump-expansions")]
    pub dump_expansions: bool,
    #[arg(long)]
    pub out: PathBuf,
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

pub fn cmd_learn(args: &LearnArgs) -> Result<String> {
    let truth = args.truth.as_ref().map(Structure::load).transpose()?;
    let mut data = match (&args.data, &args.schema) {
        (Some(d), Some(s)) => Some(Dataset::load_with_schema(d, s)?),
        (Some(d), None) => Some(Dataset::load(d)?),
        (None, _) => None,
    };
    if let (Some(k), Some(d)) = (args.subsample, data.as_ref()) {
        if k == 0 {
            return Err(Error::InvalidArgument("--subsample must be positive".into()));
        }
        data = Some(d.subsample(d.len() / k, seed::derive(args.seed, &[5]))?);
    }
    if data.is_none() && args.test.test != TestKind::Oracle {
        return Err(Error::InvalidArgument("--data is required unless --test oracle".into()));
    }
    let backend = Backend::build(&args.test, data.as_ref(), truth.as_ref())?;
    let n = backend.test().n_vars();
    if args.algorithm == Algorithm::IbmapTs && n > ibmap_ts::DEFAULT_MAX_VARIABLES && !args.force {
        return Err(Error::InvalidArgument(format!(
            "ibmap-ts on {n} variables needs an exponential number of tests; pass --force to run it anyway"
        )));
    }
    let cache = TestCache::new();
    let tester = Tester::new(backend.test(), &cache);
    let rule = EdgeRule::from(args.edge_rule);
    let mut extra_files = Vec::new();

    let report = thread_pool(args.workers)?.install(|| -> Result<RunReport> {
        Ok(match args.algorithm {
            Algorithm::Gsmn => {
                let (_, trace, report) = run_gsmn(&tester, rule)?;
                extra_files.push(("trace.txt", trace.to_text()));
                report
            }
            Algorithm::IbmapHc => {
                let start = args.start.as_ref().map(Structure::load).transpose()?;
                let options = HcOptions {
                    start,
                    max_iters: args.max_iters,
                    rule,
                    parallel: true,
                };
                ibmap_hc(&tester, &options)?.report
            }
            Algorithm::IbmapTs => {
                let options = TsOptions {
                    node_budget: args.node_budget,
                    rule,
                    record_pops: args.dump_expansions,
                };
                let run = ibmap_ts(&tester, &options)?;
                extra_files.push(("trace.txt", run.closure.to_text()));
                if args.dump_expansions {
                    extra_files.push(("expansions.txt", ibmap_ts::format_pops(&run.pops)));
                }
                run.report
            }
        })
    })?;

    let structure = Structure::from_edges(report.n, report.edges.iter().copied())?;
    write_file(&args.out.join("structure.txt"), &structure.to_text())?;
    write_json(&args.out.join("report.json"), &report)?;
    for (name, text) in extra_files {
        write_file(&args.out.join(name), &text)?;
    }
    let manifest = serde_json::json!({
        "command": "learn",
        "args": args,
        "rows": data.as_ref().map(Dataset::len),
        "defaults": {
            "max_iters": args.max_iters.unwrap_or(10 * n),
            "bayes_dirichlet_alpha": 1.0,
            "epsilon": crate::citests::EPSILON,
        },
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;

    let mut summary = format!(
        "{}: {} edges, log-score {:.6}, {} tests ({} cache hits)",
        report.algorithm,
        report.edges.len(),
        report.log_score,
        report.tests.lookups,
        report.tests.hits
    );
    if let Some(m) = report.ascents {
        write!(summary, ", M = {m}").unwrap();
    }
    if report.truncated {
        summary.push_str(", truncated");
    }
    if report.budget_exhausted {
        summary.push_str(", budget exhausted");
    }
    summary.push('\n');
    Ok(summary)
}

// ---------------------------------------------------------------- evaluate

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub learned: PathBuf,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub metric: Metric,
    #[arg(long, default_value_t = 2000)]
    pub triplets: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub test: TestArgs,
    /// Also write the record to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub metric: Metric,
    pub n: usize,
    pub value: f64,
    pub triplets: Option<usize>,
    pub seed: u64,
}

pub fn evaluate(args: &EvaluateArgs) -> Result<EvaluationRecord> {
    let learned = Structure::load(&args.learned)?;
    let n = learned.n();
    let sample = || eval::sample_triplets(n, args.triplets, args.seed);
    let (value, triplets) = match args.metric {
        Metric::He => {
            let truth = args.truth.as_ref().ok_or_else(|| {
                Error::InvalidArgument("metric he needs a truth structure (--truth)".into())
            })?;
            (eval::edge_hamming(&learned, &Structure::load(truth)?)? as f64, None)
        }
        Metric::HiStructure => {
            let truth = args.truth.as_ref().ok_or_else(|| {
                Error::InvalidArgument("metric hi-structure needs a truth structure (--truth)".into())
            })?;
            let truth = Structure::load(truth)?;
            let v = eval::independence_hamming_structure(&learned, &truth, &sample()?)?;
            (v, Some(args.triplets))
        }
        Metric::HiData => {
            let data = args.data.as_ref().ok_or_else(|| {
                Error::InvalidArgument("metric hi-data needs the full dataset (--data)".into())
            })?;
            let data = Dataset::load(data)?;
            let truth = args.truth.as_ref().map(Structure::load).transpose()?;
            let backend = Backend::build(&args.test, Some(&data), truth.as_ref())?;
            let cache = TestCache::new();
            let tester = Tester::new(backend.test(), &cache);
            let v = eval::independence_hamming_data(&learned, &tester, &sample()?)?;
            (v, Some(args.triplets))
        }
    };
    Ok(EvaluationRecord {
        metric: args.metric,
        n,
        value,
        triplets,
        seed: args.seed,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<String> {
    let record = evaluate(args)?;
    let json = serde_json::to_string(&record)? + "\n";
    if let Some(out) = &args.out {
        write_file(out, &json)?;
    }
    Ok(json)
}

// ---------------------------------------------------------------- bench

#[derive(Clone, Debug, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// TOML grid description.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn default_name() -> String {
    "bench".into()
}
fn default_graphs() -> usize {
    10
}
fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Gsmn, Algorithm::IbmapHc]
}
fn default_triplets() -> usize {
    2000
}
fn default_burn_in() -> usize {
    synth::DEFAULT_BURN_IN
}
fn default_thin() -> usize {
    synth::DEFAULT_THIN
}
fn default_node_budget() -> usize {
    ibmap_ts::DEFAULT_NODE_BUDGET
}
fn default_workers() -> usize {
    1
}
fn default_ts_max_n() -> usize {
    12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub n: Vec<usize>,
    pub tau: Vec<usize>,
    pub sizes: Vec<usize>,
    #[serde(default = "default_graphs")]
    pub graphs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub test: Option<TestKind>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub p_hi: Option<f64>,
    #[serde(default = "default_triplets")]
    pub triplets: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_thin")]
    pub thin: usize,
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default = "default_node_budget")]
    pub node_budget: usize,
    /// Tree search is skipped on larger domains.
    #[serde(default = "default_ts_max_n")]
    pub ts_max_n: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub edge_rule: Option<EdgeRule>,
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    fn test_args(&self) -> TestArgs {
        let d = TestArgs::default();
        TestArgs {
            test: self.test.unwrap_or(d.test),
            alpha: self.alpha.unwrap_or(d.alpha),
            p_hi: self.p_hi.unwrap_or(d.p_hi),
            ..d
        }
    }
}

/// One learned structure inside a bench cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub name: String,
    pub n: usize,
    pub rows: usize,
    pub tau: usize,
    pub graph: usize,
    pub algorithm: Algorithm,
    pub status: String,
    pub h_e: Option<f64>,
    pub h_i: Option<f64>,
    pub ascents: Option<u64>,
    pub log_score: Option<f64>,
    pub tests: u64,
    pub hits: u64,
    pub cost_units: u64,
    pub wall_ms: f64,
}

#[derive(Clone, Copy)]
struct Cell {
    n: usize,
    tau: usize,
    graph: usize,
}

fn run_cell(config: &BenchConfig, cell: Cell) -> Vec<BenchRecord> {
    let Cell { n, tau, graph } = cell;
    let path = [n as u64, tau as u64, graph as u64];
    let sub = |label: u64| seed::derive(config.seed, &[path[0], path[1], path[2], label]);
    let blank = |rows: usize, algorithm: Algorithm, status: String| BenchRecord {
        name: config.name.clone(),
        n,
        rows,
        tau,
        graph,
        algorithm,
        status,
        h_e: None,
        h_i: None,
        ascents: None,
        log_score: None,
        tests: 0,
        hits: 0,
        cost_units: 0,
        wall_ms: 0.0,
    };
    let setup = || -> Result<_> {
        let truth = synth::random_structure(n, tau, sub(0))?;
        let model = synth::random_parameters(&truth, sub(1));
        let sample = eval::sample_triplets(n, config.triplets.max(n - 1), sub(3))?;
        Ok((truth, model, sample))
    };
    let (truth, model, sample) = match setup() {
        Ok(parts) => parts,
        Err(e) => {
            return config
                .sizes
                .iter()
                .flat_map(|&rows| config.algorithms.iter().map(move |&a| (rows, a)))
                .map(|(rows, a)| blank(rows, a, format!("error: {e}")))
                .collect()
        }
    };
    let gibbs = GibbsOptions {
        burn_in: config.burn_in,
        thin: config.thin,
    };
    let test_args = config.test_args();
    let rule = config.edge_rule.unwrap_or_default();

    let datasets = match synth::nested_datasets(&model, &config.sizes, sub(2), gibbs) {
        Ok(sets) => sets,
        Err(e) => {
            return config
                .sizes
                .iter()
                .flat_map(|&rows| config.algorithms.iter().map(move |&a| (rows, a)))
                .map(|(rows, a)| blank(rows, a, format!("error: {e}")))
                .collect()
        }
    };
    let mut records = Vec::new();
    for (&rows, data) in config.sizes.iter().zip(&datasets) {
        let backend = match Backend::build(&test_args, Some(data), Some(&truth)) {
            Ok(b) => b,
            Err(e) => {
                records.extend(config.algorithms.iter().map(|&a| blank(rows, a, format!("error: {e}"))));
                continue;
            }
        };
        let cache = TestCache::new();
        let tester = Tester::new(backend.test(), &cache);
        for &algorithm in &config.algorithms {
            let outcome = || -> Result<Option<RunReport>> {
                Ok(Some(match algorithm {
                    Algorithm::Gsmn => run_gsmn(&tester, rule)?.2,
                    Algorithm::IbmapHc => {
                        let options = HcOptions {
                            max_iters: config.max_iters,
                            rule,
                            parallel: config.workers <= 1,
                            ..HcOptions::default()
                        };
                        ibmap_hc(&tester, &options)?.report
                    }
                    Algorithm::IbmapTs if n > config.ts_max_n => return Ok(None),
                    Algorithm::IbmapTs => {
                        let options = TsOptions {
                            node_budget: config.node_budget,
                            rule,
                            record_pops: false,
                        };
                        ibmap_ts(&tester, &options)?.report
                    }
                }))
            };
            let record = match outcome() {
                Ok(None) => blank(rows, algorithm, format!("skipped: n > {}", config.ts_max_n)),
                Err(e) => blank(rows, algorithm, format!("error: {e}")),
                Ok(Some(report)) => {
                    let metrics = Structure::from_edges(n, report.edges.iter().copied()).and_then(|g| {
                        Ok((
                            eval::edge_hamming(&g, &truth)? as f64,
                            eval::independence_hamming_structure(&g, &truth, &sample)?,
                        ))
                    });
                    match metrics {
                        Err(e) => blank(rows, algorithm, format!("error: {e}")),
                        Ok((h_e, h_i)) => BenchRecord {
                            status: if report.budget_exhausted {
                                "budget_exhausted".into()
                            } else if report.truncated {
                                "truncated".into()
                            } else {
                                "ok".into()
                            },
                            h_e: Some(h_e),
                            h_i: Some(h_i),
                            ascents: report.ascents,
                            log_score: Some(report.log_score),
                            tests: report.tests.lookups,
                            hits: report.tests.hits,
                            cost_units: report.tests.cost_units,
                            wall_ms: report.wall_ms,
                            ..blank(rows, algorithm, String::new())
                        },
                    }
                }
            };
            records.push(record);
        }
    }
    records
}

/// Runs every `(n, tau, graph)` cell of the grid; records come back in grid
/// order whatever the worker count.
pub fn run_bench(config: &BenchConfig, workers: usize) -> Result<Vec<BenchRecord>> {
    let cells: Vec<Cell> = config
        .n
        .iter()
        .flat_map(|&n| {
            config.tau.iter().flat_map(move |&tau| {
                (0..config.graphs).map(move |graph| Cell { n, tau, graph })
            })
        })
        .collect();
    let pool = thread_pool(workers.max(1))?;
    let mut records: Vec<BenchRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&cell| run_cell(config, cell))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    });
    records.sort_by(|a, b| {
        (a.n, a.tau, a.rows, a.graph, a.algorithm as u8).cmp(&(b.n, b.tau, b.rows, b.graph, b.algorithm as u8))
    });
    Ok(records)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

fn runs_csv(records: &[BenchRecord]) -> String {
    let mut out = String::from("name,n,N,tau,graph,algorithm,status,H_E,H_I,M,log_score,tests,hits,cost_units\n");
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.n,
            r.rows,
            r.tau,
            r.graph,
            r.algorithm.name(),
            r.status,
            opt(r.h_e),
            opt(r.h_i),
            r.ascents.map_or_else(String::new, |m| m.to_string()),
            opt(r.log_score),
            r.tests,
            r.hits,
            r.cost_units
        )
        .unwrap();
    }
    out
}

/// Aggregates for one `(n, tau, N)` group.
#[derive(Clone, Debug, Serialize)]
pub struct BenchSummaryRow {
    pub name: String,
    pub n: usize,
    pub tau: usize,
    pub rows: usize,
    pub h_e: Vec<(String, String)>,
    pub h_i: Vec<(String, String)>,
    pub r_e_hc: Option<eval::RatioSummary>,
    pub r_i_hc: Option<eval::RatioSummary>,
    pub r_e_ts: Option<eval::RatioSummary>,
    pub r_i_ts: Option<eval::RatioSummary>,
    pub mean_m: Option<f64>,
}

fn paired(records: &[&BenchRecord], ours: Algorithm, metric: fn(&BenchRecord) -> Option<f64>) -> Option<eval::RatioSummary> {
    let mut mine = Vec::new();
    let mut base = Vec::new();
    for r in records.iter().filter(|r| r.algorithm == ours) {
        let g = records
            .iter()
            .find(|b| b.algorithm == Algorithm::Gsmn && b.graph == r.graph)?;
        if let (Some(o), Some(b)) = (metric(r), metric(g)) {
            mine.push(o);
            base.push(b);
        }
    }
    if mine.is_empty() {
        return None;
    }
    ratio_report(&mine, &base).ok()
}

pub fn summarize(records: &[BenchRecord]) -> Vec<BenchSummaryRow> {
    let mut keys: Vec<(usize, usize, usize)> = records.iter().map(|r| (r.n, r.tau, r.rows)).collect();
    keys.dedup();
    keys.into_iter()
        .map(|(n, tau, rows)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| (r.n, r.tau, r.rows) == (n, tau, rows))
                .collect();
            let mut algorithms: Vec<Algorithm> = group.iter().map(|r| r.algorithm).collect();
            algorithms.sort_by_key(|&a| a as u8);
            algorithms.dedup();
            let column = |metric: fn(&BenchRecord) -> Option<f64>| {
                algorithms
                    .iter()
                    .map(|&a| {
                        let values: Vec<f64> =
                            group.iter().filter(|r| r.algorithm == a).filter_map(|r| metric(r)).collect();
                        (a.name().to_string(), format_mean_sd(&values))
                    })
                    .collect()
            };
            let ms: Vec<f64> = group.iter().filter_map(|r| r.ascents).map(|m| m as f64).collect();
            BenchSummaryRow {
                name: group[0].name.clone(),
                n,
                tau,
                rows,
                h_e: column(|r| r.h_e),
                h_i: column(|r| r.h_i),
                r_e_hc: paired(&group, Algorithm::IbmapHc, |r| r.h_e),
                r_i_hc: paired(&group, Algorithm::IbmapHc, |r| r.h_i),
                r_e_ts: paired(&group, Algorithm::IbmapTs, |r| r.h_e),
                r_i_ts: paired(&group, Algorithm::IbmapTs, |r| r.h_i),
                mean_m: (!ms.is_empty()).then(|| ms.iter().sum::<f64>() / ms.len() as f64),
            }
        })
        .collect()
}

fn summary_table(rows: &[BenchSummaryRow]) -> String {
    let ratio = |r: &Option<eval::RatioSummary>| r.as_ref().map_or("-".to_string(), |r| r.to_string());
    let mut out = String::from("name,n,tau,N,H_E,H_I,r_E_HC,r_I_HC,r_E_TS,r_I_TS,mean_M\n");
    for r in rows {
        let join = |cols: &[(String, String)]| {
            cols.iter().map(|(a, v)| format!("{a}={v}")).collect::<Vec<_>>().join(" ")
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.n,
            r.tau,
            r.rows,
            join(&r.h_e),
            join(&r.h_i),
            ratio(&r.r_e_hc),
            ratio(&r.r_i_hc),
            ratio(&r.r_e_ts),
            ratio(&r.r_i_ts),
            r.mean_m.map_or("-".into(), |m| format!("{m:.3}"))
        )
        .unwrap();
    }
    out
}

pub fn cmd_bench(args: &BenchArgs) -> Result<String> {
    let text = std::fs::read_to_string(&args.config).map_err(|e| Error::io(&args.config, e))?;
    let config = BenchConfig::from_toml(&text)?;
    let workers = args.workers.unwrap_or(config.workers);
    let records = run_bench(&config, workers)?;
    let summary = summarize(&records);
    let table = summary_table(&summary);
    write_file(&args.out.join("runs.csv"), &runs_csv(&records))?;
    write_file(&args.out.join("summary.csv"), &table)?;
    let mut timing = String::from("n,N,tau,graph,algorithm,wall_ms\n");
    for r in &records {
        writeln!(timing, "{},{},{},{},{},{:.3}", r.n, r.rows, r.tau, r.graph, r.algorithm.name(), r.wall_ms).unwrap();
    }
    write_file(&args.out.join("timing.csv"), &timing)?;
    write_json(
        &args.out.join("manifest.json"),
        &serde_json::json!({ "command": "bench", "config": config, "workers": workers }),
    )?;
    Ok(table)
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}
