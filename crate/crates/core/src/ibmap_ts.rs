//! Uniform-cost search over the bifurcation tree of GSMN's decisions.
//!
//! Each tree node is a prefix of decisions. Expanding it asks the base
//! algorithm for its next triplet and creates one child that trusts
//! independence and one that asserts dependence, with step costs
//! `-ln Pr(T = t | D)`. Costs are non-negative, so the first complete run
//! popped from the frontier has the minimal path cost: the maximal IB-score
//! under the algorithm-based closure.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::Instant;

use crate::citests::Tester;
use crate::error::Result;
use crate::graph::{Structure, Triplet};
use crate::gsmn::{self, Decision, EdgeRule, Step, Trace};
use crate::report::RunReport;

pub const DEFAULT_NODE_BUDGET: usize = 1 << 20;

/// Largest domain the CLI runs without `--force`.
pub const DEFAULT_MAX_VARIABLES: usize = 14;

/// Result of expanding a tree node.
#[derive(Clone, Debug, PartialEq)]
pub enum Expansion<G> {
    /// The prefix is a complete run ending in `G`.
    Goal(G),
    /// The next triplet, with the probabilities of its two children.
    Branch {
        triplet: Triplet,
        p_independent: f64,
        p_dependent: f64,
    },
}

/// A binary decision tree explored by [`uniform_cost_search`].
pub trait DecisionTree {
    type Goal;

    fn expand(&self, prefix: &[Decision]) -> Result<Expansion<Self::Goal>>;
}

/// One popped node, for debugging dumps.
#[derive(Clone, Debug, PartialEq)]
pub struct Pop {
    pub depth: usize,
    pub path_cost: f64,
    /// The decision that created the node, `None` for the root.
    pub decision: Option<Decision>,
}

#[derive(Debug)]
pub struct SearchOutcome<G> {
    /// Optimal goal with its decision path and cost, if reached in budget.
    pub goal: Option<(G, Vec<Decision>, f64)>,
    pub expansions: usize,
    pub budget_exhausted: bool,
    pub pops: Vec<Pop>,
}

struct Arena {
    parent: Vec<usize>,
    decision: Vec<Option<Decision>>,
}

impl Arena {
    fn path(&self, mut node: usize) -> Vec<Decision> {
        let mut out = Vec::new();
        while let Some(d) = &self.decision[node] {
            out.push(d.clone());
            node = self.parent[node];
        }
        out.reverse();
        out
    }
}

#[derive(Debug)]
struct Entry {
    cost: f64,
    depth: usize,
    independent_branch: bool,
    node: usize,
}

impl Entry {
    fn key(&self, other: &Self) -> Ordering {
        self.cost
            .total_cmp(&other.cost)
            .then(self.depth.cmp(&other.depth))
            .then(other.independent_branch.cmp(&self.independent_branch))
            .then(self.node.cmp(&other.node))
    }
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed: BinaryHeap is a max-heap and the cheapest entry must pop first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key(self)
    }
}

fn step_cost(p: f64) -> f64 {
    (-p.ln()).max(0.0)
}

/// Best-first search by path cost. Ties go to the shallower node, then to
/// the independence branch, then to the older node. Stops after
/// `node_budget` expansions.
pub fn uniform_cost_search<T: DecisionTree>(
    tree: &T,
    node_budget: usize,
    record_pops: bool,
) -> Result<SearchOutcome<T::Goal>> {
    let mut arena = Arena {
        parent: vec![0],
        decision: vec![None],
    };
    let mut frontier = BinaryHeap::new();
    frontier.push(Entry {
        cost: 0.0,
        depth: 0,
        independent_branch: true,
        node: 0,
    });
    let mut pops = Vec::new();
    let mut expansions = 0;

    while let Some(entry) = frontier.pop() {
        if record_pops {
            pops.push(Pop {
                depth: entry.depth,
                path_cost: entry.cost,
                decision: arena.decision[entry.node].clone(),
            });
        }
        let prefix = arena.path(entry.node);
        match tree.expand(&prefix)? {
            Expansion::Goal(g) => {
                return Ok(SearchOutcome {
                    goal: Some((g, prefix, entry.cost)),
                    expansions,
                    budget_exhausted: false,
                    pops,
                })
            }
            Expansion::Branch {
                triplet,
                p_independent,
                p_dependent,
            } => {
                if expansions == node_budget {
                    break;
                }
                expansions += 1;
                for (independent, p) in [(true, p_independent), (false, p_dependent)] {
                    let node = arena.parent.len();
                    arena.parent.push(entry.node);
                    arena.decision.push(Some(Decision {
                        triplet: triplet.clone(),
                        independent,
                    }));
                    frontier.push(Entry {
                        cost: entry.cost + step_cost(p),
                        depth: entry.depth + 1,
                        independent_branch: independent,
                        node,
                    });
                }
            }
        }
    }
    Ok(SearchOutcome {
        goal: None,
        expansions,
        budget_exhausted: true,
        pops,
    })
}

/// GSMN's bifurcation tree scored by a cached test: the two children of a
/// triplet with posterior `p` cost `-ln p` and `-ln (1 - p)`.
pub struct GsmnTree<'a> {
    pub tester: Tester<'a>,
    pub rule: EdgeRule,
}

impl DecisionTree for GsmnTree<'_> {
    type Goal = Structure;

    fn expand(&self, prefix: &[Decision]) -> Result<Expansion<Structure>> {
        match gsmn::next_query(self.tester.n_vars(), self.rule, prefix)? {
            Step::Done(g) => Ok(Expansion::Goal(g)),
            Step::Query(triplet) => {
                let p = self.tester.posterior_independent(&triplet)?;
                Ok(Expansion::Branch {
                    triplet,
                    p_independent: p,
                    p_dependent: 1.0 - p,
                })
            }
        }
    }
}

/// Completes a prefix by trusting the more probable value at every step.
fn greedy_completion(tree: &GsmnTree<'_>, prefix: &[Decision]) -> Result<(Structure, Vec<Decision>, f64)> {
    let mut path = prefix.to_vec();
    let mut cost = 0.0;
    for d in prefix {
        let p = tree.tester.judge(&d.triplet)?.probability_of(d.independent);
        cost += step_cost(p);
    }
    loop {
        match tree.expand(&path)? {
            Expansion::Goal(g) => return Ok((g, path, cost)),
            Expansion::Branch {
                triplet,
                p_independent,
                p_dependent,
            } => {
                let independent = p_independent >= p_dependent;
                cost += step_cost(if independent { p_independent } else { p_dependent });
                path.push(Decision {
                    triplet,
                    independent,
                });
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct TsOptions {
    pub node_budget: usize,
    pub rule: EdgeRule,
    /// Keep the pop sequence for an expansion-order dump.
    pub record_pops: bool,
}

impl Default for TsOptions {
    fn default() -> Self {
        TsOptions {
            node_budget: DEFAULT_NODE_BUDGET,
            rule: EdgeRule::Or,
            record_pops: false,
        }
    }
}

#[derive(Debug)]
pub struct TsRun {
    pub structure: Structure,
    /// Decisions of the returned path: its algorithm-based closure.
    pub closure: Trace,
    pub path_cost: f64,
    pub expansions: usize,
    pub budget_exhausted: bool,
    pub pops: Vec<Pop>,
    pub report: RunReport,
}

/// IBMAP-TS. When the budget runs out, the cheapest frontier path seen is
/// not available, so the reported structure is the greedy completion of the
/// empty prefix (GSMN's own answer) and the run is flagged.
pub fn ibmap_ts(tester: &Tester<'_>, options: &TsOptions) -> Result<TsRun> {
    let started = Instant::now();
    let before = tester.cache().stats();
    let tree = GsmnTree {
        tester: *tester,
        rule: options.rule,
    };
    let outcome = uniform_cost_search(&tree, options.node_budget, options.record_pops)?;
    let (structure, path, cost) = match outcome.goal {
        Some(goal) => goal,
        None => greedy_completion(&tree, &[])?,
    };
    let closure = Trace { decisions: path };
    let mut report = RunReport::new("ibmap-ts", &structure);
    report.log_score = -cost;
    report.expansions = Some(outcome.expansions as u64);
    report.budget_exhausted = outcome.budget_exhausted;
    report.closure_size = closure.len() as u64;
    report.tests = tester.cache().stats().since(&before);
    report.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(TsRun {
        structure,
        closure,
        path_cost: cost,
        expansions: outcome.expansions,
        budget_exhausted: outcome.budget_exhausted,
        pops: outcome.pops,
        report,
    })
}

/// `depth path_cost triplet decision` per popped node.
pub fn format_pops(pops: &[Pop]) -> String {
    let mut out = String::new();
    for p in pops {
        match &p.decision {
            Some(d) => writeln!(
                out,
                "{} {:.6} {} {}",
                p.depth,
                p.path_cost,
                d.triplet,
                if d.independent { 'I' } else { 'D' }
            ),
            None => writeln!(out, "0 {:.6} root -", p.path_cost),
        }
        .expect("writing to a String");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citests::{OracleTest, TestCache};

    /// A hand-written tree with arbitrary child probabilities.
    struct Scripted(Vec<(Vec<bool>, &'static str, f64, f64)>);

    impl DecisionTree for Scripted {
        type Goal = Vec<bool>;

        fn expand(&self, prefix: &[Decision]) -> Result<Expansion<Vec<bool>>> {
            let key: Vec<bool> = prefix.iter().map(|d| d.independent).collect();
            Ok(match self.0.iter().find(|(k, ..)| *k == key) {
                Some((_, t, pi, pd)) => Expansion::Branch {
                    triplet: t.parse().unwrap(),
                    p_independent: *pi,
                    p_dependent: *pd,
                },
                None => Expansion::Goal(key),
            })
        }
    }

    #[test]
    fn pops_follow_cost_order() {
        let tree = Scripted(vec![
            (vec![], "0 2 |", 0.4, 0.7),
            (vec![true], "0 1 |", 0.6, 0.5),
            (vec![false], "0 1 | 2", 0.75, 0.85),
        ]);
        let out = uniform_cost_search(&tree, 100, true).unwrap();
        let costs: Vec<f64> = out.pops.iter().map(|p| p.path_cost).collect();
        assert!(costs.windows(2).all(|w| w[0] <= w[1]));
        let (goal, path, cost) = out.goal.unwrap();
        assert_eq!(goal, vec![false, false]);
        assert_eq!(path.len(), 2);
        assert!((cost - (-(0.7f64.ln()) - 0.85f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn budget_is_enforced() {
        let tree = Scripted(vec![(vec![], "0 1 |", 0.5, 0.5)]);
        let out = uniform_cost_search(&tree, 0, false).unwrap();
        assert!(out.budget_exhausted && out.goal.is_none());
        assert_eq!(out.expansions, 0);
    }

    #[test]
    fn oracle_recovers_truth_with_minimal_cost() {
        let truth = Structure::from_edges(4, [(0, 1), (1, 2), (2, 3)]).unwrap();
        let oracle = OracleTest::new(truth.clone(), 0.99).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        let run = ibmap_ts(&tester, &TsOptions::default()).unwrap();
        assert_eq!(run.structure, truth);
        let expected = run.closure.len() as f64 * -(0.99f64.ln());
        assert!((run.path_cost - expected).abs() < 1e-9);
        assert!(!run.budget_exhausted);
    }

    #[test]
    fn exhausted_budget_falls_back_to_greedy_path() {
        let truth = Structure::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        let oracle = OracleTest::new(truth.clone(), 0.9).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        let options = TsOptions {
            node_budget: 2,
            ..TsOptions::default()
        };
        let run = ibmap_ts(&tester, &options).unwrap();
        assert!(run.budget_exhausted && run.report.budget_exhausted);
        assert_eq!(run.structure, truth);
    }

    #[test]
    fn pop_dump_format() {
        let text = format_pops(&[
            Pop {
                depth: 0,
                path_cost: 0.0,
                decision: None,
            },
            Pop {
                depth: 1,
                path_cost: 0.356675,
                decision: Some(Decision {
                    triplet: "0 2 |".parse().unwrap(),
                    independent: false,
                }),
            },
        ]);
        assert_eq!(text, "0 0.000000 root -\n1 0.356675 0 2 | D\n");
    }
}
