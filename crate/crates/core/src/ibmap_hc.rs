//! Hill climbing over edge-flips under the Markov-blanket IB-score.

use std::time::Instant;

use rayon::prelude::*;

use crate::citests::Tester;
use crate::error::{Error, Result};
use crate::graph::Structure;
use crate::gsmn::{gsmn_learn, EdgeRule, Trace};
use crate::ibscore::{ib_score, ScoreState};
use crate::report::RunReport;

/// Moves must improve the score by more than this.
pub const MIN_IMPROVEMENT: f64 = 1e-9;

#[derive(Clone, Debug, Default)]
pub struct HcOptions {
    /// Starting structure; GSMN's output when `None`.
    pub start: Option<Structure>,
    /// Defaults to `10 n`.
    pub max_iters: Option<usize>,
    pub rule: EdgeRule,
    /// Evaluate the neighbors of each iteration on the rayon pool.
    pub parallel: bool,
}

#[derive(Debug)]
pub struct HcRun {
    pub structure: Structure,
    pub log_score: f64,
    /// Accepted moves (M).
    pub ascents: usize,
    /// Score of every structure visited, starting structure first.
    pub scores: Vec<f64>,
    pub moves: Vec<(usize, usize)>,
    pub truncated: bool,
    pub report: RunReport,
}

/// Runs GSMN and reports its structure scored under the MB closure.
pub fn run_gsmn(tester: &Tester<'_>, rule: EdgeRule) -> Result<(Structure, Trace, RunReport)> {
    let started = Instant::now();
    let before = tester.cache().stats();
    let (g, trace) = gsmn_learn(tester, rule)?;
    let mut report = RunReport::new("gsmn", &g);
    report.log_score = ib_score(&g, tester)?;
    report.closure_size = trace.len() as u64;
    report.tests = tester.cache().stats().since(&before);
    report.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok((g, trace, report))
}

/// The best strictly improving flip, lowest `(x, y)` first among equals.
fn best_flip(
    state: &ScoreState,
    tester: &Tester<'_>,
    parallel: bool,
) -> Result<Option<((usize, usize), f64)>> {
    let n = state.structure().n();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .collect();
    let eval = |&(x, y): &(usize, usize)| state.flip_delta(x, y, tester).map(|d| ((x, y), d));
    let deltas: Vec<((usize, usize), f64)> = if parallel {
        pairs.par_iter().map(eval).collect::<Result<_>>()?
    } else {
        pairs.iter().map(eval).collect::<Result<_>>()?
    };
    // Pairs are in lexicographic order, so keeping the first maximum
    // implements the tie-break.
    let mut best: Option<((usize, usize), f64)> = None;
    for (pair, delta) in deltas {
        if delta > MIN_IMPROVEMENT && best.is_none_or(|(_, b)| delta > b) {
            best = Some((pair, delta));
        }
    }
    Ok(best)
}

pub fn ibmap_hc(tester: &Tester<'_>, options: &HcOptions) -> Result<HcRun> {
    let started = Instant::now();
    let before = tester.cache().stats();
    let n = tester.n_vars();
    let start = match &options.start {
        Some(g) if g.n() != n => {
            return Err(Error::SizeMismatch {
                left: g.n(),
                right: n,
            })
        }
        Some(g) => g.clone(),
        None => gsmn_learn(tester, options.rule)?.0,
    };
    let max_iters = options.max_iters.unwrap_or(10 * n);

    let mut state = ScoreState::new(start, tester)?;
    let mut scores = vec![state.total()];
    let mut moves = Vec::new();
    let mut deltas = Vec::new();
    let mut truncated = false;
    while let Some(((x, y), _)) = best_flip(&state, tester, options.parallel)? {
        if moves.len() == max_iters {
            truncated = true;
            break;
        }
        let (next, delta) = state.flip_rescore(x, y, tester)?;
        state = next;
        moves.push((x, y));
        deltas.push(delta);
        scores.push(state.total());
    }

    let structure = state.structure().clone();
    let mut report = RunReport::new("ibmap-hc", &structure);
    report.log_score = state.total();
    report.ascents = Some(moves.len() as u64);
    report.iteration_deltas = deltas;
    report.truncated = truncated;
    report.closure_size = (n * n.saturating_sub(1)) as u64;
    report.tests = tester.cache().stats().since(&before);
    report.wall_ms = started.elapsed().as_secs_f64() * 1e3;
    Ok(HcRun {
        structure,
        log_score: state.total(),
        ascents: moves.len(),
        scores,
        moves,
        truncated,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::citests::{OracleTest, TestCache};

    fn truth() -> Structure {
        Structure::from_edges(6, [(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)]).unwrap()
    }

    #[test]
    fn truth_is_a_fixed_point() {
        let oracle = OracleTest::new(truth(), 0.99).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        let options = HcOptions {
            start: Some(truth()),
            ..HcOptions::default()
        };
        let run = ibmap_hc(&tester, &options).unwrap();
        assert_eq!(run.ascents, 0);
        assert_eq!(run.structure, truth());
        assert_eq!(run.report.ascents, Some(0));
    }

    #[test]
    fn one_wrong_edge_is_repaired_in_one_move() {
        let oracle = OracleTest::new(truth(), 0.99).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        for (x, y) in [(0, 4), (2, 3)] {
            let options = HcOptions {
                start: Some(truth().edge_flip(x, y).unwrap()),
                ..HcOptions::default()
            };
            let run = ibmap_hc(&tester, &options).unwrap();
            assert_eq!(run.ascents, 1);
            assert_eq!(run.moves, vec![(x, y)]);
            assert_eq!(run.structure, truth());
        }
    }

    #[test]
    fn iteration_cap_marks_truncation() {
        let oracle = OracleTest::new(truth(), 0.99).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        let options = HcOptions {
            start: Some(Structure::new(6)),
            max_iters: Some(1),
            ..HcOptions::default()
        };
        let run = ibmap_hc(&tester, &options).unwrap();
        assert_eq!(run.ascents, 1);
        assert!(run.truncated && run.report.truncated);
    }

    #[test]
    fn start_size_must_match() {
        let oracle = OracleTest::new(truth(), 0.99).unwrap();
        let cache = TestCache::new();
        let tester = Tester::new(&oracle, &cache);
        let options = HcOptions {
            start: Some(Structure::new(3)),
            ..HcOptions::default()
        };
        assert!(ibmap_hc(&tester, &options).is_err());
    }
}
