//! Grow-shrink Markov blankets and the GSMN structure learner.
//!
//! [`GsmnMachine`] runs GSMN as a resumable query operator: it yields the
//! next triplet to test and waits for a decision. Driving it with a test
//! gives the ordinary learner ([`gsmn_learn`]); driving it with recorded
//! or forced decisions gives replay ([`next_query`]), which is how the
//! tree search explores alternative test outcomes.
//!
//! Candidates are visited in ascending variable index, so the queries depend
//! only on the decisions made so far. A triplet already decided earlier in
//! the same run is answered from that decision instead of being asked again.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::citests::Tester;
use crate::error::{Error, Result};
use crate::graph::{Structure, Triplet};
use crate::ibscore::{Assertion, Closure};

/// How per-variable blankets combine into edges.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeRule {
    /// Edge iff `y ∈ B(x)` or `x ∈ B(y)`.
    #[default]
    Or,
    /// Edge iff `y ∈ B(x)` and `x ∈ B(y)`.
    And,
}

/// One query and the decision taken for it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Decision {
    pub triplet: Triplet,
    pub independent: bool,
}

/// Ordered record of the queries a run asked and their decisions.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub decisions: Vec<Decision>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    /// The decisions as an algorithm-based closure.
    pub fn closure(&self) -> Closure {
        Closure {
            assertions: self
                .decisions
                .iter()
                .map(|d| Assertion {
                    triplet: d.triplet.clone(),
                    independent: d.independent,
                })
                .collect(),
        }
    }

    /// One line per query: `x y | z1 z2 ... -> I|D`.
    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Trace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.decisions {
            writeln!(f, "{} -> {}", d.triplet, if d.independent { 'I' } else { 'D' })?;
        }
        Ok(())
    }
}

impl FromStr for Trace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut decisions = Vec::new();
        for (i, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (triplet, value) = line
                .rsplit_once("->")
                .ok_or_else(|| Error::parse(i + 1, "expected `x y | z -> I|D`"))?;
            let independent = match value.trim() {
                "I" => true,
                "D" => false,
                other => return Err(Error::parse(i + 1, format!("bad decision {other:?}"))),
            };
            let triplet = triplet
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?;
            decisions.push(Decision {
                triplet,
                independent,
            });
        }
        Ok(Trace { decisions })
    }
}

/// What the operator wants next.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Step {
    Query(Triplet),
    Done(Structure),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    /// Sweeping candidates from `next`; `added` records growth in this sweep.
    Grow { next: usize, added: bool },
    /// Testing blanket members from position `pos`.
    Shrink { pos: usize, removed: bool },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pending {
    Grow(usize),
    Shrink(usize),
}

/// GSMN as a resumable operator over decisions.
#[derive(Clone, Debug)]
pub struct GsmnMachine {
    n: usize,
    rule: EdgeRule,
    var: usize,
    phase: Phase,
    blanket: Vec<usize>,
    blankets: Vec<Vec<usize>>,
    decided: HashMap<Triplet, bool>,
    pending: Option<(Triplet, Pending)>,
}

impl GsmnMachine {
    pub fn new(n: usize, rule: EdgeRule) -> Self {
        GsmnMachine {
            n,
            rule,
            var: 0,
            phase: Phase::Grow {
                next: 0,
                added: false,
            },
            blanket: Vec::new(),
            blankets: Vec::with_capacity(n),
            decided: HashMap::new(),
            pending: None,
        }
    }

    /// Advances to the next undecided query, or to the finished structure.
    pub fn step(&mut self) -> Step {
        if let Some((t, _)) = &self.pending {
            return Step::Query(t.clone());
        }
        loop {
            if self.var == self.n {
                return Step::Done(self.structure());
            }
            let x = self.var;
            let (t, pending) = match self.phase {
                Phase::Grow { next, added } => {
                    let candidate =
                        (next..self.n).find(|&w| w != x && self.blanket.binary_search(&w).is_err());
                    match candidate {
                        Some(w) => (
                            Triplet::new(x, w, self.blanket.iter().copied()).unwrap(),
                            Pending::Grow(w),
                        ),
                        None if added => {
                            self.phase = Phase::Grow {
                                next: 0,
                                added: false,
                            };
                            continue;
                        }
                        None => {
                            self.phase = Phase::Shrink {
                                pos: 0,
                                removed: false,
                            };
                            continue;
                        }
                    }
                }
                Phase::Shrink { pos, removed } => {
                    if pos < self.blanket.len() {
                        let w = self.blanket[pos];
                        let z = self.blanket.iter().copied().filter(|&v| v != w);
                        (Triplet::new(x, w, z).unwrap(), Pending::Shrink(pos))
                    } else if removed {
                        self.phase = Phase::Shrink {
                            pos: 0,
                            removed: false,
                        };
                        continue;
                    } else {
                        self.blankets.push(std::mem::take(&mut self.blanket));
                        self.var += 1;
                        self.phase = Phase::Grow {
                            next: 0,
                            added: false,
                        };
                        continue;
                    }
                }
            };
            match self.decided.get(&t) {
                Some(&independent) => self.apply(pending, independent),
                None => {
                    self.pending = Some((t.clone(), pending));
                    return Step::Query(t);
                }
            }
        }
    }

    /// Supplies the decision for the query returned by the last [`step`].
    ///
    /// [`step`]: GsmnMachine::step
    pub fn answer(&mut self, independent: bool) {
        let (t, pending) = self
            .pending
            .take()
            .expect("answer() called without an outstanding query");
        self.decided.insert(t, independent);
        self.apply(pending, independent);
    }

    fn apply(&mut self, pending: Pending, independent: bool) {
        match (pending, self.phase) {
            (Pending::Grow(w), Phase::Grow { added, .. }) => {
                if !independent {
                    let pos = self.blanket.binary_search(&w).unwrap_err();
                    self.blanket.insert(pos, w);
                }
                self.phase = Phase::Grow {
                    next: w + 1,
                    added: added || !independent,
                };
            }
            (Pending::Shrink(pos), Phase::Shrink { removed, .. }) => {
                if independent {
                    self.blanket.remove(pos);
                    self.phase = Phase::Shrink { pos, removed: true };
                } else {
                    self.phase = Phase::Shrink {
                        pos: pos + 1,
                        removed,
                    };
                }
            }
            _ => unreachable!("pending query does not match the phase"),
        }
    }

    /// Blankets of the variables finished so far.
    pub fn blankets(&self) -> &[Vec<usize>] {
        &self.blankets
    }

    fn structure(&self) -> Structure {
        let mut g = Structure::new(self.n);
        for (x, b) in self.blankets.iter().enumerate() {
            for &y in b {
                let keep = match self.rule {
                    EdgeRule::Or => true,
                    EdgeRule::And => self.blankets[y].binary_search(&x).is_ok(),
                };
                if keep {
                    g.set_edge(x, y, true);
                }
            }
        }
        g
    }
}

/// Grow-shrink blanket of `x` over `n` variables.
pub fn grow_shrink_blanket(x: usize, tester: &Tester<'_>) -> Result<(Vec<usize>, Trace)> {
    let n = tester.n_vars();
    if x >= n {
        return Err(Error::InvalidArgument(format!("variable {x} of {n}")));
    }
    let mut blanket: Vec<usize> = Vec::new();
    let mut trace = Trace::default();
    let ask = |t: Triplet, trace: &mut Trace| -> Result<bool> {
        let independent = tester.decide(&t)?;
        trace.decisions.push(Decision {
            triplet: t,
            independent,
        });
        Ok(independent)
    };

    let mut added = true;
    while added {
        added = false;
        for w in (0..n).filter(|&w| w != x) {
            if blanket.binary_search(&w).is_ok() {
                continue;
            }
            let t = Triplet::new(x, w, blanket.iter().copied())?;
            if !ask(t, &mut trace)? {
                let pos = blanket.binary_search(&w).unwrap_err();
                blanket.insert(pos, w);
                added = true;
            }
        }
    }

    let mut removed = true;
    while removed {
        removed = false;
        let mut pos = 0;
        while pos < blanket.len() {
            let w = blanket[pos];
            let t = Triplet::new(x, w, blanket.iter().copied().filter(|&v| v != w))?;
            if ask(t, &mut trace)? {
                blanket.remove(pos);
                removed = true;
            } else {
                pos += 1;
            }
        }
    }
    Ok((blanket, trace))
}

/// Runs GSMN to completion with `tester`'s decisions.
pub fn gsmn_learn(tester: &Tester<'_>, rule: EdgeRule) -> Result<(Structure, Trace)> {
    let mut machine = GsmnMachine::new(tester.n_vars(), rule);
    let mut trace = Trace::default();
    loop {
        match machine.step() {
            Step::Query(t) => {
                let independent = tester.decide(&t)?;
                machine.answer(independent);
                trace.decisions.push(Decision {
                    triplet: t,
                    independent,
                });
            }
            Step::Done(g) => return Ok((g, trace)),
        }
    }
}

/// Replays `prefix` through a fresh machine and returns the machine poised
/// at the following step.
pub fn replay(n: usize, rule: EdgeRule, prefix: &[Decision]) -> Result<(GsmnMachine, Step)> {
    let mut machine = GsmnMachine::new(n, rule);
    for (index, d) in prefix.iter().enumerate() {
        match machine.step() {
            Step::Query(t) if t == d.triplet => machine.answer(d.independent),
            Step::Query(t) => {
                return Err(Error::ReplayMismatch {
                    index,
                    expected: t.to_string(),
                    found: d.triplet.to_string(),
                })
            }
            Step::Done(_) => {
                return Err(Error::ReplayMismatch {
                    index,
                    expected: "end of run".into(),
                    found: d.triplet.to_string(),
                })
            }
        }
    }
    let step = machine.step();
    Ok((machine, step))
}

/// The query GSMN asks after `prefix`, or its structure if `prefix` is a
/// complete run.
pub fn next_query(n: usize, rule: EdgeRule, prefix: &[Decision]) -> Result<Step> {
    replay(n, rule, prefix).map(|(_, step)| step)
}
