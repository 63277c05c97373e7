//! Closures and the IB-score.
//!
//! The IB-score of a structure is the sum, over the assertions of a closure,
//! of `ln Pr(T = t | D)`. [`ScoreState`] keeps one term per ordered pair of
//! the Markov-blanket closure so that an edge-flip only recomputes the two
//! rows whose blankets changed.

use crate::citests::Tester;
use crate::error::{Error, Result};
use crate::graph::{Structure, Triplet};

/// An independence assertion `I(T) = t`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Assertion {
    pub triplet: Triplet,
    pub independent: bool,
}

/// A set of assertions that determines a structure.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Closure {
    pub assertions: Vec<Assertion>,
}

impl Closure {
    pub fn len(&self) -> usize {
        self.assertions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assertions.is_empty()
    }

    /// `sum ln Pr(T = t | D)` over the assertions, in order.
    pub fn log_score(&self, tester: &Tester<'_>) -> Result<f64> {
        self.assertions.iter().try_fold(0.0, |acc, a| {
            Ok(acc + tester.judge(&a.triplet)?.log_probability_of(a.independent))
        })
    }
}

/// Assertion of the Markov-blanket closure for the ordered pair `(x, y)`:
/// `(x ; y | B(x) - {y})`, independent iff `(x, y)` is not an edge.
pub fn mb_assertion(g: &Structure, x: usize, y: usize) -> Assertion {
    let z = g.neighbors(x).filter(|&v| v != y);
    Assertion {
        triplet: Triplet::new(x, y, z).expect("neighbors exclude x and y"),
        independent: !g.has_edge(x, y),
    }
}

/// The Markov-blanket closure: one assertion per ordered pair, enumerated
/// by `x` then `y`, for `n (n - 1)` assertions.
pub fn mb_closure(g: &Structure) -> Closure {
    let n = g.n();
    let assertions = (0..n)
        .flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)))
        .map(|(x, y)| mb_assertion(g, x, y))
        .collect();
    Closure { assertions }
}

/// Rebuilds a structure from the values of an MB closure laid out as by
/// [`mb_closure`]: `(x, y)` is an edge iff either ordered assertion says
/// dependent.
pub fn structure_from_mb_closure(n: usize, closure: &Closure) -> Result<Structure> {
    if closure.len() != n * n.saturating_sub(1) {
        return Err(Error::InvalidArgument(format!(
            "closure of {} assertions for {n} variables",
            closure.len()
        )));
    }
    let mut g = Structure::new(n);
    let pairs = (0..n).flat_map(|x| (0..n).filter(move |&y| y != x).map(move |y| (x, y)));
    for ((x, y), a) in pairs.zip(&closure.assertions) {
        if !a.independent {
            g.set_edge(x, y, true);
        }
    }
    Ok(g)
}

/// IB-score of `g` under the Markov-blanket closure, in natural log.
pub fn ib_score(g: &Structure, tester: &Tester<'_>) -> Result<f64> {
    mb_closure(g).log_score(tester)
}

fn row_terms(g: &Structure, x: usize, flip: Option<usize>, tester: &Tester<'_>) -> Result<Vec<f64>> {
    let n = g.n();
    let mut blanket = g.boundary(x);
    if let Some(y) = flip {
        match blanket.binary_search(&y) {
            Ok(pos) => {
                blanket.remove(pos);
            }
            Err(pos) => blanket.insert(pos, y),
        }
    }
    let mut terms = vec![0.0; n];
    for (w, term) in terms.iter_mut().enumerate().filter(|(w, _)| *w != x) {
        let adjacent = blanket.binary_search(&w).is_ok();
        let z = blanket.iter().copied().filter(|&v| v != w);
        let t = Triplet::new(x, w, z).expect("blanket excludes x");
        *term = tester.judge(&t)?.log_probability_of(!adjacent);
    }
    Ok(terms)
}

/// A structure with its per-ordered-pair log terms and their total.
#[derive(Clone, Debug)]
pub struct ScoreState {
    structure: Structure,
    terms: Vec<f64>,
    total: f64,
}

impl ScoreState {
    pub fn new(g: Structure, tester: &Tester<'_>) -> Result<Self> {
        let n = g.n();
        let mut terms = Vec::with_capacity(n * n);
        for x in 0..n {
            terms.extend(row_terms(&g, x, None, tester)?);
        }
        let total = terms.iter().sum();
        Ok(ScoreState {
            structure: g,
            terms,
            total,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn into_structure(self) -> Structure {
        self.structure
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Log term of the assertion for the ordered pair `(x, y)`.
    pub fn term(&self, x: usize, y: usize) -> f64 {
        self.terms[x * self.structure.n() + y]
    }

    /// Fresh sum of all terms; equals [`ScoreState::total`] up to rounding.
    pub fn sum_of_terms(&self) -> f64 {
        self.terms.iter().sum()
    }

    fn row_sum(&self, x: usize) -> f64 {
        let n = self.structure.n();
        self.terms[x * n..(x + 1) * n].iter().sum()
    }

    fn check_pair(&self, x: usize, y: usize) -> Result<()> {
        let n = self.structure.n();
        if x == y || x >= n || y >= n {
            return Err(Error::InvalidArgument(format!(
                "cannot flip ({x}, {y}) in a structure of {n} nodes"
            )));
        }
        Ok(())
    }

    /// Score change of flipping `(x, y)`, touching only rows `x` and `y`:
    /// `2 (n - 1)` test lookups.
    pub fn flip_delta(&self, x: usize, y: usize, tester: &Tester<'_>) -> Result<f64> {
        self.check_pair(x, y)?;
        let new_x: f64 = row_terms(&self.structure, x, Some(y), tester)?.iter().sum();
        let new_y: f64 = row_terms(&self.structure, y, Some(x), tester)?.iter().sum();
        Ok(new_x + new_y - self.row_sum(x) - self.row_sum(y))
    }

    /// The state after flipping `(x, y)` and the change in total.
    pub fn flip_rescore(&self, x: usize, y: usize, tester: &Tester<'_>) -> Result<(ScoreState, f64)> {
        self.check_pair(x, y)?;
        let n = self.structure.n();
        let row_x = row_terms(&self.structure, x, Some(y), tester)?;
        let row_y = row_terms(&self.structure, y, Some(x), tester)?;
        let delta = row_x.iter().sum::<f64>() + row_y.iter().sum::<f64>()
            - self.row_sum(x)
            - self.row_sum(y);
        let mut next = self.clone();
        next.structure.flip_in_place(x, y);
        next.terms[x * n..(x + 1) * n].copy_from_slice(&row_x);
        next.terms[y * n..(y + 1) * n].copy_from_slice(&row_y);
        next.total += delta;
        Ok((next, delta))
    }
}
