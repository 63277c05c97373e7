//! Conditional independence tests.
//!
//! Every backend answers a [`Triplet`] with a [`Judgment`]: a posterior
//! probability of independence used for scoring, plus the boolean decision
//! an independence-based algorithm acts on. [`TestCache`] memoizes
//! judgments by canonical triplet and is shared by all learners of a run.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Structure, Triplet};

/// Posteriors are clamped to `[EPSILON, 1 - EPSILON]` so that every
/// `-ln` cost is finite.
pub const EPSILON: f64 = 1e-12;

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(EPSILON, 1.0 - EPSILON)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Judgment {
    pub triplet: Triplet,
    pub posterior_independent: f64,
    /// `true` when the backend decides independence.
    pub independent: bool,
    pub reliable: bool,
    /// `N * (2 + |z|)`, the work model for one test.
    pub cost_units: u64,
}

impl Judgment {
    /// Posterior of the asserted value: `Pr(T = independent)` or its complement.
    pub fn probability_of(&self, independent: bool) -> f64 {
        if independent {
            self.posterior_independent
        } else {
            1.0 - self.posterior_independent
        }
    }

    /// `ln Pr(T = t | D)` for the asserted value `t`.
    pub fn log_probability_of(&self, independent: bool) -> f64 {
        self.probability_of(independent).ln()
    }
}

pub trait IndependenceTest: Send + Sync {
    /// Number of variables the backend can be queried on.
    fn n_vars(&self) -> usize;

    fn judge(&self, t: &Triplet) -> Result<Judgment>;
}

fn check(t: &Triplet, n: usize) -> Result<()> {
    t.check_within(n)
}

/// Log marginal likelihood of counts under a multinomial with a symmetric
/// Dirichlet prior of `alpha` per cell.
pub fn dirichlet_multinomial_log_ml(counts: impl IntoIterator<Item = u64>, alpha: f64) -> f64 {
    let mut cells = 0usize;
    let mut total = 0u64;
    let mut sum = 0.0;
    let ln_gamma_alpha = ln_gamma(alpha);
    for c in counts {
        cells += 1;
        total += c;
        if c > 0 {
            sum += ln_gamma(alpha + c as f64) - ln_gamma_alpha;
        }
    }
    let k_alpha = cells as f64 * alpha;
    ln_gamma(k_alpha) - ln_gamma(k_alpha + total as f64) + sum
}

/// Bayesian test comparing, per configuration of `z`, a model where `x` and
/// `y` are independent (product of two marginal multinomials) against the
/// full joint multinomial, both with Dirichlet priors.
#[derive(Clone, Debug)]
pub struct BayesianTest<'a> {
    data: &'a Dataset,
    /// Prior probability of the independent model.
    pub prior_independent: f64,
    /// Dirichlet hyperparameter per cell, shared by both models.
    pub alpha: f64,
    /// Decide independence when the posterior reaches this value.
    pub threshold: f64,
}

impl<'a> BayesianTest<'a> {
    pub fn new(data: &'a Dataset) -> Self {
        BayesianTest {
            data,
            prior_independent: 0.5,
            alpha: 1.0,
            threshold: 0.5,
        }
    }

    /// `ln P(D | independent) - ln P(D | dependent)` summed over slices.
    pub fn log_bayes_factor(&self, t: &Triplet) -> Result<f64> {
        check(t, self.data.n())?;
        let table = self.data.contingency_table(t)?;
        let (r, c) = (table.x_arity(), table.y_arity());
        let mut log_bf = 0.0;
        for slice in table.slices() {
            if slice.iter().all(|&v| v == 0) {
                continue;
            }
            let rows = (0..r).map(|i| slice[i * c..(i + 1) * c].iter().sum::<u64>());
            let cols = (0..c).map(|j| (0..r).map(|i| slice[i * c + j]).sum::<u64>());
            let independent = dirichlet_multinomial_log_ml(rows, self.alpha)
                + dirichlet_multinomial_log_ml(cols, self.alpha);
            let dependent = dirichlet_multinomial_log_ml(slice.iter().copied(), self.alpha);
            log_bf += independent - dependent;
        }
        Ok(log_bf)
    }
}

impl IndependenceTest for BayesianTest<'_> {
    fn n_vars(&self) -> usize {
        self.data.n()
    }

    fn judge(&self, t: &Triplet) -> Result<Judgment> {
        let prior = self.prior_independent;
        let log_odds = self.log_bayes_factor(t)? + (prior / (1.0 - prior)).ln();
        let posterior = clamp_probability(logistic(log_odds));
        Ok(Judgment {
            triplet: t.clone(),
            posterior_independent: posterior,
            independent: posterior >= self.threshold,
            reliable: true,
            cost_units: self.data.len() as u64 * t.dimension() as u64,
        })
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of Pearson's chi-square test pooled over conditioning slices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub reliable: bool,
}

/// Pools Pearson's statistic over `r x c` slices. Rows and columns with a
/// zero margin are dropped from the slice; the test is unreliable when more
/// than 20% of the remaining cells expect fewer than 5 counts.
pub fn chi_square_slices<'s>(
    slices: impl IntoIterator<Item = &'s [u64]>,
    r: usize,
    c: usize,
) -> ChiSquareOutcome {
    let mut statistic = 0.0;
    let mut dof = 0usize;
    let mut cells = 0usize;
    let mut sparse_cells = 0usize;
    for slice in slices {
        let rows: Vec<u64> = (0..r).map(|i| slice[i * c..(i + 1) * c].iter().sum()).collect();
        let cols: Vec<u64> = (0..c).map(|j| (0..r).map(|i| slice[i * c + j]).sum()).collect();
        let n: u64 = rows.iter().sum();
        if n == 0 {
            continue;
        }
        let live_rows = rows.iter().filter(|&&v| v > 0).count();
        let live_cols = cols.iter().filter(|&&v| v > 0).count();
        dof += (live_rows - 1) * (live_cols - 1);
        for (i, &ri) in rows.iter().enumerate().filter(|(_, &v)| v > 0) {
            for (j, &cj) in cols.iter().enumerate().filter(|(_, &v)| v > 0) {
                let expected = ri as f64 * cj as f64 / n as f64;
                let diff = slice[i * c + j] as f64 - expected;
                statistic += diff * diff / expected;
                cells += 1;
                if expected < 5.0 {
                    sparse_cells += 1;
                }
            }
        }
    }
    let mut reliable = cells > 0 && (sparse_cells as f64) <= 0.2 * cells as f64;
    let p_value = if dof == 0 {
        reliable = false;
        1.0
    } else if statistic <= 0.0 {
        1.0
    } else {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0)
    };
    ChiSquareOutcome {
        statistic,
        degrees_of_freedom: dof,
        p_value,
        reliable,
    }
}

#[derive(Clone, Debug)]
pub struct ChiSquareTest<'a> {
    data: &'a Dataset,
    pub alpha: f64,
}

impl<'a> ChiSquareTest<'a> {
    pub fn new(data: &'a Dataset, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "significance level {alpha} outside (0, 1)"
            )));
        }
        Ok(ChiSquareTest { data, alpha })
    }

    pub fn outcome(&self, t: &Triplet) -> Result<ChiSquareOutcome> {
        check(t, self.data.n())?;
        let table = self.data.contingency_table(t)?;
        Ok(chi_square_slices(
            table.slices(),
            table.x_arity(),
            table.y_arity(),
        ))
    }
}

impl IndependenceTest for ChiSquareTest<'_> {
    fn n_vars(&self) -> usize {
        self.data.n()
    }

    fn judge(&self, t: &Triplet) -> Result<Judgment> {
        let outcome = self.outcome(t)?;
        Ok(Judgment {
            triplet: t.clone(),
            // The p-value stands in for a posterior when this backend scores.
            posterior_independent: clamp_probability(outcome.p_value),
            independent: outcome.degrees_of_freedom == 0 || outcome.p_value >= self.alpha,
            reliable: outcome.reliable,
            cost_units: self.data.len() as u64 * t.dimension() as u64,
        })
    }
}

/// Answers by vertex separation in a known structure, with posterior
/// `p_hi` for the true value.
#[derive(Clone, Debug)]
pub struct OracleTest {
    truth: Structure,
    p_hi: f64,
}

impl OracleTest {
    pub fn new(truth: Structure, p_hi: f64) -> Result<Self> {
        if !(p_hi > 0.5 && p_hi <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "oracle confidence {p_hi} outside (0.5, 1]"
            )));
        }
        Ok(OracleTest {
            truth,
            p_hi: p_hi.min(1.0 - EPSILON),
        })
    }

    pub fn truth(&self) -> &Structure {
        &self.truth
    }

    pub fn p_hi(&self) -> f64 {
        self.p_hi
    }
}

impl IndependenceTest for OracleTest {
    fn n_vars(&self) -> usize {
        self.truth.n()
    }

    fn judge(&self, t: &Triplet) -> Result<Judgment> {
        check(t, self.truth.n())?;
        let separated = self.truth.separated(t);
        Ok(Judgment {
            triplet: t.clone(),
            posterior_independent: if separated { self.p_hi } else { 1.0 - self.p_hi },
            independent: separated,
            reliable: true,
            cost_units: 0,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    pub lookups: u64,
    pub hits: u64,
    /// Fresh backend evaluations.
    pub misses: u64,
    pub cost_units: u64,
    pub entries: u64,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        if self.lookups == 0 {
            0.0
        } else {
            self.hits as f64 / self.lookups as f64
        }
    }

    /// Counter differences `self - earlier`.
    pub fn since(&self, earlier: &CacheStats) -> CacheStats {
        CacheStats {
            lookups: self.lookups - earlier.lookups,
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
            cost_units: self.cost_units - earlier.cost_units,
            entries: self.entries - earlier.entries,
        }
    }
}

/// Thread-safe memo of judgments keyed by canonical triplet.
#[derive(Debug, Default)]
pub struct TestCache {
    map: RwLock<HashMap<Triplet, Judgment>>,
    hits: AtomicU64,
    misses: AtomicU64,
    cost_units: AtomicU64,
}

impl TestCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &self,
        t: &Triplet,
        compute: impl FnOnce(&Triplet) -> Result<Judgment>,
    ) -> Result<Judgment> {
        if let Some(j) = self.map.read().get(t) {
            self.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(j.clone());
        }
        let judgment = compute(t)?;
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.cost_units
            .fetch_add(judgment.cost_units, Ordering::Relaxed);
        // Racing writers computed the same pure value, so either wins.
        self.map.write().insert(t.clone(), judgment.clone());
        Ok(judgment)
    }

    pub fn stats(&self) -> CacheStats {
        let hits = self.hits.load(Ordering::Relaxed);
        let misses = self.misses.load(Ordering::Relaxed);
        CacheStats {
            lookups: hits + misses,
            hits,
            misses,
            cost_units: self.cost_units.load(Ordering::Relaxed),
            entries: self.map.read().len() as u64,
        }
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A backend paired with the cache every lookup goes through.
#[derive(Clone, Copy)]
pub struct Tester<'a> {
    test: &'a dyn IndependenceTest,
    cache: &'a TestCache,
}

impl<'a> Tester<'a> {
    pub fn new(test: &'a dyn IndependenceTest, cache: &'a TestCache) -> Self {
        Tester { test, cache }
    }

    pub fn n_vars(&self) -> usize {
        self.test.n_vars()
    }

    pub fn cache(&self) -> &'a TestCache {
        self.cache
    }

    pub fn judge(&self, t: &Triplet) -> Result<Judgment> {
        self.cache.get_or_compute(t, |t| self.test.judge(t))
    }

    pub fn posterior_independent(&self, t: &Triplet) -> Result<f64> {
        Ok(self.judge(t)?.posterior_independent)
    }

    pub fn decide(&self, t: &Triplet) -> Result<bool> {
        Ok(self.judge(t)?.independent)
    }
}
