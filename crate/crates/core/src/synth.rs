//! Synthetic benchmarks: random structures, pairwise binary potentials and
//! Gibbs-sampled datasets.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::Structure;
use crate::seed;

pub const DEFAULT_BURN_IN: usize = 1000;
pub const DEFAULT_THIN: usize = 10;
pub const WEIGHT_RANGE: (f64, f64) = (0.5, 1.5);

/// Connects every node to the first `tau` entries of a random permutation
/// of the other nodes.
pub fn random_structure(n: usize, tau: usize, seed: u64) -> Result<Structure> {
    if tau == 0 || tau >= n {
        return Err(Error::InvalidArgument(format!(
            "neighbors per node must satisfy 1 <= tau < n, got tau = {tau}, n = {n}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut g = Structure::new(n);
    for i in 0..n {
        let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        others.shuffle(&mut rng);
        for &j in &others[..tau] {
            g.set_edge(i, j, true);
        }
    }
    Ok(g)
}

/// Binary pairwise model `p(s) ∝ exp(sum_(i,j) w_ij s_i s_j)`, `s ∈ {-1, +1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseModel {
    structure: Structure,
    /// One weight per edge, aligned with `structure.edges()`.
    weights: Vec<((usize, usize), f64)>,
}

impl PairwiseModel {
    pub fn new(structure: Structure, weights: Vec<((usize, usize), f64)>) -> Result<Self> {
        let edges = structure.edges();
        let mut sorted: Vec<_> = weights
            .into_iter()
            .map(|((u, v), w)| ((u.min(v), u.max(v)), w))
            .collect();
        sorted.sort_by_key(|&(e, _)| e);
        if sorted.iter().map(|(e, _)| *e).ne(edges.iter().copied()) {
            return Err(Error::InvalidArgument(
                "weights must cover exactly the edges of the structure".into(),
            ));
        }
        Ok(PairwiseModel {
            structure,
            weights: sorted,
        })
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn weights(&self) -> &[((usize, usize), f64)] {
        &self.weights
    }

    /// `u v w` per edge.
    pub fn weights_text(&self) -> String {
        let mut out = String::new();
        for ((u, v), w) in &self.weights {
            writeln!(out, "{u} {v} {w}").expect("writing to a String");
        }
        out
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.weights_text()).map_err(|e| Error::io(path, e))
    }

    fn coupling_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut lists = vec![Vec::new(); self.structure.n()];
        for &((u, v), w) in &self.weights {
            lists[u].push((v, w));
            lists[v].push((u, w));
        }
        lists
    }
}

/// Draws `|w|` uniformly from [`WEIGHT_RANGE`] with a random sign per edge.
pub fn random_parameters(g: &Structure, seed: u64) -> PairwiseModel {
    let mut rng = seed::rng(seed);
    let weights = g
        .edges()
        .into_iter()
        .map(|e| {
            let magnitude = rng.gen_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            (e, sign * magnitude)
        })
        .collect();
    PairwiseModel {
        structure: g.clone(),
        weights,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GibbsOptions {
    pub burn_in: usize,
    pub thin: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        GibbsOptions {
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
        }
    }
}

/// Single-site Gibbs sampling in index order. After `burn_in` sweeps, one
/// row is kept every `thin` sweeps. Spins map to codes `-1 -> 0`, `+1 -> 1`.
pub fn gibbs_sample(
    model: &PairwiseModel,
    rows: usize,
    seed: u64,
    options: GibbsOptions,
) -> Result<Dataset> {
    if rows == 0 {
        return Err(Error::InvalidArgument("at least one row must be sampled".into()));
    }
    let n = model.structure.n();
    let couplings = model.coupling_lists();
    let mut rng = seed::rng(seed);
    let mut spins: Vec<f64> = (0..n)
        .map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
        .collect();
    let sweep = |spins: &mut Vec<f64>, rng: &mut rand_chacha::ChaCha8Rng| {
        for i in 0..n {
            let field: f64 = couplings[i].iter().map(|&(j, w)| w * spins[j]).sum();
            let p_up = 1.0 / (1.0 + (-2.0 * field).exp());
            spins[i] = if rng.gen::<f64>() < p_up { 1.0 } else { -1.0 };
        }
    };
    for _ in 0..options.burn_in {
        sweep(&mut spins, &mut rng);
    }
    let mut columns = vec![Vec::with_capacity(rows); n];
    for _ in 0..rows {
        for _ in 0..options.thin.max(1) {
            sweep(&mut spins, &mut rng);
        }
        for (col, &s) in columns.iter_mut().zip(&spins) {
            col.push(u32::from(s > 0.0));
        }
    }
    let names = (0..n).map(|j| format!("X{j}")).collect();
    Dataset::from_columns(names, vec![2; n], columns)
}

/// One chain of `max(sizes)` rows, with every smaller size drawn as a
/// random subsample of it. Returned in the order of `sizes`.
pub fn nested_datasets(
    model: &PairwiseModel,
    sizes: &[usize],
    seed: u64,
    options: GibbsOptions,
) -> Result<Vec<Dataset>> {
    let largest = sizes.iter().copied().max().ok_or_else(|| {
        Error::InvalidArgument("at least one dataset size is required".into())
    })?;
    let pool = gibbs_sample(model, largest, seed::derive(seed, &[0]), options)?;
    sizes
        .iter()
        .map(|&rows| {
            if rows == largest {
                Ok(pool.clone())
            } else {
                pool.subsample(rows, seed::derive(seed, &[1, rows as u64]))
            }
        })
        .collect()
}
