//! Quality metrics: edge and independence Hamming distances and error
//! ratios against GSMN.

use std::fmt;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::citests::Tester;
use crate::error::{Error, Result};
use crate::graph::{Structure, Triplet};
use crate::seed;

/// Triplets sampled uniformly within each conditioning-set size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripletSample {
    pub triplets: Vec<Triplet>,
    /// Number of triplets with `|z| = m`, indexed by `m`.
    pub per_cardinality: Vec<usize>,
    pub seed: u64,
}

/// Number of triplets drawn for each cardinality `0..=n-2`. The remainder of
/// `total / (n - 1)` goes to the smallest cardinalities.
pub fn strata_sizes(n: usize, total: usize) -> Vec<usize> {
    let strata = n - 1;
    (0..strata)
        .map(|m| total / strata + usize::from(m < total % strata))
        .collect()
}

pub fn sample_triplets(n: usize, total: usize, seed: u64) -> Result<TripletSample> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "triplet sampling needs at least 3 variables, got {n}"
        )));
    }
    if total < n - 1 {
        return Err(Error::InvalidArgument(format!(
            "{total} triplets cannot cover {} cardinalities",
            n - 1
        )));
    }
    let per_cardinality = strata_sizes(n, total);
    let mut rng = seed::rng(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut triplets = Vec::with_capacity(total);
    for (m, &count) in per_cardinality.iter().enumerate() {
        for _ in 0..count {
            perm.shuffle(&mut rng);
            let t = Triplet::new(perm[0], perm[1], perm[2..2 + m].iter().copied())
                .expect("a permutation has distinct entries");
            triplets.push(t);
        }
    }
    Ok(TripletSample {
        triplets,
        per_cardinality,
        seed,
    })
}

fn same_size(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::SizeMismatch { left: a, right: b });
    }
    Ok(())
}

/// Number of unordered pairs whose edge indicator differs.
pub fn edge_hamming(g: &Structure, truth: &Structure) -> Result<usize> {
    same_size(g.n(), truth.n())?;
    let n = g.n();
    Ok((0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .filter(|&(x, y)| g.has_edge(x, y) != truth.has_edge(x, y))
        .count())
}

fn fraction(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        count as f64 / total as f64
    }
}

/// Fraction of sampled triplets on which vertex separation disagrees.
pub fn independence_hamming_structure(
    g: &Structure,
    truth: &Structure,
    sample: &TripletSample,
) -> Result<f64> {
    same_size(g.n(), truth.n())?;
    let wrong = sample
        .triplets
        .iter()
        .filter(|t| g.separated(t) != truth.separated(t))
        .count();
    Ok(fraction(wrong, sample.triplets.len()))
}

/// Fraction of sampled triplets on which separation in `g` disagrees with
/// the test decision on the full dataset behind `tester`.
pub fn independence_hamming_data(
    g: &Structure,
    tester: &Tester<'_>,
    sample: &TripletSample,
) -> Result<f64> {
    same_size(g.n(), tester.n_vars())?;
    let mut wrong = 0;
    for t in &sample.triplets {
        if g.separated(t) != tester.decide(t)? {
            wrong += 1;
        }
    }
    Ok(fraction(wrong, sample.triplets.len()))
}

/// Every canonical triplet over `n` variables with `|z| = m`.
pub fn all_triplets_of_cardinality(n: usize, m: usize) -> Vec<Triplet> {
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            let rest: Vec<usize> = (0..n).filter(|&v| v != x && v != y).collect();
            for mask in 0u64..1 << rest.len() {
                if mask.count_ones() as usize != m {
                    continue;
                }
                let z = rest
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &v)| v);
                out.push(Triplet::new(x, y, z).expect("disjoint by construction"));
            }
        }
    }
    out
}

/// The value the stratified estimator converges to: per-cardinality exact
/// disagreement rates weighted by the share of each stratum in a sample of
/// `total` triplets.
pub fn stratified_independence_hamming(g: &Structure, truth: &Structure, total: usize) -> Result<f64> {
    same_size(g.n(), truth.n())?;
    let n = g.n();
    if n < 3 {
        return Err(Error::InvalidArgument("need at least 3 variables".into()));
    }
    let sizes = strata_sizes(n, total);
    let counted: usize = sizes.iter().sum();
    let mut value = 0.0;
    for (m, &size) in sizes.iter().enumerate() {
        let all = all_triplets_of_cardinality(n, m);
        let wrong = all
            .iter()
            .filter(|t| g.separated(t) != truth.separated(t))
            .count();
        value += fraction(size, counted) * fraction(wrong, all.len());
    }
    Ok(value)
}

/// Error ratios of an algorithm against GSMN over paired runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    /// `None` where GSMN made no error but the algorithm did.
    pub ratios: Vec<Option<f64>>,
    pub mean: f64,
    pub sd: f64,
    pub undefined: usize,
}

impl fmt::Display for RatioSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.3}({:.3})", self.mean, self.sd)
    }
}

/// Mean and sample standard deviation as `mean(sd)`, three decimals.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let sd = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    };
    (mean, sd)
}

pub fn format_mean_sd(values: &[f64]) -> String {
    let (m, s) = mean_sd(values);
    format!("{m:.3}({s:.3})")
}

/// Per-pair `ours / gsmn`. Pairs where both are zero count as 1; pairs with
/// a zero GSMN error and a positive error of ours are undefined and left out
/// of the mean.
pub fn ratio_report(ours: &[f64], gsmn: &[f64]) -> Result<RatioSummary> {
    if ours.len() != gsmn.len() {
        return Err(Error::InvalidArgument(format!(
            "{} errors paired with {} GSMN errors",
            ours.len(),
            gsmn.len()
        )));
    }
    let ratios: Vec<Option<f64>> = ours
        .iter()
        .zip(gsmn)
        .map(|(&o, &g)| match (o, g) {
            (o, g) if g > 0.0 => Some(o / g),
            (0.0, _) => Some(1.0),
            _ => None,
        })
        .collect();
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let (mean, sd) = mean_sd(&defined);
    Ok(RatioSummary {
        undefined: ratios.len() - defined.len(),
        ratios,
        mean,
        sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strata_for_twelve_variables() {
        let s = sample_triplets(12, 2000, 1).unwrap();
        assert_eq!(s.per_cardinality.len(), 11);
        assert!(s.per_cardinality.iter().all(|&c| c == 181 || c == 182));
        assert_eq!(s.per_cardinality.iter().sum::<usize>(), 2000);
        assert_eq!(s.per_cardinality[0], 182);
        assert_eq!(s.triplets.len(), 2000);
        for t in &s.triplets {
            assert!(t.x() < t.y() && !t.z().contains(&t.x()) && !t.z().contains(&t.y()));
        }
    }

    #[test]
    fn smallest_sample() {
        let s = sample_triplets(3, 2, 0).unwrap();
        let sizes: Vec<usize> = s.triplets.iter().map(|t| t.z().len()).collect();
        assert_eq!(sizes, vec![0, 1]);
        assert!(sample_triplets(2, 10, 0).is_err());
        assert!(sample_triplets(5, 3, 0).is_err());
        assert_eq!(sample_triplets(6, 50, 4).unwrap(), sample_triplets(6, 50, 4).unwrap());
    }

    #[test]
    fn edge_distance() {
        let tri = Structure::complete(3);
        let empty = Structure::new(3);
        assert_eq!(edge_hamming(&tri, &tri).unwrap(), 0);
        assert_eq!(edge_hamming(&empty, &tri).unwrap(), 3);
        assert_eq!(edge_hamming(&tri, &empty).unwrap(), 3);
        assert!(edge_hamming(&tri, &Structure::new(4)).is_err());
    }

    #[test]
    fn ratios() {
        let same = ratio_report(&[2.0, 4.0], &[2.0, 4.0]).unwrap();
        assert_eq!((same.mean, same.sd), (1.0, 0.0));
        let zero = ratio_report(&[0.0, 0.0], &[3.0, 1.0]).unwrap();
        assert_eq!(zero.mean, 0.0);
        let edge = ratio_report(&[0.0, 1.0, 1.0], &[0.0, 0.0, 2.0]).unwrap();
        assert_eq!(edge.ratios, vec![Some(1.0), None, Some(0.5)]);
        assert_eq!(edge.undefined, 1);
        assert_eq!(edge.mean, 0.75);
        assert!(ratio_report(&[1.0], &[]).is_err());
        let paper = RatioSummary {
            ratios: vec![],
            mean: 0.364,
            sd: 0.150,
            undefined: 0,
        };
        assert_eq!(paper.to_string(), "0.364(0.150)");
    }

    #[test]
    fn triplet_enumeration_counts() {
        // C(5, 2) pairs times C(3, m) conditioning sets.
        assert_eq!(all_triplets_of_cardinality(5, 0).len(), 10);
        assert_eq!(all_triplets_of_cardinality(5, 2).len(), 30);
        assert_eq!(all_triplets_of_cardinality(5, 3).len(), 10);
    }
}
