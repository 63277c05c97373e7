use serde::{Deserialize, Serialize, Serializer};

use crate::citests::CacheStats;
use crate::graph::Structure;

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn six_decimals<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(round6(*x))
}

fn six_decimals_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(|&x| round6(x)))
}

/// Outcome of one learning run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// Natural-log IB-score of the returned structure under the closure the
    /// algorithm optimizes.
    #[serde(serialize_with = "six_decimals")]
    pub log_score: f64,
    /// Accepted hill-climbing moves (M).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ascents: Option<u64>,
    #[serde(default, serialize_with = "six_decimals_vec")]
    pub iteration_deltas: Vec<f64>,
    #[serde(default)]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansions: Option<u64>,
    #[serde(default)]
    pub budget_exhausted: bool,
    pub closure_size: u64,
    pub tests: CacheStats,
    pub wall_ms: f64,
}

impl RunReport {
    pub fn new(algorithm: &str, g: &Structure) -> Self {
        RunReport {
            algorithm: algorithm.to_string(),
            n: g.n(),
            edges: g.edges(),
            ..RunReport::default()
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
