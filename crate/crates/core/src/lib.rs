//! Independence-based MAP structure learning for discrete Markov networks.
//!
//! The crate scores undirected independence structures by the posterior of a
//! closure of independence assertions (the IB-score) and searches for the
//! structure that maximizes it:
//!
//! - [`ibmap_hc`] climbs over single edge-flips using the Markov-blanket
//!   closure and incremental rescoring, starting from the GSMN output.
//! - [`ibmap_ts`] runs a uniform-cost search over the binary tree of trust or
//!   distrust decisions made on the test sequence of GSMN.
//!
//! Supporting modules load and sample discrete data ([`dataset`], [`synth`]),
//! answer conditional independence queries ([`citests`]), and measure the
//! quality of learned structures ([`eval`]).

pub mod citests;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod graph;
pub mod gsmn;
pub mod ibmap_hc;
pub mod ibmap_ts;
pub mod ibscore;
pub mod report;
pub mod seed;
pub mod synth;

pub use citests::{
    BayesianTest, ChiSquareTest, IndependenceTest, Judgment, OracleTest, TestCache, Tester,
};
pub use dataset::{ContingencyTable, Dataset};
pub use error::{Error, Result};
pub use graph::{Structure, Triplet};
pub use report::RunReport;
