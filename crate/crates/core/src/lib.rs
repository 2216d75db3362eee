//! Heterogeneous treatment effect estimation with honest causal trees and
//! causal forests.
//!
//! The crate is organised bottom-up:
//!
//! * [`data`] holds the typed covariate schema, the [`Dataset`] container,
//!   CSV ingestion and the seeded sampling utilities every other module uses.
//! * [`tree`] grows regression trees and honest causal trees.
//! * [`forest`] builds subsampled ensembles, ITE predictions and
//!   little-bags variance estimates.
//! * [`importance`] computes depth-weighted split-frequency importance and
//!   permutation p-values.
//! * [`inference`] runs repeated sample splitting for BLP, sorted GATEs and
//!   CLAN with median aggregation.
//! * [`simulation`] generates the synthetic designs used by the benchmarks.
//! * [`features`] turns half-hourly smart-meter readings into covariates and
//!   the peak-consumption outcome.
//! * [`cli`] is the batch front end.
//!
//! All randomness is derived from explicit seeds, and parallel work (see
//! [`par`]) is reduced in index order, so results do not depend on the
//! number of worker threads.

pub mod cli;
pub mod data;
pub mod error;
pub mod features;
pub mod forest;
pub mod importance;
pub mod inference;
pub mod par;
pub mod simulation;
pub mod tree;

pub use data::{CovariateKind, CovariateSchema, Dataset, Propensity, SeededSampler};
pub use error::{Error, Result};
pub use forest::{CausalForest, ForestKind, ForestParams, ItePrediction};
pub use importance::{ImportanceReport, PermutationTestConfig};
pub use tree::{SplitRule, Target, Tree, TreeNode, TreeParams};
