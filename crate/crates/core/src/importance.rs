//! Split-frequency variable importance and its permutation test.
//!
//! For depths `k = 1..=4` (the root split is depth 1) the share of all
//! depth-`k` splits in the forest that use a column is weighted by `k^-2`;
//! the weighted sum is normalised by `sum_k k^-2`. Indicator columns of a
//! categorical variable are summed into the variable.

use serde::{Deserialize, Serialize};

use crate::data::{mix, Dataset, SeededSampler};
use crate::error::{Error, Result};
use crate::forest::{fit_causal_forest, CausalForest, ForestParams};
use crate::par;

pub const IMPORTANCE_MAX_DEPTH: usize = 4;

const PERMUTATION_SALT: u64 = 0x7065_726d;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableImportance {
    pub name: String,
    /// Depth-weighted split share in `[0, 1]`.
    pub raw: f64,
    /// `100 * raw / max(raw)`.
    pub scaled: f64,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    pub variables: Vec<VariableImportance>,
}

impl ImportanceReport {
    fn from_raw(names: Vec<String>, raw: Vec<f64>) -> Self {
        let max = raw.iter().copied().fold(0.0, f64::max);
        let variables = names
            .into_iter()
            .zip(raw)
            .map(|(name, raw)| VariableImportance {
                name,
                raw,
                scaled: if max > 0.0 { 100.0 * raw / max } else { 0.0 },
                p_value: None,
            })
            .collect();
        Self { variables }
    }

    pub fn raw(&self) -> Vec<f64> {
        self.variables.iter().map(|v| v.raw).collect()
    }

    pub fn get(&self, name: &str) -> Option<&VariableImportance> {
        self.variables.iter().find(|v| v.name == name)
    }
}

/// Per-depth split counts: `counts[k - 1][column]`.
pub fn split_counts(forest: &CausalForest) -> Vec<Vec<usize>> {
    let width = forest.width();
    let mut counts = vec![vec![0usize; width]; IMPORTANCE_MAX_DEPTH];
    for t in &forest.trees {
        t.tree.for_each_split(|depth, rule| {
            if depth <= IMPORTANCE_MAX_DEPTH {
                counts[depth - 1][rule.feature] += 1;
            }
        });
    }
    counts
}

/// Depth-weighted importance per column from per-depth split counts. A
/// depth with no splits adds nothing to the numerator.
pub fn weighted_split_share(counts: &[Vec<usize>]) -> Vec<f64> {
    let width = counts.first().map_or(0, Vec::len);
    let norm: f64 = (1..=counts.len()).map(|k| (k as f64).powi(-2)).sum();
    let mut out = vec![0.0; width];
    for (k, row) in counts.iter().enumerate() {
        let total: usize = row.iter().sum();
        if total == 0 {
            continue;
        }
        let weight = ((k + 1) as f64).powi(-2);
        for (o, &c) in out.iter_mut().zip(row) {
            *o += weight * c as f64 / total as f64;
        }
    }
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Importance per original variable. Split counts of indicator columns are
/// summed before weighting, so variables with equal counts get bit-identical
/// importances.
pub fn variable_importance(forest: &CausalForest) -> Vec<f64> {
    let owners = forest.schema.column_owners();
    let counts: Vec<Vec<usize>> = split_counts(forest)
        .into_iter()
        .map(|row| {
            let mut per_var = vec![0usize; forest.schema.len()];
            for (c, n) in row.into_iter().enumerate() {
                per_var[owners[c]] += n;
            }
            per_var
        })
        .collect();
    weighted_split_share(&counts)
}

pub fn split_frequency_importance(forest: &CausalForest) -> ImportanceReport {
    let names = forest.schema.entries().iter().map(|c| c.name.clone()).collect();
    ImportanceReport::from_raw(names, variable_importance(forest))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestConfig {
    pub num_permutations: usize,
    pub forest: ForestParams,
    /// Seed for the outcome permutations; forest randomness is keyed by
    /// `forest.seed`.
    pub seed: u64,
    /// Report `(count + 1) / (R + 1)` instead of `count / R`.
    pub smoothed: bool,
}

impl Default for PermutationTestConfig {
    fn default() -> Self {
        Self {
            num_permutations: 1000,
            forest: ForestParams::default(),
            seed: 0,
            smoothed: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PermutationOutcome {
    pub report: ImportanceReport,
    /// Raw variable importances of each permuted refit, by replicate.
    pub replicates: Vec<Vec<f64>>,
}

/// Fits a reference forest and `num_permutations` forests on permuted
/// outcomes, and reports for each variable the share of permuted forests
/// whose importance strictly exceeds the reference importance.
///
/// Only splits down to depth 4 enter the importance, and each node's
/// randomness depends on its position alone, so every forest here is grown
/// to depth 4 only; the top levels are identical to those of a fully grown
/// forest with the same seed.
pub fn permutation_pvalues(
    data: &Dataset,
    config: &PermutationTestConfig,
) -> Result<PermutationOutcome> {
    let mut params = config.forest.clone();
    params.tree_params.max_depth = Some(
        params
            .tree_params
            .max_depth
            .map_or(IMPORTANCE_MAX_DEPTH, |d| d.min(IMPORTANCE_MAX_DEPTH)),
    );
    let reference = fit_causal_forest(data, &params)?;
    let mut report = split_frequency_importance(&reference);
    if config.num_permutations == 0 {
        return Ok(PermutationOutcome {
            report,
            replicates: Vec::new(),
        });
    }

    let perm_key = mix(config.seed, PERMUTATION_SALT);
    let replicates = par::try_map_indexed(config.num_permutations, |r| {
        let perm = SeededSampler::new(perm_key, r as u64).permutation(data.n());
        let y: Vec<f64> = perm.iter().map(|&i| data.y()[i]).collect();
        let permuted = data.with_outcome(y)?;
        let replicate_params = ForestParams {
            seed: mix(params.seed, r as u64 + 1),
            ..params.clone()
        };
        let forest = fit_causal_forest(&permuted, &replicate_params)?;
        Ok(variable_importance(&forest))
    })?;

    let total = config.num_permutations as f64;
    for (j, v) in report.variables.iter_mut().enumerate() {
        let exceed = replicates.iter().filter(|imp| imp[j] > v.raw).count() as f64;
        v.p_value = Some(if config.smoothed {
            (exceed + 1.0) / (total + 1.0)
        } else {
            exceed / total
        });
    }
    if report
        .variables
        .iter()
        .any(|v| v.p_value.is_some_and(|p| !(0.0..=1.0).contains(&p)))
    {
        return Err(Error::Degenerate("p-value outside [0, 1]".into()));
    }
    Ok(PermutationOutcome { report, replicates })
}
