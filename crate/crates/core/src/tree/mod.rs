//! Regression trees and honest causal trees.
//!
//! Splits send rows with `x[feature] <= threshold` left. Thresholds are
//! midpoints between consecutive distinct sorted values. Among candidate
//! splits whose scores agree to within a relative `1e-10`, the lowest
//! feature index and then the lowest threshold wins.
//!
//! Causal trees choose splits maximising `n_L * tau_L^2 + n_R * tau_R^2`,
//! where `tau` is the treated-minus-control difference in means. With
//! honesty the rows are halved: one half picks the structure, the other
//! half alone supplies leaf estimates.

mod grow;
mod split;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SeededSampler};
use crate::error::{Error, Result};

pub(crate) use grow::{grow_tree, tree_seed as grow_tree_seed, GrowSpec};
pub use split::{best_split, SplitCandidate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Minimum structure rows in each child.
    pub min_leaf: usize,
    /// Minimum treated and minimum control structure rows in each child of
    /// a causal split.
    pub min_treat_control_per_leaf: usize,
    pub honest: bool,
    /// Deepest level at which a split may be placed (root split is depth 1).
    /// `Some(0)` forces a single leaf.
    pub max_depth: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 5,
            min_treat_control_per_leaf: 2,
            honest: true,
            max_depth: None,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 || self.min_treat_control_per_leaf == 0 {
            return Err(Error::invalid("tree size bounds must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeKind {
    Regression,
    Causal,
}

/// Which leaf statistic a prediction returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Effect,
    Outcome,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub feature: usize,
    pub threshold: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, row: &[f64]) -> bool {
        row[self.feature] <= self.threshold
    }
}

/// Leaf statistics computed from the estimation rows reaching the leaf.
///
/// `tau_hat` and `mean_y` are always populated: when the leaf's own rows do
/// not contain both groups (or no rows at all) the value of the nearest
/// ancestor that does is used and `inherited` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafStats {
    pub n_total: usize,
    pub n_treated: usize,
    pub n_control: usize,
    pub mean_treated: Option<f64>,
    pub mean_control: Option<f64>,
    pub tau_hat: Option<f64>,
    pub mean_y: f64,
    pub inherited: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        rule: SplitRule,
        depth: usize,
        key: u64,
        /// Criterion gain over the unsplit node, on structure rows.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        stats: LeafStats,
        depth: usize,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Split { depth, .. } | TreeNode::Leaf { depth, .. } => *depth,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }
}

/// Row indices (into the dataset the tree was grown on) used for structure
/// and for estimation. Identical when the tree is not honest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HonestRows {
    pub structure: Vec<usize>,
    pub estimation: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub kind: TreeKind,
    pub width: usize,
    pub root: TreeNode,
    #[serde(skip)]
    pub rows: HonestRows,
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> Result<&LeafStats> {
        if row.len() != self.width {
            return Err(Error::WidthMismatch {
                expected: self.width,
                got: row.len(),
            });
        }
        Ok(self.leaf_unchecked(row))
    }

    #[inline]
    pub(crate) fn leaf_unchecked(&self, row: &[f64]) -> &LeafStats {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { stats, .. } => return stats,
                TreeNode::Split {
                    rule, left, right, ..
                } => node = if rule.goes_left(row) { left } else { right },
            }
        }
    }

    pub fn predict(&self, row: &[f64], target: Target) -> Result<f64> {
        let leaf = self.leaf(row)?;
        match target {
            Target::Outcome => Ok(leaf.mean_y),
            Target::Effect => leaf
                .tau_hat
                .ok_or_else(|| Error::invalid("tree carries no treatment effect estimates")),
        }
    }

    /// Calls `f(depth, rule)` for every split, preorder.
    pub fn for_each_split(&self, mut f: impl FnMut(usize, &SplitRule)) {
        fn walk(node: &TreeNode, f: &mut impl FnMut(usize, &SplitRule)) {
            if let TreeNode::Split {
                rule,
                depth,
                left,
                right,
                ..
            } = node
            {
                f(*depth, rule);
                walk(left, f);
                walk(right, f);
            }
        }
        walk(&self.root, &mut f);
    }

    pub fn leaves(&self) -> Vec<&LeafStats> {
        fn walk<'a>(node: &'a TreeNode, out: &mut Vec<&'a LeafStats>) {
            match node {
                TreeNode::Leaf { stats, .. } => out.push(stats),
                TreeNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// FNV-1a hash over the preorder sequence of split rules and leaf
    /// markers. Depends on structure only, never on leaf estimates.
    pub fn structure_hash(&self) -> u64 {
        fn eat(h: &mut u64, word: u64) {
            for b in word.to_le_bytes() {
                *h ^= b as u64;
                *h = h.wrapping_mul(0x0000_0100_0000_01B3);
            }
        }
        fn walk(node: &TreeNode, h: &mut u64) {
            match node {
                TreeNode::Leaf { .. } => eat(h, u64::MAX),
                TreeNode::Split {
                    rule, left, right, ..
                } => {
                    eat(h, rule.feature as u64);
                    eat(h, rule.threshold.to_bits());
                    walk(left, h);
                    walk(right, h);
                }
            }
        }
        let mut h = 0xCBF2_9CE4_8422_2325;
        walk(&self.root, &mut h);
        h
    }
}

/// Fits a CART regression tree (sum-of-squares criterion) using every
/// feature in `candidate_features` at each split.
pub fn fit_regression_tree(
    data: &Dataset,
    params: &TreeParams,
    candidate_features: &[usize],
    sampler: &SeededSampler,
) -> Result<Tree> {
    params.validate()?;
    if data.n() < 2 * params.min_leaf {
        return Err(Error::invalid(format!(
            "{} rows cannot satisfy a minimum leaf size of {}",
            data.n(),
            params.min_leaf
        )));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    let spec = GrowSpec::new(TreeKind::Regression, params, candidate_features, None, data.width())?;
    grow_tree(data, &rows, &spec, sampler)
}

/// Fits an honest (or adaptive, with `honest = false`) causal tree.
pub fn fit_causal_tree(
    data: &Dataset,
    params: &TreeParams,
    candidate_features: &[usize],
    sampler: &SeededSampler,
) -> Result<Tree> {
    params.validate()?;
    let treated = data.num_treated();
    let control = data.n() - treated;
    let k = params.min_treat_control_per_leaf;
    if treated < k || control < k {
        return Err(Error::invalid(format!(
            "causal tree needs at least {k} treated and {k} control rows, found {treated} and {control}"
        )));
    }
    let rows: Vec<usize> = (0..data.n()).collect();
    let spec = GrowSpec::new(TreeKind::Causal, params, candidate_features, None, data.width())?;
    grow_tree(data, &rows, &spec, sampler)
}

#[cfg(test)]
mod tests;
