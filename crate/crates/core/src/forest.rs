//! Subsampled ensembles of honest trees.
//!
//! Trees are grouped into bags. Each bag draws a half-sample of the data
//! without replacement and every tree in the bag fits on its own
//! without-replacement subsample of that half-sample. Point predictions
//! average the trees; the variance of a prediction is estimated from the
//! spread of bag means ("little bags").

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{mix, subsample_size, CovariateSchema, Dataset, SeededSampler};
use crate::error::{Error, Result};
use crate::par;
use crate::tree::{grow_tree, GrowSpec, Target, Tree, TreeKind, TreeParams};

pub const FORMAT_VERSION: u32 = 1;
pub const VARIANCE_FLOOR: f64 = 1e-12;
pub const DEFAULT_LEVEL: f64 = 0.90;

const BAG_SALT: u64 = 0x6261_6773;
const TREE_SALT: u64 = 0x7472_6565;
const GROW_TAG: u64 = 0x6772_6f77;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub num_trees: usize,
    /// Share of rows each tree is fit on.
    pub sample_fraction: f64,
    /// Share of expanded columns drawn at every split (at least one).
    pub mtry_fraction: f64,
    pub tree_params: TreeParams,
    /// Trees per half-sample bag.
    pub bag_size: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            num_trees: 15_000,
            sample_fraction: 0.5,
            mtry_fraction: 1.0 / 3.0,
            tree_params: TreeParams::default(),
            bag_size: 10,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::invalid("a forest needs at least one tree"));
        }
        if self.bag_size == 0 || !self.num_trees.is_multiple_of(self.bag_size) {
            return Err(Error::invalid(format!(
                "bag size {} must divide the number of trees {}",
                self.bag_size, self.num_trees
            )));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::invalid("sample fraction must lie in (0, 1]"));
        }
        if !(self.mtry_fraction > 0.0 && self.mtry_fraction <= 1.0) {
            return Err(Error::invalid("mtry fraction must lie in (0, 1]"));
        }
        self.tree_params.validate()
    }

    pub fn features_per_split(&self, width: usize) -> usize {
        ((width as f64 * self.mtry_fraction).floor() as usize).max(1)
    }

    fn tree_sampler(&self, t: usize) -> SeededSampler {
        SeededSampler::new(mix(self.seed, TREE_SALT), t as u64)
    }

    fn bag_sampler(&self, g: usize) -> SeededSampler {
        SeededSampler::new(mix(self.seed, BAG_SALT), g as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ForestKind {
    Causal,
    Regression,
}

impl ForestKind {
    fn tree_kind(self) -> TreeKind {
        match self {
            ForestKind::Causal => TreeKind::Causal,
            ForestKind::Regression => TreeKind::Regression,
        }
    }

    fn target(self) -> Target {
        match self {
            ForestKind::Causal => Target::Effect,
            ForestKind::Regression => Target::Outcome,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestTree {
    pub tree: Tree,
    /// Rows of the training data this tree was fit on, in draw order.
    pub subsample: Vec<usize>,
    pub bag: usize,
}

/// A fitted ensemble. Regression forests share the type and differ only in
/// `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalForest {
    pub format_version: u32,
    pub kind: ForestKind,
    pub params: ForestParams,
    pub schema: CovariateSchema,
    pub features_per_split: usize,
    pub trees: Vec<ForestTree>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ItePrediction {
    pub tau_hat: f64,
    pub variance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

pub fn fit_causal_forest(data: &Dataset, params: &ForestParams) -> Result<CausalForest> {
    let k = params.tree_params.min_treat_control_per_leaf;
    let treated = data.num_treated();
    if treated < k || data.n() - treated < k {
        return Err(Error::invalid(format!(
            "causal forest needs at least {k} treated and {k} control rows"
        )));
    }
    fit_forest(data, params, ForestKind::Causal)
}

pub fn fit_regression_forest(data: &Dataset, params: &ForestParams) -> Result<CausalForest> {
    if data.n() < 2 * params.tree_params.min_leaf {
        return Err(Error::invalid(format!(
            "{} rows cannot satisfy a minimum leaf size of {}",
            data.n(),
            params.tree_params.min_leaf
        )));
    }
    fit_forest(data, params, ForestKind::Regression)
}

fn fit_forest(data: &Dataset, params: &ForestParams, kind: ForestKind) -> Result<CausalForest> {
    params.validate()?;
    let n = data.n();
    let per_tree = subsample_size(n, params.sample_fraction)?;
    let half = (n / 2).max(per_tree);
    let width = data.width();
    let mtry = params.features_per_split(width);
    let all_features: Vec<usize> = (0..width).collect();
    let spec = GrowSpec::new(
        kind.tree_kind(),
        &params.tree_params,
        &all_features,
        Some(mtry),
        width,
    )?;

    let num_bags = params.num_trees / params.bag_size;
    let bags: Vec<Vec<usize>> = par::map_indexed(num_bags, |g| {
        if half == n {
            (0..n).collect()
        } else {
            params.bag_sampler(g).sample_without_replacement(n, half)
        }
    });

    let trees = par::try_map_indexed(params.num_trees, |t| {
        let bag = t / params.bag_size;
        let sampler = params.tree_sampler(t);
        let subsample: Vec<usize> = sampler
            .sample_without_replacement(half, per_tree)
            .into_iter()
            .map(|i| bags[bag][i])
            .collect();
        let tree = grow_tree(data, &subsample, &spec, &sampler.derive(GROW_TAG))?;
        Ok(ForestTree {
            tree,
            subsample,
            bag,
        })
    })?;

    Ok(CausalForest {
        format_version: FORMAT_VERSION,
        kind,
        params: params.clone(),
        schema: data.schema().clone(),
        features_per_split: mtry,
        trees,
    })
}

/// Standard normal quantile for a two-sided interval at `level`.
pub fn z_value(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!("confidence level {level} outside (0, 1)")));
    }
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

impl CausalForest {
    pub fn width(&self) -> usize {
        self.schema.width()
    }

    fn check_width(&self, row: &[f64]) -> Result<()> {
        if row.len() != self.width() {
            return Err(Error::WidthMismatch {
                expected: self.width(),
                got: row.len(),
            });
        }
        Ok(())
    }

    /// Per-tree predictions of the forest's natural target, in tree order.
    pub fn tree_predictions(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row)?;
        let target = self.kind.target();
        Ok(self
            .trees
            .iter()
            .map(|t| {
                let leaf = t.tree.leaf_unchecked(row);
                match target {
                    Target::Effect => leaf.tau_hat.unwrap_or(f64::NAN),
                    Target::Outcome => leaf.mean_y,
                }
            })
            .collect())
    }

    /// Mean of the per-tree predictions.
    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        let preds = self.tree_predictions(row)?;
        Ok(preds.iter().sum::<f64>() / preds.len() as f64)
    }

    /// Point estimate, little-bags variance and normal interval.
    pub fn predict_ite(&self, row: &[f64], level: f64) -> Result<ItePrediction> {
        if self.kind != ForestKind::Causal {
            return Err(Error::invalid("ITE predictions need a causal forest"));
        }
        let z = z_value(level)?;
        let preds = self.tree_predictions(row)?;
        let tau_hat = preds.iter().sum::<f64>() / preds.len() as f64;
        let variance = little_bags_variance(&preds, self.params.bag_size);
        let half_width = z * variance.sqrt();
        Ok(ItePrediction {
            tau_hat,
            variance,
            ci_low: tau_hat - half_width,
            ci_high: tau_hat + half_width,
        })
    }

    pub fn predict_ite_batch(&self, rows: &[Vec<f64>], level: f64) -> Result<Vec<ItePrediction>> {
        par::try_map_indexed(rows.len(), |i| self.predict_ite(&rows[i], level))
    }

    pub fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        par::try_map_indexed(rows.len(), |i| self.predict(&rows[i]))
    }

    /// Features that were drawn as split candidates at node `key` of tree
    /// `tree_index`.
    pub fn node_candidates(&self, tree_index: usize, key: u64) -> Vec<usize> {
        let width = self.width();
        let all: Vec<usize> = (0..width).collect();
        let spec = GrowSpec::new(
            self.kind.tree_kind(),
            &self.params.tree_params,
            &all,
            Some(self.features_per_split),
            width,
        )
        .expect("forest parameters were validated at fit time");
        let sampler = self.params.tree_sampler(tree_index).derive(GROW_TAG);
        spec.node_candidates(crate::tree::grow_tree_seed(&sampler), key)
    }

    pub fn save<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn load<R: Read>(reader: R) -> Result<Self> {
        let forest: CausalForest = serde_json::from_reader(reader)?;
        if forest.format_version != FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported forest format version {}",
                forest.format_version
            )));
        }
        Ok(forest)
    }
}

/// Variance of the forest mean from bag-grouped tree predictions:
/// between-bag variance of bag means minus the within-bag variance divided
/// by the bag size, floored at [`VARIANCE_FLOOR`].
pub fn little_bags_variance(preds: &[f64], bag_size: usize) -> f64 {
    if bag_size < 2 || preds.len() < 2 * bag_size {
        return VARIANCE_FLOOR;
    }
    let num_bags = preds.len() / bag_size;
    let mean = preds.iter().sum::<f64>() / preds.len() as f64;
    let mut between = 0.0;
    let mut within = 0.0;
    for bag in preds.chunks_exact(bag_size) {
        let m = bag.iter().sum::<f64>() / bag_size as f64;
        between += (m - mean).powi(2);
        within += bag.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (bag_size - 1) as f64;
    }
    between /= (num_bags - 1) as f64;
    within /= num_bags as f64;
    (between - within / bag_size as f64).max(VARIANCE_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AteEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Difference in group means with the unpooled two-sample standard error.
pub fn ate_difference_in_means(data: &Dataset) -> Result<AteEstimate> {
    let (mut t, mut c) = (Vec::new(), Vec::new());
    for (&y, &d) in data.y().iter().zip(data.d()) {
        if d {
            t.push(y)
        } else {
            c.push(y)
        }
    }
    if t.is_empty() || c.is_empty() {
        return Err(Error::invalid(
            "difference in means needs treated and control rows",
        ));
    }
    let (mt, vt) = mean_var(&t);
    let (mc, vc) = mean_var(&c);
    Ok(AteEstimate {
        estimate: mt - mc,
        std_error: (vt / t.len() as f64 + vc / c.len() as f64).sqrt(),
    })
}

/// Mean and sample variance (zero for a single value).
pub(crate) fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}
