use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::split::best_split;
use super::{HonestRows, LeafStats, Tree, TreeKind, TreeNode, TreeParams};
use crate::data::{mix, Dataset, SeededSampler};
use crate::error::{Error, Result};

const HONEST_TAG: u64 = 0x686f_6e65_7374;
pub(crate) const ROOT_KEY: u64 = 1;

#[inline]
pub(crate) fn child_key(key: u64, left: bool) -> u64 {
    mix(key, if left { 2 } else { 3 })
}

/// Everything that shapes a tree apart from its rows and randomness.
#[derive(Debug, Clone)]
pub(crate) struct GrowSpec<'a> {
    pub kind: TreeKind,
    pub params: &'a TreeParams,
    candidates: Vec<usize>,
    /// Features drawn per split; `None` evaluates every candidate.
    pub mtry: Option<usize>,
    pub width: usize,
}

impl<'a> GrowSpec<'a> {
    pub fn new(
        kind: TreeKind,
        params: &'a TreeParams,
        candidates: &[usize],
        mtry: Option<usize>,
        width: usize,
    ) -> Result<Self> {
        let mut candidates = candidates.to_vec();
        candidates.sort_unstable();
        candidates.dedup();
        if let Some(&f) = candidates.iter().find(|&&f| f >= width) {
            return Err(Error::invalid(format!(
                "candidate feature {f} outside width {width}"
            )));
        }
        if mtry == Some(0) {
            return Err(Error::invalid("features per split must be positive"));
        }
        Ok(Self {
            kind,
            params,
            candidates,
            mtry,
            width,
        })
    }

    /// Features available at the node identified by `key` in a tree whose
    /// node keys are salted with `tree_seed`.
    pub fn node_candidates(&self, tree_seed: u64, key: u64) -> Vec<usize> {
        match self.mtry {
            Some(k) if k < self.candidates.len() => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix(tree_seed, key));
                let mut drawn: Vec<usize> = index::sample(&mut rng, self.candidates.len(), k)
                    .into_iter()
                    .map(|i| self.candidates[i])
                    .collect();
                drawn.sort_unstable();
                drawn
            }
            _ => self.candidates.clone(),
        }
    }
}

pub(crate) fn tree_seed(sampler: &SeededSampler) -> u64 {
    mix(sampler.seed, sampler.stream)
}

/// Grows a tree on `rows` of `data`. Randomness (the honest halving and the
/// per-node feature draws) comes from `sampler` only, and each node's draw
/// depends on its position in the tree rather than on the order nodes are
/// visited, so capping `max_depth` reproduces the upper levels exactly.
pub(crate) fn grow_tree(
    data: &Dataset,
    rows: &[usize],
    spec: &GrowSpec<'_>,
    sampler: &SeededSampler,
) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot grow a tree on zero rows"));
    }
    let honest_rows = if spec.params.honest {
        let (a, b) = sampler.derive(HONEST_TAG).split_indices(rows.len())?;
        HonestRows {
            structure: a.into_iter().map(|i| rows[i]).collect(),
            estimation: b.into_iter().map(|i| rows[i]).collect(),
        }
    } else {
        HonestRows {
            structure: rows.to_vec(),
            estimation: rows.to_vec(),
        }
    };

    let seed = tree_seed(sampler);
    let mut builder = Builder {
        data,
        spec,
        seed,
        scratch: Vec::with_capacity(honest_rows.structure.len()),
    };
    let mut root = builder.build(honest_rows.structure.clone(), 1, ROOT_KEY);

    let fallback = group_stats(data, rows);
    if spec.kind == TreeKind::Causal && fallback.tau().is_none() {
        return Err(Error::Degenerate(
            "tree rows do not contain both treated and control observations".into(),
        ));
    }
    estimate(
        &mut root,
        &honest_rows.estimation,
        data,
        spec.kind,
        fallback.tau(),
        fallback.mean().unwrap_or(0.0),
    );

    Ok(Tree {
        kind: spec.kind,
        width: spec.width,
        root,
        rows: honest_rows,
    })
}

struct Builder<'a, 'b> {
    data: &'a Dataset,
    spec: &'a GrowSpec<'b>,
    seed: u64,
    scratch: Vec<(f64, usize)>,
}

impl Builder<'_, '_> {
    fn build(&mut self, rows: Vec<usize>, depth: usize, key: u64) -> TreeNode {
        let params = self.spec.params;
        let depth_ok = params.max_depth.is_none_or(|d| depth <= d);
        if depth_ok && rows.len() >= 2 * params.min_leaf {
            let features = self.spec.node_candidates(self.seed, key);
            if let Some(best) = best_split(
                self.data,
                &rows,
                self.spec.kind,
                &features,
                params,
                &mut self.scratch,
            ) {
                let col = self.data.column(best.feature);
                let (left, right): (Vec<usize>, Vec<usize>) =
                    rows.into_iter().partition(|&i| col[i] <= best.threshold);
                let l = self.build(left, depth + 1, child_key(key, true));
                let r = self.build(right, depth + 1, child_key(key, false));
                return TreeNode::Split {
                    rule: super::SplitRule {
                        feature: best.feature,
                        threshold: best.threshold,
                    },
                    depth,
                    key,
                    gain: best.gain,
                    left: Box::new(l),
                    right: Box::new(r),
                };
            }
        }
        TreeNode::Leaf {
            stats: LeafStats::empty(),
            depth,
        }
    }
}

#[derive(Default)]
struct GroupStats {
    n_t: usize,
    n_c: usize,
    s_t: f64,
    s_c: f64,
}

impl GroupStats {
    fn mean_t(&self) -> Option<f64> {
        (self.n_t > 0).then(|| self.s_t / self.n_t as f64)
    }
    fn mean_c(&self) -> Option<f64> {
        (self.n_c > 0).then(|| self.s_c / self.n_c as f64)
    }
    fn tau(&self) -> Option<f64> {
        Some(self.mean_t()? - self.mean_c()?)
    }
    fn mean(&self) -> Option<f64> {
        let n = self.n_t + self.n_c;
        (n > 0).then(|| (self.s_t + self.s_c) / n as f64)
    }
}

fn group_stats(data: &Dataset, rows: &[usize]) -> GroupStats {
    let (y, d) = (data.y(), data.d());
    let mut g = GroupStats::default();
    for &i in rows {
        if d[i] {
            g.n_t += 1;
            g.s_t += y[i];
        } else {
            g.n_c += 1;
            g.s_c += y[i];
        }
    }
    g
}

fn estimate(
    node: &mut TreeNode,
    rows: &[usize],
    data: &Dataset,
    kind: TreeKind,
    parent_tau: Option<f64>,
    parent_mean: f64,
) {
    let g = group_stats(data, rows);
    let own_tau = g.tau();
    let tau = own_tau.or(parent_tau);
    let mean = g.mean().unwrap_or(parent_mean);
    match node {
        TreeNode::Split {
            rule, left, right, ..
        } => {
            let col = data.column(rule.feature);
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| col[i] <= rule.threshold);
            estimate(left, &l, data, kind, tau, mean);
            estimate(right, &r, data, kind, tau, mean);
        }
        TreeNode::Leaf { stats, .. } => {
            *stats = LeafStats {
                n_total: g.n_t + g.n_c,
                n_treated: g.n_t,
                n_control: g.n_c,
                mean_treated: g.mean_t(),
                mean_control: g.mean_c(),
                tau_hat: tau,
                mean_y: mean,
                inherited: match kind {
                    TreeKind::Causal => own_tau.is_none(),
                    TreeKind::Regression => rows.is_empty(),
                },
            };
        }
    }
}

impl LeafStats {
    fn empty() -> Self {
        LeafStats {
            n_total: 0,
            n_treated: 0,
            n_control: 0,
            mean_treated: None,
            mean_control: None,
            tau_hat: None,
            mean_y: 0.0,
            inherited: false,
        }
    }
}
