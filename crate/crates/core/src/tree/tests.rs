use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::*;
use crate::data::{CovariateSchema, Dataset, SeededSampler};

fn continuous(p: usize) -> CovariateSchema {
    CovariateSchema::new(
        (0..p)
            .map(|j| CovariateSchema::continuous(&format!("x{j}")))
            .collect(),
    )
    .unwrap()
}

fn params(min_leaf: usize, k: usize, honest: bool) -> TreeParams {
    TreeParams {
        min_leaf,
        min_treat_control_per_leaf: k,
        honest,
        max_depth: None,
    }
}

fn sampler() -> SeededSampler {
    SeededSampler::new(42, 0)
}

#[test]
fn constant_outcome_gives_single_leaf() {
    let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
    let data = Dataset::from_rows(continuous(1), &rows, vec![3.25; 20], vec![false; 20]).unwrap();
    let tree = fit_regression_tree(&data, &params(1, 1, false), &[0], &sampler()).unwrap();
    assert!(tree.root.is_leaf());
    assert_eq!(tree.predict(&[100.0], Target::Outcome).unwrap(), 3.25);
}

#[test]
fn four_point_split() {
    let rows: Vec<Vec<f64>> = (1..=4).map(|i| vec![i as f64]).collect();
    let data = Dataset::from_rows(
        continuous(1),
        &rows,
        vec![0.0, 0.0, 10.0, 10.0],
        vec![false; 4],
    )
    .unwrap();
    let tree = fit_regression_tree(&data, &params(1, 1, false), &[0], &sampler()).unwrap();
    let TreeNode::Split { rule, left, right, .. } = &tree.root else {
        panic!("expected a split");
    };
    assert_eq!(rule.feature, 0);
    assert!(rule.threshold > 2.0 && rule.threshold < 3.0);
    assert!(left.is_leaf() && right.is_leaf());
    assert_eq!(tree.predict(&[1.0], Target::Outcome).unwrap(), 0.0);
    assert_eq!(tree.predict(&[4.0], Target::Outcome).unwrap(), 10.0);
    // boundary rows go left
    assert_eq!(tree.predict(&[rule.threshold], Target::Outcome).unwrap(), 0.0);
}

#[test]
fn width_mismatch_is_an_error() {
    let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 0.0]).collect();
    let data = Dataset::from_rows(continuous(2), &rows, vec![1.0; 4], vec![false; 4]).unwrap();
    let tree = fit_regression_tree(&data, &params(1, 1, false), &[0, 1], &sampler()).unwrap();
    assert!(matches!(
        tree.predict(&[1.0], Target::Outcome),
        Err(Error::WidthMismatch { expected: 2, got: 1 })
    ));
}

#[test]
fn regression_preconditions() {
    let data = Dataset::from_rows(continuous(1), &[vec![0.0]], vec![1.0], vec![false]).unwrap();
    assert!(fit_regression_tree(&data, &params(1, 1, false), &[0], &sampler()).is_err());
    let rows: Vec<Vec<f64>> = vec![vec![1.0]; 10];
    let same = Dataset::from_rows(continuous(1), &rows, (0..10).map(f64::from).collect(), vec![false; 10]).unwrap();
    let tree = fit_regression_tree(&same, &params(1, 1, false), &[0], &sampler()).unwrap();
    assert!(tree.root.is_leaf(), "identical rows cannot be split");
}

fn binary_effect_data(n: usize, seed: u64) -> Dataset {
    let mut rng = SeededSampler::new(seed, 0).rng();
    let noise = Normal::new(0.0, 0.1).unwrap();
    let schema = CovariateSchema::new(vec![
        CovariateSchema::continuous("z"),
        CovariateSchema::continuous("b"),
    ])
    .unwrap();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut d = Vec::new();
    for _ in 0..n {
        let z: f64 = rng.random();
        let b = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let t = rng.random_bool(0.5);
        let tau = if b == 1.0 { 1.0 } else { -1.0 };
        y.push(if t { tau / 2.0 } else { -tau / 2.0 } + noise.sample(&mut rng));
        rows.push(vec![z, b]);
        d.push(t);
    }
    Dataset::from_rows(schema, &rows, y, d).unwrap()
}

#[test]
fn causal_tree_finds_binary_modifier() {
    let data = binary_effect_data(400, 7);
    let p = params(5, 10, true);
    let tree = fit_causal_tree(&data, &p, &[0, 1], &sampler()).unwrap();
    let TreeNode::Split { rule, .. } = &tree.root else {
        panic!("expected a root split");
    };
    assert_eq!(rule.feature, 1);
    assert!(rule.threshold == 0.5);
    for leaf in tree.leaves() {
        let tau = leaf.tau_hat.unwrap();
        assert!((tau.abs() - 1.0).abs() < 0.15, "leaf effect {tau}");
    }
    assert!((tree.predict(&[0.3, 1.0], Target::Effect).unwrap() - 1.0).abs() < 0.15);
    assert!((tree.predict(&[0.3, 0.0], Target::Effect).unwrap() + 1.0).abs() < 0.15);
}

#[test]
fn depth_zero_adaptive_tree_is_difference_in_means() {
    let data = binary_effect_data(101, 3);
    let p = TreeParams {
        max_depth: Some(0),
        ..params(5, 1, false)
    };
    let tree = fit_causal_tree(&data, &p, &[0, 1], &sampler()).unwrap();
    assert!(tree.root.is_leaf());
    let (mut st, mut nt, mut sc, mut nc) = (0.0, 0.0, 0.0, 0.0);
    for (y, &t) in data.y().iter().zip(data.d()) {
        if t {
            st += y;
            nt += 1.0;
        } else {
            sc += y;
            nc += 1.0;
        }
    }
    let expected = st / nt - sc / nc;
    let got = tree.predict(&[0.0, 0.0], Target::Effect).unwrap();
    assert!((got - expected).abs() < 1e-12);
}

#[test]
fn null_effect_leaves_average_near_zero() {
    let mut rng = SeededSampler::new(77, 0).rng();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let n = 600;
    let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
    let y: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
    let d: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let data = Dataset::from_rows(continuous(2), &rows, y, d).unwrap();
    let tree = fit_causal_tree(&data, &params(5, 10, true), &[0, 1], &sampler()).unwrap();
    let leaves = tree.leaves();
    let mean_tau = leaves.iter().map(|l| l.tau_hat.unwrap()).sum::<f64>() / leaves.len() as f64;
    let var_sum: f64 = leaves
        .iter()
        .map(|l| 1.0 / l.n_treated as f64 + 1.0 / l.n_control as f64)
        .sum();
    let se = var_sum.sqrt() / leaves.len() as f64;
    assert!(mean_tau.abs() < 3.0 * se, "{mean_tau} vs {se}");
}

#[test]
fn leaves_partition_estimation_rows() {
    let data = binary_effect_data(300, 9);
    let tree = fit_causal_tree(&data, &params(5, 3, true), &[0, 1], &sampler()).unwrap();
    let total: usize = tree.leaves().iter().map(|l| l.n_total).sum();
    assert_eq!(total, tree.rows.estimation.len());
    assert_eq!(tree.rows.structure.len() + tree.rows.estimation.len(), 300);
    for l in tree.leaves() {
        assert_eq!(l.n_treated + l.n_control, l.n_total);
    }
}

#[test]
fn training_rows_predict_their_leaf_mean() {
    let data = binary_effect_data(120, 5);
    let tree = fit_regression_tree(&data, &params(3, 1, false), &[0, 1], &sampler()).unwrap();
    let rows = data.rows();
    // Re-route every training row and tabulate leaf means independently.
    let mut groups: std::collections::HashMap<u64, (f64, usize)> = Default::default();
    let mut ids = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let id = tree.leaf(r).unwrap() as *const LeafStats as u64;
        let e = groups.entry(id).or_default();
        e.0 += data.y()[i];
        e.1 += 1;
        ids.push(id);
    }
    for (r, id) in rows.iter().zip(ids) {
        let (s, c) = groups[&id];
        assert!((tree.predict(r, Target::Outcome).unwrap() - s / c as f64).abs() < 1e-12);
    }
}

#[test]
fn accepted_splits_strictly_improve() {
    let data = binary_effect_data(400, 21);
    let tree = fit_causal_tree(&data, &params(5, 5, true), &[0, 1], &sampler()).unwrap();
    fn walk(node: &TreeNode) {
        if let TreeNode::Split { gain, left, right, .. } = node {
            assert!(*gain > 0.0);
            walk(left);
            walk(right);
        }
    }
    walk(&tree.root);
}

#[test]
fn estimation_leaf_without_both_groups_inherits() {
    // Structure rows split cleanly on x; estimation rows are arranged so the
    // right leaf only contains treated rows.
    let schema = continuous(1);
    let rows: Vec<Vec<f64>> = vec![
        vec![0.0], vec![0.0], vec![1.0], vec![1.0], // structure
        vec![0.0], vec![0.0], vec![1.0], vec![1.0], // estimation
    ];
    let y = vec![0.0, 1.0, 5.0, 9.0, 0.0, 2.0, 7.0, 8.0];
    let d = vec![false, true, false, true, false, true, true, true];
    let data = Dataset::from_rows(schema, &rows, y, d).unwrap();
    let p = params(2, 1, false);
    let spec = GrowSpec::new(TreeKind::Causal, &p, &[0], None, 1).unwrap();
    let mut tree = grow_tree(&data, &[0, 1, 2, 3], &spec, &sampler()).unwrap();
    assert!(!tree.root.is_leaf());
    // Re-estimate on the second block only.
    let mut root = tree.root.clone();
    super::grow::tests_support::reestimate(&mut root, &[4, 5, 6, 7], &data);
    tree.root = root;
    let right = tree.leaf(&[1.0]).unwrap();
    assert!(right.inherited);
    assert_eq!(right.n_control, 0);
    // root effect over estimation rows: mean(2,7,8) - mean(0) = 17/3
    assert!((right.tau_hat.unwrap() - 17.0 / 3.0).abs() < 1e-12);
    let left = tree.leaf(&[0.0]).unwrap();
    assert!(!left.inherited);
    assert_eq!(left.tau_hat, Some(2.0));
}

#[test]
fn mtry_draws_depend_only_on_node_key() {
    let p = TreeParams::default();
    let spec = GrowSpec::new(TreeKind::Causal, &p, &(0..10).collect::<Vec<_>>(), Some(3), 10).unwrap();
    let a = spec.node_candidates(5, 77);
    assert_eq!(a.len(), 3);
    assert_eq!(a, spec.node_candidates(5, 77));
    let draws: std::collections::HashSet<Vec<usize>> =
        (0..50).map(|k| spec.node_candidates(5, k)).collect();
    assert!(draws.len() > 10);
}

#[test]
fn serialized_tree_round_trips() {
    let data = binary_effect_data(200, 4);
    let tree = fit_causal_tree(&data, &params(5, 3, true), &[0, 1], &sampler()).unwrap();
    let json = serde_json::to_string(&tree).unwrap();
    let back: Tree = serde_json::from_str(&json).unwrap();
    assert_eq!(back.root, tree.root);
    assert_eq!(back.structure_hash(), tree.structure_hash());
}
