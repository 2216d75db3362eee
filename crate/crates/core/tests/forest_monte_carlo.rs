use hetforest::forest::{fit_causal_forest, fit_regression_forest, ForestParams};
use hetforest::simulation::{simulate, Design, SimDesign};
use hetforest::{CovariateSchema, Dataset, SeededSampler};
use rand::Rng;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn regression_forest_fits_a_linear_signal() {
    let mut rng = SeededSampler::new(41, 0).rng();
    let n = 2000;
    let schema = CovariateSchema::new(
        ["x1", "x2", "x3"].iter().map(|name| CovariateSchema::continuous(name)).collect(),
    )
    .unwrap();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let d = vec![false; n];
    let data = Dataset::from_rows(schema, &rows, y.clone(), d).unwrap();
    let params = ForestParams {
        num_trees: 100,
        seed: 5,
        ..ForestParams::default()
    };
    let forest = fit_regression_forest(&data, &params).unwrap();
    let fitted = forest.predict_batch(&rows).unwrap();
    let mean = y.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let ss_res: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    assert!(r2 >= 0.8, "R^2 = {r2}");
}

#[test]
fn more_trees_steady_the_variance_estimate() {
    let (data, _) = simulate(&SimDesign { design: Design::Heterogeneous, n: 600, seed: 8 }).unwrap();
    let (grid, _) = simulate(&SimDesign { design: Design::Heterogeneous, n: 40, seed: 9 }).unwrap();
    let grid = grid.rows();
    // per grid row, relative spread of the variance estimate across forest seeds
    let spread = |num_trees: usize| {
        let runs: Vec<Vec<f64>> = (0..8u64)
            .map(|seed| {
                let params = ForestParams {
                    num_trees,
                    seed,
                    ..ForestParams::default()
                };
                let forest = fit_causal_forest(&data, &params).unwrap();
                forest.predict_ite_batch(&grid, 0.9).unwrap().iter().map(|p| p.variance).collect()
            })
            .collect();
        let per_row = (0..grid.len()).map(|r| {
            let v: Vec<f64> = runs.iter().map(|run| run[r]).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt();
            sd / m
        });
        median(per_row.collect())
    };
    let few = spread(100);
    let many = spread(400);
    assert!(many < 0.75 * few, "relative spread {many} with 400 trees vs {few} with 100");
}
