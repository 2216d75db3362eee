use std::fs::File;
use std::path::Path;

use hetforest::cli::{run, MANIFEST_FILE};
use hetforest::data::write_csv;
use hetforest::simulation::{simulate, Design, SimDesign};
use hetforest::{CovariateSchema, Dataset};

fn hetforest(args: &[&str]) -> i32 {
    run(std::iter::once("hetforest").chain(args.iter().copied()))
}

fn write_design(dir: &Path, n: usize, seed: u64) -> Dataset {
    let (data, _) = simulate(&SimDesign { design: Design::Heterogeneous, n, seed }).unwrap();
    write_csv(&data, File::create(dir.join("data.csv")).unwrap(), "y", "d").unwrap();
    std::fs::write(dir.join("schema.toml"), data.schema().to_toml_string()).unwrap();
    data
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn s(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

#[test]
fn fit_then_predict_gives_one_row_per_observation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 120, 1);
    let out = dir.join("out");
    let data = s(&dir.join("data.csv"));
    let schema = s(&dir.join("schema.toml"));
    let common = ["--seed", "3", "--out-dir", &s(&out)];

    let mut fit = vec!["fit", "--data", &data, "--schema", &schema, "--trees", "10"];
    fit.extend(common);
    assert_eq!(hetforest(&fit), 0);
    assert!(out.join(MANIFEST_FILE).exists());

    let forest = s(&out.join("forest.json"));
    let mut predict = vec!["predict", "--forest", &forest, "--data", &data, "--schema", &schema];
    predict.extend(common);
    assert_eq!(hetforest(&predict), 0);
    let (header, rows) = read_table(&out.join("predictions.csv"));
    assert_eq!(header, ["row", "tau_hat", "variance", "ci_low", "ci_high"]);
    assert_eq!(rows.len(), 120);
    for r in &rows {
        let v: Vec<f64> = r[1..].iter().map(|c| c.parse().unwrap()).collect();
        assert!(v[1] > 0.0 && v[2] <= v[0] && v[0] <= v[3]);
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["command"], "predict");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["outputs"][0], "predictions.csv");
}

#[test]
fn predict_with_other_schema_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 80, 2);
    let out = s(&dir.join("out"));
    let data = s(&dir.join("data.csv"));
    let schema = s(&dir.join("schema.toml"));
    assert_eq!(
        hetforest(&["fit", "--seed", "1", "--out-dir", &out, "--data", &data, "--schema", &schema, "--trees", "10"]),
        0
    );
    let other = dir.join("other.toml");
    let renamed = CovariateSchema::new(vec![CovariateSchema::continuous("Z1")]).unwrap();
    std::fs::write(&other, renamed.to_toml_string()).unwrap();
    let forest = s(&dir.join("out").join("forest.json"));
    let code = hetforest(&["predict", "--seed", "1", "--out-dir", &out, "--forest", &forest, "--data", &data, "--schema", &s(&other)]);
    assert_eq!(code, 2);
}

#[test]
fn missing_seed_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write_design(tmp.path(), 50, 3);
    let code = hetforest(&[
        "fit",
        "--out-dir",
        &s(&tmp.path().join("out")),
        "--data",
        &s(&tmp.path().join("data.csv")),
        "--schema",
        &s(&tmp.path().join("schema.toml")),
    ]);
    assert_eq!(code, 2);
    assert!(!tmp.path().join("out").join("forest.json").exists());
}

#[test]
fn missing_input_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    write_design(tmp.path(), 50, 3);
    let code = hetforest(&[
        "fit",
        "--seed",
        "1",
        "--out-dir",
        &s(&tmp.path().join("out")),
        "--data",
        &s(&tmp.path().join("nowhere.csv")),
        "--schema",
        &s(&tmp.path().join("schema.toml")),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 80, 4);
    let out = dir.join("out");
    let config = dir.join("run.toml");
    std::fs::write(&config, format!("seed = 9\ntrees = 30\nout-dir = '{}'\n", s(&out))).unwrap();
    let code = hetforest(&[
        "fit",
        "--config",
        &s(&config),
        "--trees",
        "20",
        "--data",
        &s(&dir.join("data.csv")),
        "--schema",
        &s(&dir.join("schema.toml")),
    ]);
    assert_eq!(code, 0);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join(MANIFEST_FILE)).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["settings"]["trees"], 20);
    let forest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("forest.json")).unwrap()).unwrap();
    assert_eq!(forest["trees"].as_array().unwrap().len(), 20);
}

#[test]
fn malformed_settings_are_validation_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 80, 5);
    let data = s(&dir.join("data.csv"));
    let schema = s(&dir.join("schema.toml"));
    let out = s(&dir.join("out"));

    let config = dir.join("bad.toml");
    std::fs::write(&config, "seed = 1\nweights = 'inverse'\n").unwrap();
    assert_eq!(hetforest(&["blp", "--config", &s(&config), "--out-dir", &out, "--data", &data, "--schema", &schema]), 2);

    for extra in [["--propensity", "1.5"], ["--gate-form", "stacked"], ["--splits", "0"], ["--groups", "1"]] {
        let mut args = vec!["gate", "--seed", "1", "--out-dir", &out, "--data", &data, "--schema", &schema, "--trees", "10"];
        args.extend(extra);
        assert_eq!(hetforest(&args), 2, "{extra:?}");
    }
    assert_eq!(hetforest(&["fit", "--seed", "1", "--workers", "0", "--out-dir", &out, "--data", &data, "--schema", &schema]), 2);
}

#[test]
fn single_splitting_variable_is_scaled_to_100_and_zero_permutations_drop_p_values() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let schema = CovariateSchema::new(vec![
        CovariateSchema::continuous("a"),
        CovariateSchema::continuous("b"),
        CovariateSchema::continuous("c"),
    ])
    .unwrap();
    let n = 200;
    let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, i as f64, 2.0]).collect();
    let d: Vec<bool> = (0..n).map(|i| i % 2 == 0).collect();
    let y: Vec<f64> = (0..n).map(|i| if i >= n / 2 && d[i] { 3.0 } else { 0.0 }).collect();
    let data = Dataset::from_rows(schema, &rows, y, d).unwrap();
    write_csv(&data, File::create(dir.join("data.csv")).unwrap(), "y", "d").unwrap();
    std::fs::write(dir.join("schema.toml"), data.schema().to_toml_string()).unwrap();
    let out = dir.join("out");
    let code = hetforest(&[
        "importance",
        "--seed",
        "2",
        "--out-dir",
        &s(&out),
        "--trees",
        "20",
        "--permutations",
        "0",
        "--data",
        &s(&dir.join("data.csv")),
        "--schema",
        &s(&dir.join("schema.toml")),
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_table(&out.join("importance.csv"));
    assert_eq!(header, ["variable", "importance", "scaled"]);
    let scaled: Vec<(String, f64)> = rows.iter().map(|r| (r[0].clone(), r[2].parse().unwrap())).collect();
    assert_eq!(scaled, [("a".into(), 0.0), ("b".into(), 100.0), ("c".into(), 0.0)]);
    assert!(!out.join("importance-replicates.csv").exists());
}

#[test]
fn importance_with_permutations_reports_p_values_and_replicates() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 150, 6);
    let out = dir.join("out");
    let code = hetforest(&[
        "importance",
        "--seed",
        "2",
        "--out-dir",
        &s(&out),
        "--trees",
        "10",
        "--permutations",
        "4",
        "--data",
        &s(&dir.join("data.csv")),
        "--schema",
        &s(&dir.join("schema.toml")),
    ]);
    assert_eq!(code, 0);
    let (header, rows) = read_table(&out.join("importance.csv"));
    assert_eq!(header, ["variable", "importance", "scaled", "p_value"]);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let p: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&p) && (p * 4.0).fract() == 0.0);
    }
    let (_, reps) = read_table(&out.join("importance-replicates.csv"));
    assert_eq!(reps.len(), 4 * 5);
}

#[test]
fn inference_tables_have_their_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_design(dir, 200, 7);
    let data = s(&dir.join("data.csv"));
    let schema = s(&dir.join("schema.toml"));
    let out = dir.join("out");
    let base = ["--seed", "5", "--trees", "10", "--splits", "3", "--data", &data, "--schema", &schema];
    let out_s = s(&out);

    let mut blp = vec!["blp", "--out-dir", &out_s];
    blp.extend(base);
    assert_eq!(hetforest(&blp), 0);
    let (header, rows) = read_table(&out.join("blp.csv"));
    assert_eq!(header[..4], ["coefficient", "estimate", "ci_low", "ci_high"]);
    assert_eq!(rows.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["beta1", "beta2"]);

    let mut gate = vec!["gate", "--out-dir", &out_s, "--groups", "3", "--gate-form", "group-levels"];
    gate.extend(base);
    assert_eq!(hetforest(&gate), 0);
    let (_, rows) = read_table(&out.join("gate.csv"));
    assert_eq!(rows.len(), 4);

    let mut clan = vec!["clan", "--out-dir", &out_s, "--variables", "X1,X2=1"];
    clan.extend(base);
    assert_eq!(hetforest(&clan), 0);
    let (_, rows) = read_table(&out.join("clan.csv"));
    assert!(rows.iter().any(|r| r.contains(&"X2=1".to_string())));

    let mut bad = vec!["clan", "--out-dir", &out_s, "--variables", "nope"];
    bad.extend(base);
    assert_eq!(hetforest(&bad), 2);
}
