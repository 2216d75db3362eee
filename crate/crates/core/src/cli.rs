//! Batch command-line front end.
//!
//! Every command writes its tables as CSV into `--out-dir` together with a
//! `run-manifest.json` echoing the resolved settings.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{load_csv, read_covariate_rows, write_csv, CovariateSchema, Dataset, Propensity};
use crate::error::{Error, Result};
use crate::features::{
    assemble_dataset, extract_all, load_readings, peak_outcome, read_assignments, read_survey,
    DateRange, HolidayCalendar, SurveyTable, TariffSchedule,
};
use crate::forest::{fit_causal_forest, CausalForest, ForestParams, DEFAULT_LEVEL};
use crate::importance::{permutation_pvalues, PermutationTestConfig};
use crate::inference::{
    blp_from_runs, clan_from_runs, gate_from_runs, run_splits, Functional, GateForm,
    InferenceConfig, MedianAggregate,
};
use crate::par;
use crate::simulation::{run_benchmark, BenchmarkConfig, BenchmarkRecord};

pub const MANIFEST_FILE: &str = "run-manifest.json";
const FOREST_FILE: &str = "forest.json";

#[derive(Debug, Parser)]
#[command(name = "hetforest", version, about = "Causal forests for heterogeneous treatment effects")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub settings: Settings,
    /// TOML file with default settings; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Options shared by all commands. Each may also come from `--config`.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trees: Option<usize>,
    #[arg(long, global = true)]
    pub sample_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub mtry_fraction: Option<f64>,
    #[arg(long, global = true)]
    pub min_node: Option<usize>,
    /// Minimum treated and control rows per causal leaf.
    #[arg(long, global = true)]
    pub min_treat_control: Option<usize>,
    #[arg(long, global = true)]
    pub bag_size: Option<usize>,
    #[arg(long, global = true)]
    pub splits: Option<usize>,
    #[arg(long, global = true)]
    pub permutations: Option<usize>,
    #[arg(long, global = true)]
    pub level: Option<f64>,
    #[arg(long, global = true)]
    pub groups: Option<usize>,
    /// Known treatment probability; defaults to the treated share.
    #[arg(long, global = true)]
    pub propensity: Option<f64>,
    /// `interacted` or `group-levels`.
    #[arg(long, global = true)]
    pub gate_form: Option<String>,
}

impl Settings {
    fn or(self, other: Settings) -> Settings {
        Settings {
            seed: self.seed.or(other.seed),
            workers: self.workers.or(other.workers),
            out_dir: self.out_dir.or(other.out_dir),
            trees: self.trees.or(other.trees),
            sample_fraction: self.sample_fraction.or(other.sample_fraction),
            mtry_fraction: self.mtry_fraction.or(other.mtry_fraction),
            min_node: self.min_node.or(other.min_node),
            min_treat_control: self.min_treat_control.or(other.min_treat_control),
            bag_size: self.bag_size.or(other.bag_size),
            splits: self.splits.or(other.splits),
            permutations: self.permutations.or(other.permutations),
            level: self.level.or(other.level),
            groups: self.groups.or(other.groups),
            propensity: self.propensity.or(other.propensity),
            gate_form: self.gate_form.or(other.gate_form),
        }
    }

    fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::invalid("a seed is required (--seed or `seed` in the config file)"))
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or(1)
    }

    fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn forest(&self, default_trees: usize) -> Result<ForestParams> {
        self.forest_from(ForestParams {
            num_trees: default_trees,
            ..ForestParams::default()
        })
    }

    fn forest_from(&self, base: ForestParams) -> Result<ForestParams> {
        let mut p = ForestParams {
            seed: self.seed()?,
            num_trees: self.trees.unwrap_or(base.num_trees),
            ..base
        };
        if let Some(v) = self.sample_fraction {
            p.sample_fraction = v;
        }
        if let Some(v) = self.mtry_fraction {
            p.mtry_fraction = v;
        }
        if let Some(v) = self.min_node {
            p.tree_params.min_leaf = v;
        }
        if let Some(v) = self.min_treat_control {
            p.tree_params.min_treat_control_per_leaf = v;
        }
        if let Some(v) = self.bag_size {
            p.bag_size = v;
        }
        p.validate()?;
        Ok(p)
    }

    fn gate_form(&self) -> Result<GateForm> {
        match self.gate_form.as_deref() {
            None | Some("interacted") => Ok(GateForm::Interacted),
            Some("group-levels") => Ok(GateForm::GroupLevels),
            Some(other) => Err(Error::invalid(format!(
                "unknown GATE form '{other}' (expected interacted or group-levels)"
            ))),
        }
    }

    fn inference(&self) -> Result<InferenceConfig> {
        let forest = self.forest(ForestParams::default().num_trees)?;
        let cfg = InferenceConfig {
            num_splits: self.splits.unwrap_or(1000),
            groups: self.groups.unwrap_or(4),
            seed: self.seed()?,
            gate_form: self.gate_form()?,
            forest,
        };
        if cfg.num_splits == 0 {
            return Err(Error::invalid("at least one split is needed"));
        }
        if cfg.groups < 2 {
            return Err(Error::invalid("at least two groups are needed"));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a causal forest and save it.
    Fit(DataArgs),
    /// Predict effects with intervals from a saved forest.
    Predict(PredictArgs),
    /// Variable importance with permutation p-values.
    Importance(ImportanceArgs),
    /// Best linear predictor of the effect from forest scores.
    Blp(DataArgs),
    /// Group average effects by proxy-score quantile.
    Gate(DataArgs),
    /// Covariate means in the least and most affected groups.
    Clan(ClanArgs),
    /// Run the simulation benchmark.
    Simulate(SimulateArgs),
    /// Build an analysis dataset from meter readings.
    Features(FeatureArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Covariate schema (TOML).
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long, default_value = "y")]
    pub outcome: String,
    #[arg(long, default_value = "d")]
    pub treatment: String,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PredictArgs {
    #[arg(long)]
    pub forest: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Schema of `--data`; must equal the forest's if given.
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Report (count + 1) / (R + 1).
    #[arg(long)]
    pub smoothed: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ClanArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Comma-separated column names, or `outcome`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub variables: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub designs: Vec<u8>,
    #[arg(long, default_value_t = 20)]
    pub iterations: usize,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FeatureArgs {
    /// Readings CSV: household_id, timestamp, kwh.
    #[arg(long)]
    pub readings: PathBuf,
    /// Allocation CSV: household_id and a 0/1 treatment column.
    #[arg(long)]
    pub assignments: PathBuf,
    #[arg(long, default_value = "treatment")]
    pub assignment_column: String,
    #[arg(long, requires = "survey_schema")]
    pub survey: Option<PathBuf>,
    #[arg(long)]
    pub survey_schema: Option<PathBuf>,
    /// One ISO date per line.
    #[arg(long)]
    pub holidays: Option<PathBuf>,
    /// Tariff schedule (TOML); the built-in trial schedule otherwise.
    #[arg(long)]
    pub tariff: Option<PathBuf>,
    /// Covariate period, START..END.
    #[arg(long, default_value = "2009-07-14..2009-12-31")]
    pub benchmark: String,
    /// Outcome period, START..END.
    #[arg(long, default_value = "2010-01-01..2010-12-31")]
    pub trial: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    workers: usize,
    settings: &'a Settings,
    arguments: serde_json::Value,
    outputs: Vec<String>,
    started_at: String,
    wall_time_seconds: f64,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.class().exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<Settings>(&text)?
        }
        None => Settings::default(),
    };
    let settings = cli.settings.clone().or(file);
    let seed = settings.seed()?;
    let workers = settings.workers();
    let out_dir = settings.out_dir();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let started_at = chrono::Utc::now().to_rfc3339();
    let clock = Instant::now();
    let (name, arguments) = describe(&cli.command)?;
    let outputs = par::with_workers(workers, || dispatch(&cli.command, &settings, &out_dir))??;
    let manifest = Manifest {
        command: name,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        workers,
        settings: &settings,
        arguments,
        outputs,
        started_at,
        wall_time_seconds: clock.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &manifest)?;
    Ok(())
}

fn describe(cmd: &Command) -> Result<(&'static str, serde_json::Value)> {
    Ok(match cmd {
        Command::Fit(a) => ("fit", serde_json::to_value(a)?),
        Command::Predict(a) => ("predict", serde_json::to_value(a)?),
        Command::Importance(a) => ("importance", serde_json::to_value(a)?),
        Command::Blp(a) => ("blp", serde_json::to_value(a)?),
        Command::Gate(a) => ("gate", serde_json::to_value(a)?),
        Command::Clan(a) => ("clan", serde_json::to_value(a)?),
        Command::Simulate(a) => ("simulate", serde_json::to_value(a)?),
        Command::Features(a) => ("features", serde_json::to_value(a)?),
    })
}

fn dispatch(cmd: &Command, s: &Settings, out: &Path) -> Result<Vec<String>> {
    match cmd {
        Command::Fit(a) => cmd_fit(a, s, out),
        Command::Predict(a) => cmd_predict(a, s, out),
        Command::Importance(a) => cmd_importance(a, s, out),
        Command::Blp(a) => cmd_blp(a, s, out),
        Command::Gate(a) => cmd_gate(a, s, out),
        Command::Clan(a) => cmd_clan(a, s, out),
        Command::Simulate(a) => cmd_simulate(a, s, out),
        Command::Features(a) => cmd_features(a, s, out),
    }
}

fn load_data(a: &DataArgs, s: &Settings) -> Result<Dataset> {
    let schema = CovariateSchema::load(&a.schema)?;
    let data = load_csv(&a.data, &schema, &a.outcome, &a.treatment)?;
    match s.propensity {
        Some(p) => data.with_propensity(Propensity::Constant(p)),
        None => Ok(data),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    fn write(&self, out: &Path, name: &str) -> Result<String> {
        let path = out.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(name.to_string())
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

const AGGREGATE_HEADER: [&str; 7] = [
    "estimate",
    "ci_low",
    "ci_high",
    "split_level",
    "reported_level",
    "valid_splits",
    "splits",
];

fn aggregate_cells(a: &MedianAggregate, splits: usize) -> Vec<String> {
    vec![
        num(a.point),
        num(a.ci_low),
        num(a.ci_high),
        num(a.split_level),
        num(a.reported_level),
        a.num_valid_splits.to_string(),
        splits.to_string(),
    ]
}

fn with_label(label: &str, rest: &[&str]) -> Vec<String> {
    std::iter::once(label).chain(rest.iter().copied()).map(String::from).collect()
}

fn cmd_fit(a: &DataArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let data = load_data(a, s)?;
    let forest = fit_causal_forest(&data, &s.forest(ForestParams::default().num_trees)?)?;
    let path = out.join(FOREST_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    forest.save(BufWriter::new(file))?;
    Ok(vec![FOREST_FILE.into()])
}

fn cmd_predict(a: &PredictArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let file = File::open(&a.forest).map_err(|e| Error::io(&a.forest, e))?;
    let forest = CausalForest::load(std::io::BufReader::new(file))?;
    if let Some(path) = &a.schema {
        let given = CovariateSchema::load(path)?;
        if given != forest.schema {
            return Err(Error::SchemaMismatch(format!(
                "{} does not match the schema the forest was trained on",
                path.display()
            )));
        }
    }
    let file = File::open(&a.data).map_err(|e| Error::io(&a.data, e))?;
    let rows = read_covariate_rows(file, &a.data, &forest.schema)?;
    let preds = forest.predict_ite_batch(&rows, s.level.unwrap_or(DEFAULT_LEVEL))?;
    let mut t = Table::new(&["row", "tau_hat", "variance", "ci_low", "ci_high"]);
    for (i, p) in preds.iter().enumerate() {
        t.push(vec![
            i.to_string(),
            num(p.tau_hat),
            num(p.variance),
            num(p.ci_low),
            num(p.ci_high),
        ]);
    }
    Ok(vec![t.write(out, "predictions.csv")?])
}

fn cmd_importance(a: &ImportanceArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let data = load_data(&a.data, s)?;
    let config = PermutationTestConfig {
        num_permutations: s.permutations.unwrap_or(100),
        forest: s.forest(ForestParams::default().num_trees)?,
        seed: s.seed()?,
        smoothed: a.smoothed,
    };
    let outcome = permutation_pvalues(&data, &config)?;
    let with_p = config.num_permutations > 0;
    let mut header = vec!["variable", "importance", "scaled"];
    if with_p {
        header.push("p_value");
    }
    let mut t = Table::new(&header);
    for v in &outcome.report.variables {
        let mut row = vec![v.name.clone(), num(v.raw), num(v.scaled)];
        if with_p {
            row.push(opt(v.p_value));
        }
        t.push(row);
    }
    let mut written = vec![t.write(out, "importance.csv")?];
    if with_p {
        let mut r = Table::new(&["replicate", "variable", "importance"]);
        for (k, rep) in outcome.replicates.iter().enumerate() {
            for (v, imp) in outcome.report.variables.iter().zip(rep) {
                r.push(vec![k.to_string(), v.name.clone(), num(*imp)]);
            }
        }
        written.push(r.write(out, "importance-replicates.csv")?);
    }
    Ok(written)
}

fn cmd_blp(a: &DataArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let data = load_data(a, s)?;
    let cfg = s.inference()?;
    let res = blp_from_runs(&data, &run_splits(&data, &cfg)?)?;
    let mut t = Table::new(&with_label("coefficient", &AGGREGATE_HEADER));
    for (name, agg) in [("beta1", &res.beta1), ("beta2", &res.beta2)] {
        let mut row = vec![name.to_string()];
        row.extend(aggregate_cells(agg, res.num_splits));
        t.push(row);
    }
    Ok(vec![t.write(out, "blp.csv")?])
}

fn cmd_gate(a: &DataArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let data = load_data(a, s)?;
    let cfg = s.inference()?;
    let res = gate_from_runs(&data, &run_splits(&data, &cfg)?, cfg.groups, cfg.gate_form)?;
    let mut t = Table::new(&with_label("coefficient", &AGGREGATE_HEADER));
    for (k, g) in res.gammas.iter().enumerate() {
        let mut row = vec![format!("gamma{}", k + 1)];
        row.extend(aggregate_cells(g, res.num_splits));
        t.push(row);
    }
    let mut row = vec![format!("gamma{}-gamma1", cfg.groups)];
    row.extend(aggregate_cells(&res.difference, res.num_splits));
    t.push(row);
    Ok(vec![t.write(out, "gate.csv")?])
}

fn cmd_clan(a: &ClanArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let data = load_data(&a.data, s)?;
    let cfg = s.inference()?;
    let functionals = a
        .variables
        .iter()
        .map(|name| Functional::parse(&data, name).map(|f| (name.clone(), f)))
        .collect::<Result<Vec<_>>>()?;
    let runs = run_splits(&data, &cfg)?;
    let res = clan_from_runs(&data, &runs, &functionals, cfg.groups)?;
    let mut header = vec!["variable", "group"];
    header.extend(AGGREGATE_HEADER);
    let mut t = Table::new(&header);
    for r in &res {
        for (group, agg) in [
            ("lowest", &r.lowest),
            ("highest", &r.highest),
            ("highest-lowest", &r.difference),
        ] {
            let mut row = vec![r.name.clone(), group.to_string()];
            row.extend(aggregate_cells(agg, runs.len()));
            t.push(row);
        }
    }
    Ok(vec![t.write(out, "clan.csv")?])
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn cmd_simulate(a: &SimulateArgs, s: &Settings, out: &Path) -> Result<Vec<String>> {
    let cfg = BenchmarkConfig {
        designs: a.designs.clone(),
        iterations: a.iterations,
        permutations: s.permutations.unwrap_or(100),
        n: a.n,
        forest: s.forest_from(BenchmarkConfig::default().forest)?,
        seed: s.seed()?,
    };
    let records = run_benchmark(&cfg)?;
    let mut t = Table::new(&["design", "iteration", "variable", "importance", "p_value"]);
    for r in &records {
        t.push(vec![
            r.design.to_string(),
            r.iteration.to_string(),
            r.variable.clone(),
            num(r.importance),
            opt(r.p_value),
        ]);
    }
    let mut summary = Table::new(&[
        "design",
        "variable",
        "median_importance",
        "median_p_value",
        "share_p_below_0.05",
    ]);
    let mut keys: Vec<(u8, &str)> = records.iter().map(|r| (r.design, r.variable.as_str())).collect();
    keys.dedup();
    for (design, variable) in keys {
        let group: Vec<&BenchmarkRecord> = records
            .iter()
            .filter(|r| r.design == design && r.variable == variable)
            .collect();
        let imp = median(group.iter().map(|r| r.importance).collect());
        let ps: Vec<f64> = group.iter().filter_map(|r| r.p_value).collect();
        let (mp, share) = if ps.is_empty() {
            (String::new(), String::new())
        } else {
            let below = ps.iter().filter(|&&p| p < 0.05).count() as f64 / ps.len() as f64;
            (num(median(ps)), num(below))
        };
        summary.push(vec![design.to_string(), variable.to_string(), num(imp), mp, share]);
    }
    Ok(vec![
        t.write(out, "benchmark.csv")?,
        summary.write(out, "benchmark-summary.csv")?,
    ])
}

fn cmd_features(a: &FeatureArgs, _s: &Settings, out: &Path) -> Result<Vec<String>> {
    let benchmark: DateRange = a.benchmark.parse()?;
    let trial: DateRange = a.trial.parse()?;
    let holidays = match &a.holidays {
        Some(p) => HolidayCalendar::load(p)?,
        None => HolidayCalendar::default(),
    };
    let schedule = match &a.tariff {
        Some(p) => TariffSchedule::load(p)?,
        None => TariffSchedule::builtin(),
    };
    let panels = load_readings(&a.readings)?;
    let features = extract_all(&panels, benchmark, &holidays, &schedule)?;
    let outcomes = par::try_map_indexed(panels.len(), |i| {
        peak_outcome(&panels[i], trial, &holidays, &schedule)
            .map(|v| (panels[i].household_id.clone(), v))
    })?;
    let file = File::open(&a.assignments).map_err(|e| Error::io(&a.assignments, e))?;
    let treatment = read_assignments(file, &a.assignments, &a.assignment_column)?;
    let survey = match (&a.survey, &a.survey_schema) {
        (Some(path), Some(schema)) => {
            let schema = CovariateSchema::load(schema)?;
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            read_survey(file, path, &schema)?
        }
        _ => SurveyTable::ids_only(&panels.iter().map(|p| p.household_id.as_str()).collect::<Vec<_>>())?,
    };
    let assembled = assemble_dataset(&features, &survey, &outcomes, &treatment)?;

    let mut header = vec!["household_id".to_string()];
    header.extend(features[0].names().iter().map(|n| n.to_string()));
    let mut ft = Table::new(&header);
    for f in &features {
        let mut row = vec![f.household_id.clone()];
        row.extend(f.features.iter().map(|(_, v)| num(*v)));
        ft.push(row);
    }
    let mut ids = Table::new(&["row", "household_id"]);
    for (i, id) in assembled.household_ids.iter().enumerate() {
        ids.push(vec![i.to_string(), id.clone()]);
    }
    let mut gaps = Table::new(&["household_id", "after", "before", "missing_halfhours"]);
    for p in &panels {
        for g in p.gaps() {
            gaps.push(vec![
                p.household_id.clone(),
                g.after.to_string(),
                g.before.to_string(),
                g.missing_halfhours().to_string(),
            ]);
        }
    }

    let data_path = out.join("dataset.csv");
    let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
    write_csv(&assembled.data, BufWriter::new(file), "peak_kwh", "treated")?;
    let schema_path = out.join("schema.toml");
    std::fs::write(&schema_path, assembled.data.schema().to_toml_string())
        .map_err(|e| Error::io(&schema_path, e))?;
    Ok(vec![
        "dataset.csv".into(),
        "schema.toml".into(),
        ft.write(out, "features.csv")?,
        ids.write(out, "households.csv")?,
        gaps.write(out, "gaps.csv")?,
    ])
}
