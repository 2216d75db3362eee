//! Repeated sample-splitting inference on treatment effect heterogeneity.
//!
//! Each split halves the data into a main and an auxiliary sample. A causal
//! forest fit on the auxiliary sample gives proxy effect scores `S` on the
//! main sample, and a regression forest fit on the auxiliary untreated rows
//! gives baseline scores `B`. Weighted regressions on the main sample then
//! estimate
//!
//! * BLP: `Y ~ 1 + B + (D - p) + (D - p)(S - mean S)`, where `beta_2 != 0`
//!   signals heterogeneity captured by `S`;
//! * GATE: effects of `K` groups cut at quantiles of `S`;
//! * CLAN: means of chosen variables in the lowest and highest groups.
//!
//! Weights are `1 / (p (1 - p))`. Per-split 95% intervals are combined with
//! [`median_aggregate`] into 90% intervals.

mod aggregate;
mod ols;

pub use aggregate::{lower_median, median_aggregate, upper_median, MedianAggregate, REPORTED_LEVEL};
pub use ols::{weighted_ols, OlsFit, SPLIT_LEVEL};

use serde::{Deserialize, Serialize};

use crate::data::{mix, Dataset, SeededSampler};
use crate::error::{Error, Result};
use crate::forest::{fit_causal_forest, fit_regression_forest, mean_var, z_value, ForestParams};
use crate::par;

const SPLIT_SALT: u64 = 0x0073_706c_6974;

/// How group effects enter the GATE regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GateForm {
    /// `Y ~ 1 + B + sum_k gamma_k (D - p) 1(G_k)`: `gamma_k` is the
    /// average effect in group `k`.
    #[default]
    Interacted,
    /// `Y ~ B + sum_k gamma_k 1(G_k)` without the treatment indicator and
    /// with the intercept absorbed by the group dummies.
    GroupLevels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub num_splits: usize,
    pub forest: ForestParams,
    pub groups: usize,
    pub seed: u64,
    pub gate_form: GateForm,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            num_splits: 1000,
            forest: ForestParams::default(),
            groups: 4,
            seed: 0,
            gate_form: GateForm::Interacted,
        }
    }
}

/// Proxy and baseline scores for one main/auxiliary split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitRun {
    pub main: Vec<usize>,
    pub auxiliary: Vec<usize>,
    /// Proxy effect scores on `main`, in `main` order.
    pub s: Vec<f64>,
    /// Baseline untreated-outcome scores on `main`.
    pub b: Vec<f64>,
}

/// One coefficient (or contrast) estimated on one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitEstimate {
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl SplitEstimate {
    fn from_contrast((point, se, ci_low, ci_high): (f64, f64, f64, f64)) -> Self {
        Self { point, se, ci_low, ci_high }
    }
}

pub fn run_split(data: &Dataset, forest: &ForestParams, sampler: &SeededSampler) -> Result<SplitRun> {
    let (main, auxiliary) = sampler.split_indices(data.n())?;
    let aux = data.subset(&auxiliary);
    let controls: Vec<usize> = (0..aux.n()).filter(|&i| !aux.d()[i]).collect();
    if controls.is_empty() {
        return Err(Error::invalid("auxiliary sample contains no untreated rows"));
    }
    let seed = mix(sampler.seed, sampler.stream);
    let cf = fit_causal_forest(&aux, &ForestParams { seed: mix(seed, 1), ..forest.clone() })?;
    let rf = fit_regression_forest(
        &aux.subset(&controls),
        &ForestParams { seed: mix(seed, 2), ..forest.clone() },
    )?;
    let rows: Vec<Vec<f64>> = main.iter().map(|&i| data.row(i)).collect();
    let s = cf.predict_batch(&rows)?;
    let b = rf.predict_batch(&rows)?;
    Ok(SplitRun { main, auxiliary, s, b })
}

/// Runs `cfg.num_splits` independent splits, in split order.
pub fn run_splits(data: &Dataset, cfg: &InferenceConfig) -> Result<Vec<SplitRun>> {
    if cfg.num_splits == 0 {
        return Err(Error::invalid("at least one sample split is required"));
    }
    let key = mix(cfg.seed, SPLIT_SALT);
    par::try_map_indexed(cfg.num_splits, |r| {
        run_split(data, &cfg.forest, &SeededSampler::new(key, r as u64))
    })
}

fn has_variation(v: &[f64]) -> bool {
    v.iter().any(|&x| x != v[0])
}

struct MainSample {
    y: Vec<f64>,
    treat_dev: Vec<f64>,
    weights: Vec<f64>,
}

fn main_sample(data: &Dataset, main: &[usize]) -> Result<MainSample> {
    let mut out = MainSample {
        y: Vec::with_capacity(main.len()),
        treat_dev: Vec::with_capacity(main.len()),
        weights: Vec::with_capacity(main.len()),
    };
    for &i in main {
        let p = data.propensity_at(i);
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::invalid(format!("propensity {p} outside (0, 1)")));
        }
        out.y.push(data.y()[i]);
        out.treat_dev.push(if data.d()[i] { 1.0 } else { 0.0 } - p);
        out.weights.push(1.0 / (p * (1.0 - p)));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlpSplit {
    pub beta1: SplitEstimate,
    pub beta2: SplitEstimate,
}

/// BLP regression on the rows `main` given proxy scores `s` and baseline
/// scores `b` (both in `main` order). Scores may come from any learner.
/// A constant `b` is left out of the design since it only duplicates the
/// intercept.
pub fn blp_with_scores(data: &Dataset, main: &[usize], s: &[f64], b: &[f64]) -> Result<BlpSplit> {
    if s.len() != main.len() || b.len() != main.len() {
        return Err(Error::invalid("score vectors must match the main sample"));
    }
    let m = main_sample(data, main)?;
    let s_bar = s.iter().sum::<f64>() / s.len() as f64;
    let use_b = has_variation(b);
    let x: Vec<Vec<f64>> = (0..main.len())
        .map(|i| {
            let mut r = vec![1.0];
            if use_b {
                r.push(b[i]);
            }
            r.push(m.treat_dev[i]);
            r.push(m.treat_dev[i] * (s[i] - s_bar));
            r
        })
        .collect();
    let fit = weighted_ols(&x, &m.y, &m.weights)?;
    let k = fit.coef.len();
    let unit = |j: usize| (0..k).map(|i| if i == j { 1.0 } else { 0.0 }).collect::<Vec<_>>();
    Ok(BlpSplit {
        beta1: SplitEstimate::from_contrast(fit.contrast(&unit(k - 2))),
        beta2: SplitEstimate::from_contrast(fit.contrast(&unit(k - 1))),
    })
}

/// Group labels `0..k` by quantiles of `s`; ties are ordered by position.
pub fn group_labels(s: &[f64], k: usize) -> Vec<usize> {
    let m = s.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    let mut labels = vec![0; m];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = rank * k / m;
    }
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateSplit {
    pub gammas: Vec<SplitEstimate>,
    /// `gamma_K - gamma_1`.
    pub difference: SplitEstimate,
}

pub fn gate_with_scores(
    data: &Dataset,
    main: &[usize],
    s: &[f64],
    b: &[f64],
    k: usize,
    form: GateForm,
) -> Result<GateSplit> {
    if k < 2 {
        return Err(Error::invalid("GATE needs at least two groups"));
    }
    if s.len() != main.len() || b.len() != main.len() {
        return Err(Error::invalid("score vectors must match the main sample"));
    }
    if main.len() < k {
        return Err(Error::Degenerate("a group is empty".into()));
    }
    let m = main_sample(data, main)?;
    let labels = group_labels(s, k);
    let use_b = has_variation(b);
    let x: Vec<Vec<f64>> = (0..main.len())
        .map(|i| {
            let mut r = Vec::with_capacity(k + 2);
            if form == GateForm::Interacted {
                r.push(1.0);
            }
            if use_b {
                r.push(b[i]);
            }
            let scale = match form {
                GateForm::Interacted => m.treat_dev[i],
                GateForm::GroupLevels => 1.0,
            };
            r.extend((0..k).map(|g| if labels[i] == g { scale } else { 0.0 }));
            r
        })
        .collect();
    let fit = weighted_ols(&x, &m.y, &m.weights)?;
    let offset = fit.coef.len() - k;
    let width = fit.coef.len();
    let contrast = |pairs: &[(usize, f64)]| {
        let mut a = vec![0.0; width];
        for &(g, c) in pairs {
            a[offset + g] = c;
        }
        SplitEstimate::from_contrast(fit.contrast(&a))
    };
    Ok(GateSplit {
        gammas: (0..k).map(|g| contrast(&[(g, 1.0)])).collect(),
        difference: contrast(&[(k - 1, 1.0), (0, -1.0)]),
    })
}

/// A quantity averaged within groups by CLAN.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Functional {
    Outcome,
    /// Expanded covariate column; indicator columns give level shares.
    Column(usize),
}

impl Functional {
    /// Resolves `outcome`, a continuous variable name or a `name=level`
    /// indicator column.
    pub fn parse(data: &Dataset, name: &str) -> Result<Self> {
        if name == "outcome" {
            return Ok(Functional::Outcome);
        }
        data.schema()
            .column_index(name)
            .map(Functional::Column)
            .ok_or_else(|| Error::invalid(format!("unknown CLAN variable '{name}'")))
    }

    fn value(&self, data: &Dataset, i: usize) -> f64 {
        match self {
            Functional::Outcome => data.y()[i],
            Functional::Column(j) => data.x(i, *j),
        }
    }
}

/// A group mean or difference on one split. A zero standard error gives a
/// zero-width interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClanEstimate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClanSplit {
    /// Mean in the lowest-score group.
    pub lowest: ClanEstimate,
    /// Mean in the highest-score group.
    pub highest: ClanEstimate,
    /// `highest - lowest`.
    pub difference: ClanEstimate,
}

pub fn clan_with_scores(
    data: &Dataset,
    main: &[usize],
    s: &[f64],
    k: usize,
    functional: &Functional,
) -> Result<ClanSplit> {
    if k < 2 || main.len() < k {
        return Err(Error::Degenerate("a group is empty".into()));
    }
    let labels = group_labels(s, k);
    let values = |g: usize| -> Vec<f64> {
        main.iter()
            .zip(&labels)
            .filter(|(_, &l)| l == g)
            .map(|(&i, _)| functional.value(data, i))
            .collect()
    };
    let z = z_value(SPLIT_LEVEL)?;
    let lo = values(0);
    let hi = values(k - 1);
    let (m_lo, v_lo) = mean_var(&lo);
    let (m_hi, v_hi) = mean_var(&hi);
    let est = |point: f64, se: f64| ClanEstimate {
        point,
        ci_low: point - z * se,
        ci_high: point + z * se,
    };
    let se_lo = (v_lo / lo.len() as f64).sqrt();
    let se_hi = (v_hi / hi.len() as f64).sqrt();
    Ok(ClanSplit {
        lowest: est(m_lo, se_lo),
        highest: est(m_hi, se_hi),
        difference: est(m_hi - m_lo, (se_lo * se_lo + se_hi * se_hi).sqrt()),
    })
}

fn aggregate(estimates: &[SplitEstimate]) -> Result<MedianAggregate> {
    let points: Vec<f64> = estimates.iter().map(|e| e.point).collect();
    let lows: Vec<f64> = estimates.iter().map(|e| e.ci_low).collect();
    let highs: Vec<f64> = estimates.iter().map(|e| e.ci_high).collect();
    median_aggregate(&points, &lows, &highs)
}

fn aggregate_clan(estimates: &[ClanEstimate]) -> Result<MedianAggregate> {
    let points: Vec<f64> = estimates.iter().map(|e| e.point).collect();
    let lows: Vec<f64> = estimates.iter().map(|e| e.ci_low).collect();
    let highs: Vec<f64> = estimates.iter().map(|e| e.ci_high).collect();
    median_aggregate(&points, &lows, &highs)
}

fn require_valid<T>(valid: Vec<T>, what: &str) -> Result<Vec<T>> {
    if valid.is_empty() {
        Err(Error::Degenerate(format!("no sample split produced a valid {what} regression")))
    } else {
        Ok(valid)
    }
}

/// Keeps successful splits; rank-deficient or empty-group splits are
/// dropped, anything else is an error.
fn keep_valid<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for r in results {
        match r {
            Ok(v) => out.push(v),
            Err(Error::RankDeficient) | Err(Error::Degenerate(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlpResult {
    pub beta1: MedianAggregate,
    pub beta2: MedianAggregate,
    pub num_splits: usize,
}

pub fn blp_from_runs(data: &Dataset, runs: &[SplitRun]) -> Result<BlpResult> {
    let valid = require_valid(
        keep_valid(runs.iter().map(|r| blp_with_scores(data, &r.main, &r.s, &r.b)).collect())?,
        "BLP",
    )?;
    let b1: Vec<SplitEstimate> = valid.iter().map(|v| v.beta1).collect();
    let b2: Vec<SplitEstimate> = valid.iter().map(|v| v.beta2).collect();
    Ok(BlpResult {
        beta1: aggregate(&b1)?,
        beta2: aggregate(&b2)?,
        num_splits: runs.len(),
    })
}

pub fn blp(data: &Dataset, cfg: &InferenceConfig) -> Result<BlpResult> {
    blp_from_runs(data, &run_splits(data, cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateResult {
    pub gammas: Vec<MedianAggregate>,
    /// `gamma_K - gamma_1`.
    pub difference: MedianAggregate,
    pub num_splits: usize,
}

pub fn gate_from_runs(data: &Dataset, runs: &[SplitRun], k: usize, form: GateForm) -> Result<GateResult> {
    let valid = require_valid(
        keep_valid(
            runs.iter()
                .map(|r| gate_with_scores(data, &r.main, &r.s, &r.b, k, form))
                .collect(),
        )?,
        "GATE",
    )?;
    let gammas = (0..k)
        .map(|g| aggregate(&valid.iter().map(|v| v.gammas[g]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let difference = aggregate(&valid.iter().map(|v| v.difference).collect::<Vec<_>>())?;
    Ok(GateResult {
        gammas,
        difference,
        num_splits: runs.len(),
    })
}

pub fn gate(data: &Dataset, cfg: &InferenceConfig) -> Result<GateResult> {
    gate_from_runs(data, &run_splits(data, cfg)?, cfg.groups, cfg.gate_form)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClanResult {
    pub name: String,
    pub lowest: MedianAggregate,
    pub highest: MedianAggregate,
    pub difference: MedianAggregate,
}

pub fn clan_from_runs(
    data: &Dataset,
    runs: &[SplitRun],
    functionals: &[(String, Functional)],
    k: usize,
) -> Result<Vec<ClanResult>> {
    functionals
        .iter()
        .map(|(name, f)| {
            let valid = require_valid(
                keep_valid(
                    runs.iter()
                        .map(|r| clan_with_scores(data, &r.main, &r.s, k, f))
                        .collect(),
                )?,
                "CLAN",
            )?;
            let pick = |sel: fn(&ClanSplit) -> ClanEstimate| {
                aggregate_clan(&valid.iter().map(sel).collect::<Vec<_>>())
            };
            Ok(ClanResult {
                name: name.clone(),
                lowest: pick(|c| c.lowest)?,
                highest: pick(|c| c.highest)?,
                difference: pick(|c| c.difference)?,
            })
        })
        .collect()
}

pub fn clan(
    data: &Dataset,
    functionals: &[(String, Functional)],
    cfg: &InferenceConfig,
) -> Result<Vec<ClanResult>> {
    clan_from_runs(data, &run_splits(data, cfg)?, functionals, cfg.groups)
}
