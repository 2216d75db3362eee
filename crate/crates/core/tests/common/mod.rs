//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike, Weekday};
use hetforest::tree::{HonestRows, TreeNode};
use hetforest::Dataset;

/// Sum of squared deviations from the mean, two-pass.
fn sse(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum()
}

fn distinct_sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup();
    s
}

fn midpoint(a: f64, b: f64) -> f64 {
    let t = 0.5 * (a + b);
    if t >= b {
        a
    } else {
        t
    }
}

/// Candidate (feature, threshold) pairs in feature-then-threshold order.
fn candidates(data: &Dataset, rows: &[usize]) -> Vec<(usize, f64)> {
    let mut out = Vec::new();
    for f in 0..data.width() {
        let vals: Vec<f64> = rows.iter().map(|&i| data.x(i, f)).collect();
        let d = distinct_sorted(&vals);
        for w in d.windows(2) {
            out.push((f, midpoint(w[0], w[1])));
        }
    }
    out
}

/// Regression root split by direct evaluation of the within-child sum of
/// squares at every candidate threshold. Ties (to 1e-10 relative) keep the
/// earlier candidate.
pub fn brute_force_regression_split(data: &Dataset, rows: &[usize], min_leaf: usize) -> Option<(usize, f64)> {
    let y = data.y();
    let parent = sse(&rows.iter().map(|&i| y[i]).collect::<Vec<_>>());
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, t) in candidates(data, rows) {
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.x(i, f) <= t);
        if l.len() < min_leaf || r.len() < min_leaf {
            continue;
        }
        let cost = sse(&l.iter().map(|&i| y[i]).collect::<Vec<_>>())
            + sse(&r.iter().map(|&i| y[i]).collect::<Vec<_>>());
        let better = match best {
            None => true,
            Some((_, _, c)) => c - cost > 1e-10 * c.abs().max(cost.abs()).max(parent * 1e-6),
        };
        if better {
            best = Some((f, t, cost));
        }
    }
    best.filter(|b| parent - b.2 > 1e-10 * parent.abs()).map(|b| (b.0, b.1))
}

fn effect_term(data: &Dataset, rows: &[usize]) -> Option<(f64, usize, usize)> {
    let (mut st, mut nt, mut sc, mut nc) = (0.0, 0, 0.0, 0);
    for &i in rows {
        if data.d()[i] {
            st += data.y()[i];
            nt += 1;
        } else {
            sc += data.y()[i];
            nc += 1;
        }
    }
    if nt == 0 || nc == 0 {
        return None;
    }
    let tau = st / nt as f64 - sc / nc as f64;
    Some((rows.len() as f64 * tau * tau, nt, nc))
}

/// Causal root split maximising `n_L tau_L^2 + n_R tau_R^2` subject to each
/// child holding `k` treated and `k` control rows and `min_leaf` rows.
pub fn brute_force_causal_split(
    data: &Dataset,
    rows: &[usize],
    min_leaf: usize,
    k: usize,
) -> Option<(usize, f64)> {
    let (parent, pt, pc) = effect_term(data, rows)?;
    if pt < 2 * k || pc < 2 * k || rows.len() < 2 * min_leaf {
        return None;
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for (f, t) in candidates(data, rows) {
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| data.x(i, f) <= t);
        if l.len() < min_leaf || r.len() < min_leaf {
            continue;
        }
        let (Some((sl, lt, lc)), Some((sr, rt, rc))) = (effect_term(data, &l), effect_term(data, &r)) else {
            continue;
        };
        if lt < k || lc < k || rt < k || rc < k {
            continue;
        }
        let score = sl + sr;
        let better = match best {
            None => true,
            Some((_, _, b)) => score - b > 1e-10 * score.abs().max(b.abs()),
        };
        if better {
            best = Some((f, t, score));
        }
    }
    best.filter(|b| b.2 - parent > 1e-10 * b.2.abs().max(parent.abs()))
        .map(|b| (b.0, b.1))
}

/// Walks the fitted structure with the estimation rows and checks each
/// leaf's effect against a direct difference in means, falling back to
/// the nearest ancestor holding both groups (the root falls back to all of
/// the tree's rows). Returns the number of leaves checked.
pub fn check_leaf_effects(data: &Dataset, root: &TreeNode, rows: &HonestRows, tol: f64) -> usize {
    let all: Vec<usize> = rows
        .structure
        .iter()
        .chain(&rows.estimation)
        .copied()
        .collect();
    let root_tau = diff_in_means(data, &rows.estimation).or_else(|| diff_in_means(data, &all));
    walk(data, root, &rows.estimation, root_tau, tol)
}

fn diff_in_means(data: &Dataset, rows: &[usize]) -> Option<f64> {
    let t: Vec<f64> = rows.iter().filter(|&&i| data.d()[i]).map(|&i| data.y()[i]).collect();
    let c: Vec<f64> = rows.iter().filter(|&&i| !data.d()[i]).map(|&i| data.y()[i]).collect();
    if t.is_empty() || c.is_empty() {
        return None;
    }
    Some(t.iter().sum::<f64>() / t.len() as f64 - c.iter().sum::<f64>() / c.len() as f64)
}

fn walk(data: &Dataset, node: &TreeNode, rows: &[usize], inherited: Option<f64>, tol: f64) -> usize {
    let own = diff_in_means(data, rows).or(inherited);
    match node {
        TreeNode::Leaf { stats, .. } => {
            let expected = own.expect("root effect is defined");
            let got = stats.tau_hat.expect("leaf effect present");
            assert!(
                (got - expected).abs() <= tol * expected.abs().max(1.0),
                "leaf effect {got} vs oracle {expected}"
            );
            assert_eq!(stats.n_total, rows.len());
            1
        }
        TreeNode::Split { rule, left, right, .. } => {
            let (l, r): (Vec<usize>, Vec<usize>) =
                rows.iter().partition(|&&i| data.x(i, rule.feature) <= rule.threshold);
            walk(data, left, &l, own, tol) + walk(data, right, &r, own, tol)
        }
    }
}

/// The tariff table in hours: 23-08 night, 17-19 peak on non-holiday
/// weekdays, everything else day.
pub fn table_window(ts: NaiveDateTime, holidays: &[NaiveDate]) -> &'static str {
    let weekday = !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun) && !holidays.contains(&ts.date());
    match ts.hour() {
        23 | 0..=7 => "night",
        17 | 18 if weekday => "peak",
        _ => "day",
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn var(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

const MONTHS: [&str; 12] = [
    "jan", "feb", "mar", "apr", "may", "jun", "jul", "aug", "sep", "oct", "nov", "dec",
];

/// Every usage covariate tabulated straight from the readings. All
/// readings are taken to fall in the period of interest.
pub fn tabulate_features(readings: &[(NaiveDateTime, f64)], holidays: &[NaiveDate]) -> BTreeMap<String, f64> {
    let pick = |f: &dyn Fn(&NaiveDateTime) -> bool| -> Vec<f64> {
        readings.iter().filter(|(t, _)| f(t)).map(|(_, v)| *v).collect()
    };
    let is_weekday = |t: &NaiveDateTime| {
        !matches!(t.weekday(), Weekday::Sat | Weekday::Sun) && !holidays.contains(&t.date())
    };
    let w = |t: &NaiveDateTime| table_window(*t, holidays);
    let mut out = BTreeMap::new();
    let put_mv = |out: &mut BTreeMap<String, f64>, name: &str, v: Vec<f64>| {
        out.insert(format!("mean_{name}"), mean(&v));
        out.insert(format!("var_{name}"), var(&v));
    };
    let all = pick(&|_| true);
    put_mv(&mut out, "usage", all.clone());
    out.insert("min_usage".into(), all.iter().copied().fold(f64::MAX, f64::min));
    out.insert("max_usage".into(), all.iter().copied().fold(f64::MIN, f64::max));
    put_mv(&mut out, "peak", pick(&|t| w(t) == "peak"));
    put_mv(&mut out, "nonpeak", pick(&|t| w(t) != "peak"));
    put_mv(&mut out, "night", pick(&|t| w(t) == "night"));
    put_mv(&mut out, "daytime", pick(&|t| w(t) == "day"));
    put_mv(&mut out, "usage_weekdays", pick(&|t| is_weekday(t)));
    put_mv(&mut out, "peak_weekdays", pick(&|t| is_weekday(t) && w(t) == "peak"));
    put_mv(&mut out, "night_weekdays", pick(&|t| is_weekday(t) && w(t) == "night"));
    put_mv(&mut out, "daytime_weekdays", pick(&|t| is_weekday(t) && w(t) == "day"));
    put_mv(&mut out, "usage_weekends", pick(&|t| !is_weekday(t)));
    put_mv(&mut out, "night_weekends", pick(&|t| !is_weekday(t) && w(t) == "night"));
    put_mv(&mut out, "daytime_weekends", pick(&|t| !is_weekday(t) && w(t) == "day"));

    let mut days: BTreeMap<NaiveDate, Vec<f64>> = BTreeMap::new();
    for (t, v) in readings {
        days.entry(t.date()).or_default().push(*v);
    }
    let maxes: Vec<f64> = days.values().map(|v| v.iter().copied().fold(f64::MIN, f64::max)).collect();
    let mins: Vec<f64> = days.values().map(|v| v.iter().copied().fold(f64::MAX, f64::min)).collect();
    out.insert("mean_daily_max".into(), mean(&maxes));
    out.insert("mean_daily_min".into(), mean(&mins));

    let mut covs = Vec::new();
    for h in 0..24 {
        for m in [0, 30] {
            let v = pick(&|t| t.hour() == h && t.minute() == m);
            out.insert(format!("mean_hh_{h:02}{m:02}"), mean(&v));
            let mu = mean(&v);
            covs.push(if mu == 0.0 { 0.0 } else { var(&v).sqrt() / mu });
        }
    }
    out.insert("mean_halfhour_cov".into(), mean(&covs));
    let overall = mean(&all);
    let ratio = |a: f64| if overall == 0.0 { 0.0 } else { a / overall };
    out.insert("ratio_night_daily".into(), ratio(mean(&pick(&|t| w(t) == "night"))));
    out.insert("ratio_lunch_daily".into(), ratio(mean(&pick(&|t| (12..14).contains(&t.hour())))));

    let mut months: Vec<u32> = readings.iter().map(|(t, _)| t.month()).collect();
    months.dedup();
    for m in months {
        let name = MONTHS[m as usize - 1];
        put_mv(&mut out, &format!("usage_{name}"), pick(&|t| t.month() == m));
        put_mv(&mut out, &format!("peak_{name}"), pick(&|t| t.month() == m && w(t) == "peak"));
    }
    out
}
