//! Smart-meter feature pipeline: tariff windows, the peak-consumption
//! outcome and household usage covariates.

mod panel;
mod tariff;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use chrono::{Datelike, Month, NaiveDate};
use serde::Serialize;

pub use panel::{load_readings, parse_timestamp, read_readings, DateRange, Gap, LoadPanel, Reading};
pub use tariff::{
    classify_halfhour, halfhour_slot, slot_label, Applies, DayType, HolidayCalendar, TariffPrices,
    TariffSchedule, TouWindow, WindowSpan, SLOTS_PER_DAY,
};

use crate::data::{encode_cell, CovariateSchema, Dataset};
use crate::error::{Error, Result};
use crate::forest::mean_var;
use crate::par;

/// Lunchtime slots, 12:00 to 14:00.
const LUNCH_SLOTS: std::ops::Range<usize> = 24..28;
const MIN_DAYS: usize = 7;

/// Usage covariates of one household, in catalogue order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRow {
    pub household_id: String,
    pub features: Vec<(String, f64)>,
}

impl FeatureRow {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn names(&self) -> Vec<&str> {
        self.features.iter().map(|(n, _)| n.as_str()).collect()
    }
}

/// Mean of the readings in Peak half-hours within `range`.
pub fn peak_outcome(
    panel: &LoadPanel,
    range: DateRange,
    holidays: &HolidayCalendar,
    schedule: &TariffSchedule,
) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for r in panel.in_range(range) {
        if classify_halfhour(r.timestamp, holidays, schedule)? == TouWindow::Peak {
            sum += r.kwh;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::invalid(format!(
            "household {} has no peak readings between {} and {}",
            panel.household_id, range.start, range.end
        )));
    }
    Ok(sum / n as f64)
}

#[derive(Default)]
struct Buckets {
    all: Vec<f64>,
    night: Vec<f64>,
    day: Vec<f64>,
    peak: Vec<f64>,
}

impl Buckets {
    fn push(&mut self, window: TouWindow, v: f64) {
        self.all.push(v);
        match window {
            TouWindow::Night => self.night.push(v),
            TouWindow::Day => self.day.push(v),
            TouWindow::Peak => self.peak.push(v),
        }
    }
}

fn month_name(m: u32) -> String {
    let month = Month::try_from(m as u8).expect("valid month");
    month.name()[..3].to_lowercase()
}

/// Calendar months touched by `range`, in chronological order, without
/// repeats.
fn months_of(range: DateRange) -> Vec<u32> {
    let mut seen = Vec::new();
    let mut d = NaiveDate::from_ymd_opt(range.start.year(), range.start.month(), 1).unwrap();
    while d <= range.end {
        if !seen.contains(&d.month()) {
            seen.push(d.month());
        }
        d = d.checked_add_months(chrono::Months::new(1)).unwrap();
    }
    seen
}

struct Sink<'a> {
    id: &'a str,
    out: Vec<(String, f64)>,
}

impl Sink<'_> {
    fn put(&mut self, name: impl Into<String>, v: f64) {
        self.out.push((name.into(), v));
    }

    fn mean_var(&mut self, stem: &str, suffix: &str, v: &[f64]) -> Result<()> {
        if v.is_empty() {
            return Err(Error::invalid(format!(
                "household {}: no readings for {stem}{suffix}",
                self.id
            )));
        }
        let (m, s2) = mean_var(v);
        self.put(format!("mean_{stem}{suffix}"), m);
        self.put(format!("var_{stem}{suffix}"), s2);
        Ok(())
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// Usage covariates over `range`: whole-period, window, weekday and weekend
/// moments, daily extremes, half-hour variability, ratios, monthly moments
/// and the 48 half-hour means.
pub fn extract_features(
    panel: &LoadPanel,
    range: DateRange,
    holidays: &HolidayCalendar,
    schedule: &TariffSchedule,
) -> Result<FeatureRow> {
    let months = months_of(range);
    let mut total = Buckets::default();
    let mut weekday = Buckets::default();
    let mut weekend = Buckets::default();
    let mut monthly: BTreeMap<u32, Buckets> = BTreeMap::new();
    let mut slots: Vec<Vec<f64>> = vec![Vec::new(); SLOTS_PER_DAY];
    let mut daily: BTreeMap<NaiveDate, (f64, f64)> = BTreeMap::new();

    for r in panel.in_range(range) {
        let date = r.timestamp.date();
        let slot = halfhour_slot(r.timestamp)?;
        let day_type = holidays.day_type(date);
        let window = schedule.window(slot, day_type)?;
        total.push(window, r.kwh);
        match day_type {
            DayType::Weekday => weekday.push(window, r.kwh),
            DayType::WeekendOrHoliday => weekend.push(window, r.kwh),
        }
        monthly.entry(date.month()).or_default().push(window, r.kwh);
        slots[slot].push(r.kwh);
        let e = daily.entry(date).or_insert((r.kwh, r.kwh));
        e.0 = e.0.max(r.kwh);
        e.1 = e.1.min(r.kwh);
    }
    if daily.len() < MIN_DAYS {
        return Err(Error::invalid(format!(
            "household {} has readings on {} days between {} and {}; at least {MIN_DAYS} are needed",
            panel.household_id,
            daily.len(),
            range.start,
            range.end
        )));
    }
    if let Some(slot) = slots.iter().position(Vec::is_empty) {
        return Err(Error::invalid(format!(
            "household {} has no readings at {}",
            panel.household_id,
            slot_label(slot)
        )));
    }

    let mut sink = Sink {
        id: &panel.household_id,
        out: Vec::new(),
    };
    let (mean_all, _) = mean_var(&total.all);
    sink.mean_var("usage", "", &total.all)?;
    sink.put("min_usage", total.all.iter().copied().fold(f64::INFINITY, f64::min));
    sink.put("max_usage", total.all.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let nonpeak: Vec<f64> = total.night.iter().chain(&total.day).copied().collect();
    sink.mean_var("peak", "", &total.peak)?;
    sink.mean_var("nonpeak", "", &nonpeak)?;
    sink.mean_var("night", "", &total.night)?;
    sink.mean_var("daytime", "", &total.day)?;

    sink.mean_var("usage", "_weekdays", &weekday.all)?;
    sink.mean_var("peak", "_weekdays", &weekday.peak)?;
    sink.mean_var("night", "_weekdays", &weekday.night)?;
    sink.mean_var("daytime", "_weekdays", &weekday.day)?;
    sink.mean_var("usage", "_weekends", &weekend.all)?;
    sink.mean_var("night", "_weekends", &weekend.night)?;
    sink.mean_var("daytime", "_weekends", &weekend.day)?;

    let days = daily.len() as f64;
    sink.put("mean_daily_max", daily.values().map(|v| v.0).sum::<f64>() / days);
    sink.put("mean_daily_min", daily.values().map(|v| v.1).sum::<f64>() / days);
    let cov_sum: f64 = slots
        .iter()
        .map(|v| {
            let (m, s2) = mean_var(v);
            ratio(s2.sqrt(), m)
        })
        .sum();
    sink.put("mean_halfhour_cov", cov_sum / SLOTS_PER_DAY as f64);
    let (mean_night, _) = mean_var(&total.night);
    let lunch: Vec<f64> = slots[LUNCH_SLOTS].iter().flatten().copied().collect();
    let (mean_lunch, _) = mean_var(&lunch);
    sink.put("ratio_night_daily", ratio(mean_night, mean_all));
    sink.put("ratio_lunch_daily", ratio(mean_lunch, mean_all));

    let empty = Buckets::default();
    for m in months {
        let b = monthly.get(&m).unwrap_or(&empty);
        let name = month_name(m);
        sink.mean_var("usage", &format!("_{name}"), &b.all)?;
        sink.mean_var("peak", &format!("_{name}"), &b.peak)?;
    }
    for (slot, v) in slots.iter().enumerate() {
        let (m, _) = mean_var(v);
        sink.put(format!("mean_hh_{}", slot_label(slot).replace(':', "")), m);
    }
    Ok(FeatureRow {
        household_id: panel.household_id.clone(),
        features: sink.out,
    })
}

/// Runs [`extract_features`] for every panel in parallel, keeping order.
pub fn extract_all(
    panels: &[LoadPanel],
    range: DateRange,
    holidays: &HolidayCalendar,
    schedule: &TariffSchedule,
) -> Result<Vec<FeatureRow>> {
    par::try_map_indexed(panels.len(), |i| {
        extract_features(&panels[i], range, holidays, schedule)
    })
}

/// Survey answers keyed by household id, encoded per the schema.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyTable {
    pub schema: CovariateSchema,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl SurveyTable {
    /// A table with no survey columns, for assembling usage-only data.
    pub fn ids_only<S: AsRef<str>>(ids: &[S]) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for id in ids {
            if rows.insert(id.as_ref().to_string(), Vec::new()).is_some() {
                return Err(Error::invalid(format!("duplicate household id {}", id.as_ref())));
            }
        }
        Ok(Self {
            schema: CovariateSchema::new(Vec::new())?,
            rows,
        })
    }
}

pub fn read_survey<R: Read>(reader: R, label: &Path, schema: &CovariateSchema) -> Result<SurveyTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: label.to_path_buf(),
                column: name.into(),
            })
    };
    let id_col = find("household_id")?;
    let cols: Vec<usize> = schema
        .entries()
        .iter()
        .map(|c| find(&c.name))
        .collect::<Result<_>>()?;
    let mut rows = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let err = |column: &str, message: String| Error::Cell {
            path: label.to_path_buf(),
            line,
            column: column.into(),
            message,
        };
        let id = record.get(id_col).map(str::trim).unwrap_or("");
        if id.is_empty() {
            return Err(err("household_id", "missing value".into()));
        }
        let mut values = Vec::with_capacity(schema.width());
        for (c, &src) in schema.entries().iter().zip(&cols) {
            let cell = record.get(src).map(str::trim).unwrap_or("");
            values.extend(encode_cell(&c.kind, cell).map_err(|m| err(&c.name, m))?);
        }
        if rows.insert(id.to_string(), values).is_some() {
            return Err(err("household_id", format!("duplicate household id {id}")));
        }
    }
    Ok(SurveyTable {
        schema: schema.clone(),
        rows,
    })
}

/// Reads `household_id,<column>` rows with a 0/1 treatment flag.
pub fn read_assignments<R: Read>(reader: R, label: &Path, column: &str) -> Result<Vec<(String, bool)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                path: label.to_path_buf(),
                column: name.into(),
            })
    };
    let id_col = find("household_id")?;
    let d_col = find(column)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record.get(id_col).map(str::trim).unwrap_or("");
        let d = match record.get(d_col).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => {
                return Err(Error::Cell {
                    path: label.to_path_buf(),
                    line,
                    column: column.into(),
                    message: format!("treatment must be 0 or 1, found '{}'", other.unwrap_or("")),
                })
            }
        };
        out.push((id.to_string(), d));
    }
    Ok(out)
}

fn keyed<T: Copy>(what: &str, pairs: &[(String, T)]) -> Result<BTreeMap<String, T>> {
    let mut map = BTreeMap::new();
    for (id, v) in pairs {
        if map.insert(id.clone(), *v).is_some() {
            return Err(Error::invalid(format!("duplicate household id {id} in {what}")));
        }
    }
    Ok(map)
}

/// Joined data with rows sorted by household id.
#[derive(Debug, Clone)]
pub struct AssembledData {
    pub household_ids: Vec<String>,
    pub data: Dataset,
}

/// Joins survey answers, usage features, outcomes and treatment flags by
/// household id. Every id must appear exactly once in every source.
pub fn assemble_dataset(
    features: &[FeatureRow],
    survey: &SurveyTable,
    outcomes: &[(String, f64)],
    treatment: &[(String, bool)],
) -> Result<AssembledData> {
    let mut feats: BTreeMap<&str, &FeatureRow> = BTreeMap::new();
    for f in features {
        if feats.insert(f.household_id.as_str(), f).is_some() {
            return Err(Error::invalid(format!(
                "duplicate household id {} in features",
                f.household_id
            )));
        }
    }
    let outcomes = keyed("outcomes", outcomes)?;
    let treatment = keyed("treatment", treatment)?;

    let sets: [BTreeSet<&str>; 4] = [
        feats.keys().copied().collect(),
        survey.rows.keys().map(String::as_str).collect(),
        outcomes.keys().map(String::as_str).collect(),
        treatment.keys().map(String::as_str).collect(),
    ];
    let union: BTreeSet<&str> = sets.iter().flatten().copied().collect();
    let missing: Vec<&str> = union
        .iter()
        .copied()
        .filter(|id| sets.iter().any(|s| !s.contains(id)))
        .collect();
    if !missing.is_empty() {
        return Err(Error::invalid(format!(
            "household ids missing from at least one source: {}",
            missing.join(", ")
        )));
    }
    if union.is_empty() {
        return Err(Error::invalid("no households to assemble"));
    }

    let names: Vec<&str> = features[0].names();
    for f in features {
        if f.names() != names {
            return Err(Error::SchemaMismatch(format!(
                "household {} has a different feature set",
                f.household_id
            )));
        }
    }
    let schema = survey
        .schema
        .extended(names.iter().map(|n| CovariateSchema::continuous(n)))?;
    let ids: Vec<String> = union.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = ids
        .iter()
        .map(|id| {
            let mut row = survey.rows[id].clone();
            row.extend(feats[id.as_str()].features.iter().map(|(_, v)| *v));
            row
        })
        .collect();
    let y = ids.iter().map(|id| outcomes[id]).collect();
    let d = ids.iter().map(|id| treatment[id]).collect();
    let data = Dataset::from_rows(schema, &rows, y, d)?;
    Ok(AssembledData {
        household_ids: ids,
        data,
    })
}
