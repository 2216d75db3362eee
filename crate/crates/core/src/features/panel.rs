use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use chrono::{Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::tariff::halfhour_slot;
use crate::data::parse_number;
use crate::error::{Error, Result};

/// Inclusive calendar date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self> {
        if end < start {
            return Err(Error::invalid(format!("date range {start}..{end} is empty")));
        }
        Ok(Self { start, end })
    }

    /// Pre-trial period used for the usage covariates.
    pub fn benchmark_default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2009, 7, 14).unwrap(),
            end: NaiveDate::from_ymd_opt(2009, 12, 31).unwrap(),
        }
    }

    /// Trial period used for the outcome.
    pub fn trial_default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2010, 12, 31).unwrap(),
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

impl std::str::FromStr for DateRange {
    type Err = Error;

    /// Parses `YYYY-MM-DD..YYYY-MM-DD`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| Error::invalid(format!("expected START..END, found '{s}'")))?;
        let parse = |t: &str| {
            NaiveDate::parse_from_str(t.trim(), "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("bad date '{t}': {e}")))
        };
        Self::new(parse(a)?, parse(b)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reading {
    pub timestamp: NaiveDateTime,
    pub kwh: f64,
}

/// A run of missing half-hours between two consecutive readings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    pub after: NaiveDateTime,
    pub before: NaiveDateTime,
}

impl Gap {
    pub fn missing_halfhours(&self) -> i64 {
        (self.before - self.after).num_minutes() / 30 - 1
    }
}

/// One household's half-hourly readings, sorted by time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadPanel {
    pub household_id: String,
    readings: Vec<Reading>,
    gaps: Vec<Gap>,
}

impl LoadPanel {
    /// Sorts the readings and rejects off-grid or repeated timestamps and
    /// negative or non-finite values.
    pub fn new(household_id: impl Into<String>, mut readings: Vec<Reading>) -> Result<Self> {
        let household_id = household_id.into();
        if readings.is_empty() {
            return Err(Error::invalid(format!("household {household_id} has no readings")));
        }
        for r in &readings {
            halfhour_slot(r.timestamp)?;
            if !r.kwh.is_finite() || r.kwh < 0.0 {
                return Err(Error::invalid(format!(
                    "household {household_id}: reading {} at {} must be a non-negative number",
                    r.kwh, r.timestamp
                )));
            }
        }
        readings.sort_by_key(|r| r.timestamp);
        let step = Duration::minutes(30);
        let mut gaps = Vec::new();
        for w in readings.windows(2) {
            let (a, b) = (w[0].timestamp, w[1].timestamp);
            if a == b {
                return Err(Error::invalid(format!(
                    "household {household_id} has two readings at {a}"
                )));
            }
            if b - a > step {
                gaps.push(Gap { after: a, before: b });
            }
        }
        Ok(Self {
            household_id,
            readings,
            gaps,
        })
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn gaps(&self) -> &[Gap] {
        &self.gaps
    }

    pub fn first(&self) -> NaiveDateTime {
        self.readings[0].timestamp
    }

    pub fn last(&self) -> NaiveDateTime {
        self.readings[self.readings.len() - 1].timestamp
    }

    pub fn in_range(&self, range: DateRange) -> impl Iterator<Item = &Reading> {
        self.readings
            .iter()
            .filter(move |r| range.contains(r.timestamp.date()))
    }
}

const TIMESTAMP_FORMATS: [&str; 4] = [
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M",
];

pub fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    TIMESTAMP_FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .ok_or_else(|| format!("cannot parse '{s}' as an ISO-8601 local timestamp"))
}

fn column(headers: &csv::StringRecord, label: &Path, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| Error::MissingColumn {
            path: label.to_path_buf(),
            column: name.into(),
        })
}

/// Reads `household_id,timestamp,kwh` rows into one panel per household,
/// ordered by id.
pub fn read_readings<R: Read>(reader: R, label: &Path) -> Result<Vec<LoadPanel>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let id_col = column(&headers, label, "household_id")?;
    let ts_col = column(&headers, label, "timestamp")?;
    let kwh_col = column(&headers, label, "kwh")?;
    let mut by_id: BTreeMap<String, Vec<Reading>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |idx: usize, name: &str| -> Result<&str> {
            record.get(idx).map(str::trim).ok_or_else(|| Error::Cell {
                path: label.to_path_buf(),
                line,
                column: name.into(),
                message: "missing cell".into(),
            })
        };
        let err = |name: &str, message: String| Error::Cell {
            path: label.to_path_buf(),
            line,
            column: name.into(),
            message,
        };
        let id = cell(id_col, "household_id")?;
        if id.is_empty() {
            return Err(err("household_id", "missing value".into()));
        }
        let timestamp = parse_timestamp(cell(ts_col, "timestamp")?).map_err(|m| err("timestamp", m))?;
        let kwh = parse_number(cell(kwh_col, "kwh")?).map_err(|m| err("kwh", m))?;
        by_id
            .entry(id.to_string())
            .or_default()
            .push(Reading { timestamp, kwh });
    }
    if by_id.is_empty() {
        return Err(Error::EmptyFile(label.to_path_buf()));
    }
    by_id
        .into_iter()
        .map(|(id, readings)| LoadPanel::new(id, readings))
        .collect()
}

pub fn load_readings(path: &Path) -> Result<Vec<LoadPanel>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_readings(file, path)
}
