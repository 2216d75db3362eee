use std::collections::BTreeSet;
use std::path::Path;

use chrono::{Datelike, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SLOTS_PER_DAY: usize = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TouWindow {
    Night,
    Day,
    Peak,
}

impl TouWindow {
    pub const ALL: [TouWindow; 3] = [TouWindow::Night, TouWindow::Day, TouWindow::Peak];
}

/// Weekdays are Monday to Friday outside the holiday calendar; everything
/// else is treated like a weekend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DayType {
    Weekday,
    WeekendOrHoliday,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applies {
    Every,
    Weekdays,
    WeekendsAndHolidays,
}

impl Applies {
    fn covers(self, day: DayType) -> bool {
        match self {
            Applies::Every => true,
            Applies::Weekdays => day == DayType::Weekday,
            Applies::WeekendsAndHolidays => day == DayType::WeekendOrHoliday,
        }
    }
}

/// A clock span `[start, end)`; spans with `end <= start` wrap past midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSpan {
    pub window: TouWindow,
    pub start: NaiveTime,
    pub end: NaiveTime,
    pub days: Applies,
}

impl WindowSpan {
    fn contains_slot(&self, slot: usize) -> bool {
        let s = slot_of_time(self.start);
        let e = slot_of_time(self.end);
        if s < e {
            (s..e).contains(&slot)
        } else {
            slot >= s || slot < e
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffPrices {
    pub name: String,
    pub night: f64,
    pub day: f64,
    pub peak: f64,
}

impl TariffPrices {
    pub fn price(&self, window: TouWindow) -> f64 {
        match window {
            TouWindow::Night => self.night,
            TouWindow::Day => self.day,
            TouWindow::Peak => self.peak,
        }
    }
}

/// Window spans and per-tariff prices in cents per kWh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    #[serde(rename = "span")]
    pub spans: Vec<WindowSpan>,
    #[serde(rename = "tariff", default)]
    pub tariffs: Vec<TariffPrices>,
}

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid clock time")
}

fn prices(name: &str, night: f64, day: f64, peak: f64) -> TariffPrices {
    TariffPrices {
        name: name.into(),
        night,
        day,
        peak,
    }
}

impl TariffSchedule {
    /// The trial schedule with tariffs A to D.
    pub fn builtin() -> Self {
        let span = |window, start, end, days| WindowSpan {
            window,
            start,
            end,
            days,
        };
        Self {
            spans: vec![
                span(TouWindow::Night, hm(23, 0), hm(8, 0), Applies::Every),
                span(TouWindow::Day, hm(8, 0), hm(17, 0), Applies::Every),
                span(TouWindow::Day, hm(19, 0), hm(23, 0), Applies::Every),
                span(TouWindow::Day, hm(17, 0), hm(19, 0), Applies::WeekendsAndHolidays),
                span(TouWindow::Peak, hm(17, 0), hm(19, 0), Applies::Weekdays),
            ],
            tariffs: vec![
                prices("A", 12.00, 14.00, 20.00),
                prices("B", 11.00, 13.50, 26.00),
                prices("C", 10.00, 13.00, 32.00),
                prices("D", 9.00, 12.50, 38.00),
            ],
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let schedule: TariffSchedule = toml::from_str(s)?;
        schedule.validate()?;
        Ok(schedule)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("schedule serializes")
    }

    /// Checks that every half-hour of both day types falls in exactly one
    /// window.
    pub fn validate(&self) -> Result<()> {
        for span in &self.spans {
            for t in [span.start, span.end] {
                if !on_grid(t) {
                    return Err(Error::invalid(format!("span boundary {t} is not on the half-hour grid")));
                }
            }
        }
        for day in [DayType::Weekday, DayType::WeekendOrHoliday] {
            for slot in 0..SLOTS_PER_DAY {
                let hits = self.matching(slot, day).count();
                if hits != 1 {
                    return Err(Error::invalid(format!(
                        "half-hour {} on {day:?} is covered by {hits} windows",
                        slot_label(slot)
                    )));
                }
            }
        }
        for t in &self.tariffs {
            if [t.night, t.day, t.peak].iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::invalid(format!("tariff {} has an invalid price", t.name)));
            }
        }
        Ok(())
    }

    fn matching(&self, slot: usize, day: DayType) -> impl Iterator<Item = &WindowSpan> {
        self.spans
            .iter()
            .filter(move |s| s.days.covers(day) && s.contains_slot(slot))
    }

    pub fn window(&self, slot: usize, day: DayType) -> Result<TouWindow> {
        self.matching(slot, day)
            .next()
            .map(|s| s.window)
            .ok_or_else(|| Error::invalid(format!("no window covers {} on {day:?}", slot_label(slot))))
    }

    pub fn tariff(&self, name: &str) -> Option<&TariffPrices> {
        self.tariffs.iter().find(|t| t.name == name)
    }
}

impl Default for TariffSchedule {
    fn default() -> Self {
        Self::builtin()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HolidayCalendar {
    dates: BTreeSet<NaiveDate>,
}

impl HolidayCalendar {
    pub fn new(dates: impl IntoIterator<Item = NaiveDate>) -> Self {
        Self {
            dates: dates.into_iter().collect(),
        }
    }

    /// One ISO date per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut dates = BTreeSet::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let d = NaiveDate::parse_from_str(line, "%Y-%m-%d")
                .map_err(|e| Error::invalid(format!("holiday line {}: '{line}': {e}", i + 1)))?;
            dates.insert(d);
        }
        Ok(Self { dates })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.dates.contains(&date)
    }

    pub fn day_type(&self, date: NaiveDate) -> DayType {
        if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) || self.contains(date) {
            DayType::WeekendOrHoliday
        } else {
            DayType::Weekday
        }
    }
}

fn on_grid(t: NaiveTime) -> bool {
    t.second() == 0 && t.nanosecond() == 0 && t.minute().is_multiple_of(30)
}

pub(crate) fn slot_of_time(t: NaiveTime) -> usize {
    (t.hour() * 2 + t.minute() / 30) as usize
}

/// "HH:MM" start of a half-hour slot.
pub fn slot_label(slot: usize) -> String {
    format!("{:02}:{:02}", slot / 2, (slot % 2) * 30)
}

/// Half-hour slot index of an on-grid timestamp (which marks the start of
/// its half-hour).
pub fn halfhour_slot(ts: NaiveDateTime) -> Result<usize> {
    if !on_grid(ts.time()) {
        return Err(Error::invalid(format!("timestamp {ts} is not on the half-hour grid")));
    }
    Ok(slot_of_time(ts.time()))
}

pub fn classify_halfhour(
    ts: NaiveDateTime,
    holidays: &HolidayCalendar,
    schedule: &TariffSchedule,
) -> Result<TouWindow> {
    let slot = halfhour_slot(ts)?;
    schedule.window(slot, holidays.day_type(ts.date()))
}
