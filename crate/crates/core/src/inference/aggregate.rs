use serde::Serialize;

use crate::error::{Error, Result};

/// Level of each per-split interval and of the aggregated interval.
pub const REPORTED_LEVEL: f64 = 0.90;

/// Median summary over sample splits.
///
/// The upper bound is the lower median of the per-split upper bounds, the
/// lower bound is the upper median of the per-split lower bounds and the
/// point is the midpoint of the lower and upper medians of the per-split
/// estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianAggregate {
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub split_level: f64,
    pub reported_level: f64,
    pub num_valid_splits: usize,
}

impl MedianAggregate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }

    pub fn excludes(&self, value: f64) -> bool {
        !self.covers(value)
    }
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

pub fn lower_median(v: &[f64]) -> f64 {
    let s = sorted(v);
    s[(s.len() - 1) / 2]
}

pub fn upper_median(v: &[f64]) -> f64 {
    let s = sorted(v);
    s[s.len() / 2]
}

pub fn median_aggregate(points: &[f64], lows: &[f64], highs: &[f64]) -> Result<MedianAggregate> {
    if points.is_empty() {
        return Err(Error::invalid("median aggregation over zero splits"));
    }
    if lows.len() != points.len() || highs.len() != points.len() {
        return Err(Error::invalid("aggregation inputs differ in length"));
    }
    Ok(MedianAggregate {
        point: 0.5 * (lower_median(points) + upper_median(points)),
        ci_low: upper_median(lows),
        ci_high: lower_median(highs),
        split_level: super::ols::SPLIT_LEVEL,
        reported_level: REPORTED_LEVEL,
        num_valid_splits: points.len(),
    })
}
