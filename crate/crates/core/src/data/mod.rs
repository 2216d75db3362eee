//! Typed tabular data: covariate schema, the [`Dataset`] container, CSV
//! ingestion and seeded sampling.

mod csv_io;
mod sampler;
mod schema;

pub use csv_io::{load_csv, read_covariate_rows, read_csv, write_csv};
pub(crate) use csv_io::{encode_cell, parse_number};
pub use sampler::SeededSampler;
pub(crate) use sampler::{mix, subsample_size};
pub use schema::{Covariate, CovariateKind, CovariateSchema};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Treatment assignment probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum Propensity {
    /// Treated share of the rows the dataset currently holds.
    #[default]
    SampleFraction,
    Constant(f64),
    PerRow(Vec<f64>),
}

/// Covariates (after categorical expansion), outcome and binary treatment.
///
/// Immutable once built. The covariate matrix is stored column-major since
/// split search scans one feature at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: CovariateSchema,
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<bool>,
    propensity: Propensity,
}

impl Dataset {
    /// Builds a dataset from expanded covariate rows.
    pub fn from_rows(
        schema: CovariateSchema,
        rows: &[Vec<f64>],
        y: Vec<f64>,
        d: Vec<bool>,
    ) -> Result<Self> {
        let p = schema.width();
        let mut x = vec![0.0; rows.len() * p];
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::WidthMismatch {
                    expected: p,
                    got: r.len(),
                });
            }
            for (j, v) in r.iter().enumerate() {
                x[j * rows.len() + i] = *v;
            }
        }
        Self::from_column_major(schema, x, y, d)
    }

    /// Builds a dataset from expanded covariate columns.
    pub fn from_columns(
        schema: CovariateSchema,
        columns: Vec<Vec<f64>>,
        y: Vec<f64>,
        d: Vec<bool>,
    ) -> Result<Self> {
        if columns.len() != schema.width() {
            return Err(Error::WidthMismatch {
                expected: schema.width(),
                got: columns.len(),
            });
        }
        let n = y.len();
        if let Some(c) = columns.iter().find(|c| c.len() != n) {
            return Err(Error::invalid(format!(
                "column length {} differs from outcome length {n}",
                c.len()
            )));
        }
        Self::from_column_major(schema, columns.concat(), y, d)
    }

    fn from_column_major(
        schema: CovariateSchema,
        x: Vec<f64>,
        y: Vec<f64>,
        d: Vec<bool>,
    ) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset needs at least one row"));
        }
        if d.len() != n {
            return Err(Error::invalid(format!(
                "treatment length {} differs from outcome length {n}",
                d.len()
            )));
        }
        if x.len() != n * schema.width() {
            return Err(Error::invalid("covariate matrix has the wrong size"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("outcome in row {i} is not finite")));
        }
        if let Some(k) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "covariate column {} row {} is not finite",
                k / n,
                k % n
            )));
        }
        let data = Self {
            schema,
            n,
            x,
            y,
            d,
            propensity: Propensity::SampleFraction,
        };
        data.check_indicators()?;
        Ok(data)
    }

    fn check_indicators(&self) -> Result<()> {
        for (var, c) in self.schema.entries().iter().enumerate() {
            if !matches!(c.kind, CovariateKind::Categorical { .. }) {
                continue;
            }
            let cols = self.schema.columns_of(var);
            for i in 0..self.n {
                let mut sum = 0.0;
                for j in cols.clone() {
                    let v = self.x(i, j);
                    if v != 0.0 && v != 1.0 {
                        return Err(Error::invalid(format!(
                            "indicator of '{}' in row {i} is {v}, expected 0 or 1",
                            c.name
                        )));
                    }
                    sum += v;
                }
                if sum != 1.0 {
                    return Err(Error::invalid(format!(
                        "indicators of '{}' in row {i} do not sum to 1",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn with_propensity(mut self, propensity: Propensity) -> Result<Self> {
        match &propensity {
            Propensity::SampleFraction => {}
            Propensity::Constant(p) => check_probability(*p)?,
            Propensity::PerRow(v) => {
                if v.len() != self.n {
                    return Err(Error::invalid("per-row propensity has the wrong length"));
                }
                v.iter().try_for_each(|p| check_probability(*p))?;
            }
        }
        self.propensity = propensity;
        Ok(self)
    }

    /// Same covariates and treatment with a replacement outcome vector.
    pub fn with_outcome(&self, y: Vec<f64>) -> Result<Self> {
        if y.len() != self.n {
            return Err(Error::invalid("replacement outcome has the wrong length"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("replacement outcome is not finite"));
        }
        Ok(Self { y, ..self.clone() })
    }

    pub fn schema(&self) -> &CovariateSchema {
        &self.schema
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn width(&self) -> usize {
        self.schema.width()
    }

    #[inline]
    pub fn x(&self, row: usize, col: usize) -> f64 {
        self.x[col * self.n + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        &self.x[col * self.n..(col + 1) * self.n]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.width()).map(|j| self.x(i, j)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i)).collect()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn d(&self) -> &[bool] {
        &self.d
    }

    pub fn num_treated(&self) -> usize {
        self.d.iter().filter(|&&t| t).count()
    }

    pub fn treated_fraction(&self) -> f64 {
        self.num_treated() as f64 / self.n as f64
    }

    pub fn propensity(&self) -> &Propensity {
        &self.propensity
    }

    pub fn propensity_at(&self, i: usize) -> f64 {
        match &self.propensity {
            Propensity::SampleFraction => self.treated_fraction(),
            Propensity::Constant(p) => *p,
            Propensity::PerRow(v) => v[i],
        }
    }

    /// Rows `idx` in the given order. Per-row propensities follow their rows.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let p = self.width();
        let m = idx.len();
        let mut x = Vec::with_capacity(m * p);
        for j in 0..p {
            let col = self.column(j);
            x.extend(idx.iter().map(|&i| col[i]));
        }
        let propensity = match &self.propensity {
            Propensity::PerRow(v) => Propensity::PerRow(idx.iter().map(|&i| v[i]).collect()),
            other => other.clone(),
        };
        Dataset {
            schema: self.schema.clone(),
            n: m,
            x,
            y: idx.iter().map(|&i| self.y[i]).collect(),
            d: idx.iter().map(|&i| self.d[i]).collect(),
            propensity,
        }
    }
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("propensity {p} outside (0, 1)")))
    }
}

/// Random disjoint halves of sizes `ceil(n/2)` and `floor(n/2)`, row order
/// preserved within each half.
pub fn split_half(data: &Dataset, sampler: &SeededSampler) -> Result<(Dataset, Dataset)> {
    let (a, b) = sampler.split_indices(data.n())?;
    Ok((data.subset(&a), data.subset(&b)))
}

/// `floor(fraction * n)` distinct row indices drawn without replacement.
pub fn subsample(data: &Dataset, fraction: f64, sampler: &SeededSampler) -> Result<Vec<usize>> {
    sampler.subsample_indices(data.n(), fraction)
}
