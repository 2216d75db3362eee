use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forest::z_value;

/// Singular-value ratio below which a weighted design counts as rank
/// deficient.
const RANK_TOLERANCE: f64 = 1e-10;

pub const SPLIT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    /// HC1 heteroskedasticity-robust covariance of `coef`.
    pub cov: Vec<Vec<f64>>,
    pub se: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
}

impl OlsFit {
    /// Point, standard error and 95% bounds of `a'coef`.
    pub fn contrast(&self, a: &[f64]) -> (f64, f64, f64, f64) {
        let point: f64 = a.iter().zip(&self.coef).map(|(x, b)| x * b).sum();
        let mut var = 0.0;
        for (i, ai) in a.iter().enumerate() {
            for (j, aj) in a.iter().enumerate() {
                var += ai * aj * self.cov[i][j];
            }
        }
        let se = var.max(0.0).sqrt();
        let z = z_value(SPLIT_LEVEL).expect("constant level is valid");
        (point, se, point - z * se, point + z * se)
    }
}

/// Weighted least squares with HC1 robust standard errors and 95% normal
/// intervals. `x` holds design rows.
pub fn weighted_ols(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<OlsFit> {
    let n = x.len();
    if n == 0 || y.len() != n || w.len() != n {
        return Err(Error::invalid("design, outcome and weights must have equal non-zero length"));
    }
    let k = x[0].len();
    if x.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("design rows have unequal length"));
    }
    if w.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid("weights must be positive and finite"));
    }
    if n <= k {
        return Err(Error::RankDeficient);
    }
    let xm = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let sw = DVector::from_iterator(n, w.iter().map(|v| v.sqrt()));
    let mut xw = xm.clone();
    for (i, mut row) in xw.row_iter_mut().enumerate() {
        row *= sw[i];
    }
    let sv = xw.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax.is_nan() || smax <= 0.0 || sv.min() / smax < RANK_TOLERANCE {
        return Err(Error::RankDeficient);
    }
    let yw = DVector::from_iterator(n, y.iter().zip(sw.iter()).map(|(a, b)| a * b));
    let xtwx = xw.transpose() * &xw;
    let inv = xtwx.try_inverse().ok_or(Error::RankDeficient)?;
    let beta = &inv * (xw.transpose() * yw);

    let resid = DVector::from_iterator(n, y.iter().copied()) - &xm * &beta;
    let mut meat = DMatrix::<f64>::zeros(k, k);
    for i in 0..n {
        let s = w[i] * resid[i];
        let xi = xm.row(i).transpose();
        meat += (&xi * xi.transpose()) * (s * s);
    }
    let scale = n as f64 / (n - k) as f64;
    let cov = &inv * meat * &inv * scale;

    let z = z_value(SPLIT_LEVEL)?;
    let coef: Vec<f64> = beta.iter().copied().collect();
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    Ok(OlsFit {
        ci_low: coef.iter().zip(&se).map(|(b, s)| b - z * s).collect(),
        ci_high: coef.iter().zip(&se).map(|(b, s)| b + z * s).collect(),
        cov: (0..k).map(|i| (0..k).map(|j| cov[(i, j)]).collect()).collect(),
        coef,
        se,
    })
}
