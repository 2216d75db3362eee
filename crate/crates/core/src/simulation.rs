//! Synthetic randomized-trial designs.
//!
//! Covariates: `X1 ~ N(0,1)` and categoricals `X2..X5` with 2, 4, 10 and 20
//! equiprobable levels, coded `0..k-1` wherever they enter the outcome
//! equation. Treatment is a fair coin per row and
//!
//! ```text
//! Y = eta(X) + (2T - 1) * kappa(X) / 2 + eps,   eps ~ N(0, 1)
//! ```
//!
//! so the individual effect is `kappa(X)`. Design 1 has `eta = kappa = 0`,
//! design 2 has `eta = 0, kappa = X2`, design 3 has `eta = X1/2 + X2,
//! kappa = X2`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{mix, CovariateSchema, Dataset, SeededSampler};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::importance::{permutation_pvalues, PermutationTestConfig};
use crate::par;
use crate::tree::TreeParams;

pub const CATEGORY_COUNTS: [usize; 4] = [2, 4, 10, 20];
pub const VARIABLES: [&str; 5] = ["X1", "X2", "X3", "X4", "X5"];

/// Linear outcome template: coefficients on `[1, X1, X2, X3, X4, X5]`
/// with categoricals at their numeric codes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDgp {
    pub eta: [f64; 6],
    pub kappa: [f64; 6],
}

impl LinearDgp {
    pub fn null() -> Self {
        Self {
            eta: [0.0; 6],
            kappa: [0.0; 6],
        }
    }

    /// Constant effect `c` for every row.
    pub fn homogeneous(c: f64) -> Self {
        Self {
            eta: [0.0; 6],
            kappa: [c, 0.0, 0.0, 0.0, 0.0, 0.0],
        }
    }

    fn eval(coef: &[f64; 6], z: &[f64; 6]) -> f64 {
        coef.iter().zip(z).map(|(a, b)| a * b).sum()
    }

    /// Population mean of `kappa`.
    pub fn ate(&self) -> f64 {
        let means = [
            1.0,
            0.0,
            (CATEGORY_COUNTS[0] - 1) as f64 / 2.0,
            (CATEGORY_COUNTS[1] - 1) as f64 / 2.0,
            (CATEGORY_COUNTS[2] - 1) as f64 / 2.0,
            (CATEGORY_COUNTS[3] - 1) as f64 / 2.0,
        ];
        Self::eval(&self.kappa, &means)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Design {
    /// Outcome independent of everything.
    Null,
    /// Effect equal to X2, no main effects.
    Heterogeneous,
    /// Effect equal to X2 with main effects X1/2 + X2.
    Shifted,
    Linear(LinearDgp),
}

impl Design {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Design::Null),
            2 => Ok(Design::Heterogeneous),
            3 => Ok(Design::Shifted),
            _ => Err(Error::invalid(format!("unknown design {id}, expected 1, 2 or 3"))),
        }
    }

    pub fn dgp(&self) -> LinearDgp {
        match self {
            Design::Null => LinearDgp::null(),
            Design::Heterogeneous => LinearDgp {
                eta: [0.0; 6],
                kappa: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            },
            Design::Shifted => LinearDgp {
                eta: [0.0, 0.5, 1.0, 0.0, 0.0, 0.0],
                kappa: [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            },
            Design::Linear(l) => *l,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub design: Design,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTruth {
    pub tau: Vec<f64>,
    pub ate: f64,
}

pub fn benchmark_schema() -> CovariateSchema {
    let mut entries = vec![CovariateSchema::continuous("X1")];
    for (name, k) in VARIABLES[1..].iter().zip(CATEGORY_COUNTS) {
        let levels: Vec<String> = (0..k).map(|l| l.to_string()).collect();
        entries.push(CovariateSchema::categorical(name, &levels));
    }
    CovariateSchema::new(entries).expect("static schema is valid")
}

pub fn simulate(design: &SimDesign) -> Result<(Dataset, SimTruth)> {
    if design.n < 10 {
        return Err(Error::invalid("simulations need at least 10 rows"));
    }
    let schema = benchmark_schema();
    let dgp = design.design.dgp();
    let mut rng = SeededSampler::new(design.seed, 0).rng();
    let width = schema.width();
    let mut rows = Vec::with_capacity(design.n);
    let mut y = Vec::with_capacity(design.n);
    let mut d = Vec::with_capacity(design.n);
    let mut tau = Vec::with_capacity(design.n);
    for _ in 0..design.n {
        let x1: f64 = StandardNormal.sample(&mut rng);
        let mut z = [1.0, x1, 0.0, 0.0, 0.0, 0.0];
        let mut row = Vec::with_capacity(width);
        row.push(x1);
        for (slot, k) in CATEGORY_COUNTS.iter().enumerate() {
            let level = rng.random_range(0..*k);
            z[slot + 2] = level as f64;
            row.extend((0..*k).map(|l| if l == level { 1.0 } else { 0.0 }));
        }
        let treated = rng.random_bool(0.5);
        let eps: f64 = StandardNormal.sample(&mut rng);
        let kappa = LinearDgp::eval(&dgp.kappa, &z);
        let sign = if treated { 1.0 } else { -1.0 };
        y.push(LinearDgp::eval(&dgp.eta, &z) + 0.5 * sign * kappa + eps);
        d.push(treated);
        tau.push(kappa);
        rows.push(row);
    }
    let data = Dataset::from_rows(schema, &rows, y, d)?;
    Ok((data, SimTruth { tau, ate: dgp.ate() }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub designs: Vec<u8>,
    pub iterations: usize,
    pub permutations: usize,
    pub n: usize,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            designs: vec![1, 2, 3],
            iterations: 20,
            permutations: 100,
            n: 500,
            forest: ForestParams {
                num_trees: 500,
                tree_params: TreeParams {
                    min_leaf: 5,
                    min_treat_control_per_leaf: 5,
                    ..TreeParams::default()
                },
                ..ForestParams::default()
            },
            seed: 0,
        }
    }
}

/// One row of benchmark output: a variable's importance on the unpermuted
/// data and its permutation p-value in one iteration of one design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRecord {
    pub design: u8,
    pub iteration: usize,
    pub variable: String,
    pub importance: f64,
    pub p_value: Option<f64>,
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkRecord>> {
    if cfg.iterations == 0 {
        return Err(Error::invalid("benchmark needs at least one iteration"));
    }
    let designs = cfg
        .designs
        .iter()
        .map(|&id| Design::from_id(id).map(|d| (id, d)))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(u8, Design, usize)> = designs
        .iter()
        .flat_map(|&(id, d)| (0..cfg.iterations).map(move |it| (id, d, it)))
        .collect();
    let per_job = par::try_map_indexed(jobs.len(), |j| {
        let (id, design, iteration) = jobs[j];
        let job_seed = mix(mix(cfg.seed, id as u64), iteration as u64);
        let (data, _) = simulate(&SimDesign {
            design,
            n: cfg.n,
            seed: job_seed,
        })?;
        let test = PermutationTestConfig {
            num_permutations: cfg.permutations,
            forest: ForestParams {
                seed: mix(job_seed, 1),
                ..cfg.forest.clone()
            },
            seed: mix(job_seed, 2),
            smoothed: false,
        };
        let outcome = permutation_pvalues(&data, &test)?;
        Ok(outcome
            .report
            .variables
            .into_iter()
            .map(|v| BenchmarkRecord {
                design: id,
                iteration,
                variable: v.name,
                importance: v.raw,
                p_value: v.p_value,
            })
            .collect::<Vec<_>>())
    })?;
    Ok(per_job.into_iter().flatten().collect())
}
