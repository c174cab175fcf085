//! Simulation designs and a replication harness for rejection rates.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jensen::{jensen_test_with, JensenDirection, TestConfig};
use crate::linalg::shifted_mean;
use crate::model::{fit_path, log_grid, logistic, Dataset, Family, ModelSpec};

/// Mean functions `h∘g` of the catalog, as functions of the index `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositeLink {
    Exp,
    Sqrt,
    Sin,
    Identity,
    /// `exp(s/8)`.
    ExpEighth,
    /// `30/(1 + exp(−s/a)) − 15`.
    ScaledLogistic,
    /// `(exp(−as) − exp(−a)) / (2(1 − exp(−a))) + 1/2`.
    ConvexProbability,
    /// `logistic(1/2 + a s)`.
    LinearLogistic,
}

impl CompositeLink {
    pub fn eval(self, s: f64, a: f64) -> f64 {
        match self {
            CompositeLink::Exp => s.exp(),
            CompositeLink::Sqrt => s.sqrt(),
            CompositeLink::Sin => s.sin(),
            CompositeLink::Identity => s,
            CompositeLink::ExpEighth => (s / 8.0).exp(),
            CompositeLink::ScaledLogistic => 30.0 / (1.0 + (-s / a).exp()) - 15.0,
            CompositeLink::ConvexProbability => {
                let ea = (-a).exp();
                ((-a * s).exp() - ea) / (2.0 * (1.0 - ea)) + 0.5
            }
            CompositeLink::LinearLogistic => logistic(0.5 + a * s),
        }
    }
}

/// A named simulation design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: &'static str,
    pub family: Family,
    pub link: CompositeLink,
    /// Noise standard deviation (Gaussian) or shape parameter `a`.
    pub default_param: f64,
    pub covariate_range: (f64, f64),
    pub p: usize,
    pub direction: JensenDirection,
    /// `(lo, hi, count)` of the default log-spaced smoothing grid, in units
    /// of `λ/n`.
    pub grid: (f64, f64, usize),
}

// per-observation endpoints; the data term grows with n, so the grid does too
const GRID: (f64, f64, usize) = (1e-4, 1e6, 20);

const fn gauss(name: &'static str, link: CompositeLink) -> Scenario {
    Scenario {
        name,
        family: Family::GaussianLog,
        link,
        default_param: 0.01,
        covariate_range: (0.0, 0.5),
        p: 5,
        direction: JensenDirection::TestNegative,
        grid: GRID,
    }
}

const fn pois(name: &'static str, link: CompositeLink, a: f64) -> Scenario {
    Scenario {
        name,
        family: Family::Poisson,
        link,
        default_param: a,
        covariate_range: (0.0, 20.0),
        p: 5,
        direction: JensenDirection::TestNegative,
        grid: GRID,
    }
}

const fn logit(name: &'static str, link: CompositeLink, a: f64) -> Scenario {
    Scenario {
        name,
        family: Family::BernoulliLogit,
        link,
        default_param: a,
        covariate_range: (0.0, 0.5),
        p: 5,
        direction: JensenDirection::TestPositive,
        grid: GRID,
    }
}

pub const CATALOG: [Scenario; 9] = [
    gauss("gauss-exp", CompositeLink::Exp),
    gauss("gauss-sqrt", CompositeLink::Sqrt),
    gauss("gauss-sin", CompositeLink::Sin),
    gauss("gauss-linear", CompositeLink::Identity),
    pois("pois-exp", CompositeLink::ExpEighth, 8.0),
    pois("pois-logistic", CompositeLink::ScaledLogistic, 8.0),
    pois("pois-linear", CompositeLink::Identity, 0.0),
    logit("logit-convex", CompositeLink::ConvexProbability, 5.0),
    logit("logit-linear", CompositeLink::LinearLogistic, 1.0),
];

pub fn scenario(name: &str) -> Result<Scenario> {
    CATALOG.iter().find(|s| s.name == name).copied().ok_or_else(|| {
        let names: Vec<&str> = CATALOG.iter().map(|s| s.name).collect();
        Error::Input(format!("unknown scenario '{name}'; available: {}", names.join(", ")))
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub family: Family,
    pub link: CompositeLink,
    pub param: f64,
    pub n: usize,
    pub p: usize,
    pub covariate_range: (f64, f64),
    pub beta_true: DVector<f64>,
    pub n_replicates: usize,
    pub seed: u64,
    pub lambda_grid: Vec<f64>,
    pub direction: JensenDirection,
    pub n_null_sims: usize,
}

impl ScenarioConfig {
    pub fn new(name: &str, n: usize, param: Option<f64>, n_replicates: usize, seed: u64) -> Result<Self> {
        let sc = scenario(name)?;
        let p = sc.p;
        Ok(Self {
            scenario: sc.name.to_string(),
            family: sc.family,
            link: sc.link,
            param: param.unwrap_or(sc.default_param),
            n,
            p,
            covariate_range: sc.covariate_range,
            beta_true: DVector::from_element(p, 1.0 / (p as f64).sqrt()),
            n_replicates,
            seed,
            lambda_grid: log_grid(sc.grid.0 * n as f64, sc.grid.1 * n as f64, sc.grid.2),
            direction: sc.direction,
            n_null_sims: 5000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.covariate_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::Input("covariate range must be a nonempty finite interval".into()));
        }
        if self.family == Family::GaussianLog && lo < 0.0 {
            return Err(Error::Input("Gaussian designs need nonnegative covariates".into()));
        }
        if self.n == 0 || self.p == 0 || self.beta_true.len() != self.p {
            return Err(Error::Input("sample size, covariate count and β must agree and be positive".into()));
        }
        if self.n_replicates == 0 {
            return Err(Error::Input("at least one replicate is required".into()));
        }
        if self.family == Family::GaussianLog && !(self.param >= 0.0) {
            return Err(Error::Input("noise standard deviation must be nonnegative".into()));
        }
        Ok(())
    }

    /// Mean response for the family at index `s`, checked against the
    /// family's mean space.
    pub fn mean_at(&self, s: f64) -> Result<f64> {
        let m = self.link.eval(s, self.param);
        let ok = match self.family {
            Family::GaussianLog | Family::Poisson => m > 0.0 && m.is_finite(),
            Family::BernoulliLogit => m > 0.0 && m < 1.0,
        };
        if ok {
            Ok(m)
        } else {
            Err(Error::ScenarioInfeasible { s, mean: m })
        }
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn draw_x(&self, rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let (lo, hi) = self.covariate_range;
        // row-major draw order so that a prefix of rows does not depend on n
        let mut x = DMatrix::zeros(n, self.p);
        for i in 0..n {
            for j in 0..self.p {
                x[(i, j)] = rng.random_range(lo..hi);
            }
        }
        x
    }

    /// Jensen Effect of the true mean function under a fresh large draw of
    /// covariates.
    pub fn true_delta(&self) -> Result<f64> {
        const DRAWS: usize = 200_000;
        let mut rng = self.rng(u64::MAX);
        let x = self.draw_x(&mut rng, DRAWS);
        let s = &x * &self.beta_true;
        let s_bar = shifted_mean(s.iter().copied());
        let ref_mean = self.mean_at(s_bar)?;
        let mut acc = 0.0;
        for &si in s.iter() {
            acc += self.mean_at(si)? - ref_mean;
        }
        Ok(acc / DRAWS as f64)
    }
}

/// Simulated covariates and raw responses for one replicate.
pub fn gen_dataset(config: &ScenarioConfig, replicate: u64) -> Result<(DMatrix<f64>, DVector<f64>)> {
    config.validate()?;
    let mut rng = config.rng(replicate);
    let x = config.draw_x(&mut rng, config.n);
    let s = &x * &config.beta_true;
    let mut y = DVector::zeros(config.n);
    for i in 0..config.n {
        let m = config.mean_at(s[i])?;
        y[i] = match config.family {
            Family::GaussianLog => {
                let eps = Normal::new(0.0, config.param)
                    .map_err(|e| Error::Input(e.to_string()))?
                    .sample(&mut rng);
                (m.ln() + eps).exp()
            }
            Family::Poisson => Poisson::new(m).map_err(|e| Error::Input(e.to_string()))?.sample(&mut rng),
            Family::BernoulliLogit => (rng.random::<f64>() < m) as u8 as f64,
        };
    }
    Ok((x, y))
}

pub fn gen_model_data(config: &ScenarioConfig, replicate: u64) -> Result<Dataset> {
    let (x, y) = gen_dataset(config, replicate)?;
    Dataset::new(config.family, x, DMatrix::zeros(config.n, 0), y)
}

/// Model used to analyse a scenario's replicates.
pub fn analysis_spec(config: &ScenarioConfig) -> ModelSpec {
    ModelSpec::new(config.family, config.p, 0).with_grid(config.lambda_grid.clone())
}

/// Seed of the null simulation for one replicate.
fn null_seed(seed: u64, replicate: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ replicate.wrapping_add(1).wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// Decision of one replicate's full fit-and-test pipeline.
pub fn run_replicate(config: &ScenarioConfig, alpha: f64, replicate: u64) -> Result<bool> {
    let data = gen_model_data(config, replicate)?;
    let path = fit_path(&analysis_spec(config), &data)?;
    let cfg = TestConfig {
        alpha,
        n_null_sims: config.n_null_sims,
        seed: null_seed(config.seed, replicate),
    };
    Ok(jensen_test_with(&path, config.direction, &cfg)?.reject)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub scenario: String,
    pub n: usize,
    pub param: f64,
    pub rejection_rate: f64,
    pub true_delta: f64,
    /// Replicates that completed.
    pub replicates: usize,
    pub rejections: usize,
    /// Replicates that failed, with the first error message.
    pub failures: usize,
    pub first_failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

pub const POWER_HEADER: &str = "scenario,n,param,rejection_rate,true_delta,replicates";

impl PowerTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{POWER_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.scenario,
                r.n,
                crate::fmt::g17(r.param),
                crate::fmt::g17(r.rejection_rate),
                crate::fmt::g17(r.true_delta),
                r.replicates
            )?;
        }
        Ok(())
    }
}

/// Rejection frequencies over replicates of each scenario. Replicates run in
/// parallel; results are reduced in replicate order.
pub fn power_study(configs: &[ScenarioConfig], alpha: f64) -> Result<PowerTable> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Input(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        config.validate()?;
        let true_delta = config.true_delta()?;
        let outcomes: Vec<Result<bool>> = (0..config.n_replicates as u64)
            .into_par_iter()
            .map(|r| run_replicate(config, alpha, r))
            .collect();
        let mut rejections = 0;
        let mut completed = 0;
        let mut failures = 0;
        let mut first_failure = None;
        for o in outcomes {
            match o {
                Ok(rej) => {
                    completed += 1;
                    rejections += rej as usize;
                }
                Err(e) => {
                    failures += 1;
                    first_failure.get_or_insert_with(|| e.to_string());
                }
            }
        }
        if completed == 0 {
            return Err(Error::NoConvergedFits);
        }
        rows.push(PowerRow {
            scenario: config.scenario.clone(),
            n: config.n,
            param: config.param,
            rejection_rate: rejections as f64 / completed as f64,
            true_delta,
            replicates: completed,
            rejections,
            failures,
            first_failure,
        });
    }
    Ok(PowerTable { rows })
}
