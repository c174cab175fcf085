//! Penalized (generalized) single-index models.
//!
//! The linear predictor is `η = g(E)` with index `E = Xβ (+ Aγ)` when extra
//! covariates enter the index, or `η = Aγ + g(Xβ)` when they enter
//! additively. `g` is a penalized B-spline and `β` is kept on the unit
//! sphere with a positive leading entry.

mod fit;
mod objective;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::SplineBasis;
use crate::error::{Error, Result};

pub use fit::{fit, fit_grid, fit_path, fit_path_with, glm_irls, linear_start, GlmFit};
pub use objective::{gradient, objective, Evaluator, InnerFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Gaussian errors on `log Y`; effects are read on the exponentiated scale.
    GaussianLog,
    Poisson,
    BernoulliLogit,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianLog => "gaussian_log",
            Family::Poisson => "poisson",
            Family::BernoulliLogit => "bernoulli_logit",
        }
    }

    /// Per-observation contribution to the unpenalized objective.
    #[inline]
    pub fn loss(self, y: f64, eta: f64) -> f64 {
        match self {
            Family::GaussianLog => (y - eta) * (y - eta),
            Family::Poisson => eta.exp() - y * eta,
            Family::BernoulliLogit => softplus(eta) - y * eta,
        }
    }

    /// Derivative of [`Family::loss`] with respect to `η`.
    #[inline]
    pub fn dloss(self, y: f64, eta: f64) -> f64 {
        match self {
            Family::GaussianLog => -2.0 * (y - eta),
            Family::Poisson => eta.exp() - y,
            Family::BernoulliLogit => logistic(eta) - y,
        }
    }

    /// Mean of the response on the modelled scale.
    #[inline]
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            Family::GaussianLog => eta,
            Family::Poisson => eta.exp(),
            Family::BernoulliLogit => logistic(eta),
        }
    }

    /// IRLS weight (variance function at the canonical link).
    #[inline]
    pub fn weight(self, eta: f64) -> f64 {
        match self {
            Family::GaussianLog => 1.0,
            Family::Poisson => eta.exp(),
            Family::BernoulliLogit => {
                let p = logistic(eta);
                p * (1.0 - p)
            }
        }
    }

    /// Curvature multiplier of the penalty in the objective's Hessian
    /// relative to the data term `CᵀWC`.
    pub(crate) fn penalty_factor(self) -> f64 {
        match self {
            // Σ r² + λ dᵀPd has Hessian 2(CᵀC + λP)
            Family::GaussianLog => 1.0,
            // −ℓ + λ dᵀPd has Hessian CᵀWC + 2λP
            Family::Poisson | Family::BernoulliLogit => 2.0,
        }
    }

    /// Outer transform `h` through which the Jensen Effect is measured.
    #[inline]
    pub fn response_transform(self, g: f64) -> f64 {
        match self {
            Family::GaussianLog | Family::Poisson => g.exp(),
            Family::BernoulliLogit => logistic(g),
        }
    }

    #[inline]
    pub fn response_transform_derivative(self, g: f64) -> f64 {
        match self {
            Family::GaussianLog | Family::Poisson => g.exp(),
            Family::BernoulliLogit => {
                let p = logistic(g);
                p * (1.0 - p)
            }
        }
    }
}

/// Overflow-safe `log(1 + exp(x))`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Where the extra covariates `A` enter the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// `η = g(Aγ + Xβ)`.
    InsideIndex,
    /// `η = Aγ + g(Xβ)`.
    OutsideIndex,
}

/// Optimizer and numerical settings for a single fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub grad_tol: f64,
    pub rel_f_tol: f64,
    pub max_iter: usize,
    /// Extra optimizer runs allowed after the mandatory two.
    pub max_restarts: usize,
    /// Fraction of the index range added on each side of the spline domain.
    pub domain_pad: f64,
    /// Warm-start each grid value from its predecessor.
    pub warm_start: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
            max_iter: 500,
            max_restarts: 2,
            domain_pad: 0.05,
            warm_start: true,
        }
    }
}

/// Model family, covariate layout, spline size and smoothing grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub p: usize,
    pub q: usize,
    pub placement: Placement,
    pub degree: usize,
    pub dim: usize,
    pub lambda_grid: Vec<f64>,
    pub fit: FitConfig,
}

impl ModelSpec {
    pub fn new(family: Family, p: usize, q: usize) -> Self {
        Self {
            family,
            p,
            q,
            placement: Placement::InsideIndex,
            degree: 5,
            dim: 25,
            lambda_grid: log_grid(1e-4, 1e6, 20),
            fit: FitConfig::default(),
        }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.lambda_grid = grid;
        self
    }

    pub fn with_basis(mut self, degree: usize, dim: usize) -> Self {
        self.degree = degree;
        self.dim = dim;
        self
    }

    pub fn with_placement(mut self, placement: Placement) -> Self {
        self.placement = placement;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Input("at least one environmental covariate is required".into()));
        }
        if self.dim < self.degree + 1 {
            return Err(Error::InvalidBasis(format!(
                "basis dimension {} is smaller than degree + 1",
                self.dim
            )));
        }
        if self.degree < 2 {
            return Err(Error::InvalidBasis("spline degree must be at least 2".into()));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Input("smoothing grid is empty".into()));
        }
        if self.lambda_grid.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(Error::Input("smoothing parameters must be positive".into()));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("smoothing grid must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Number of extra covariates estimated inside the index.
    pub fn q_inside(&self) -> usize {
        match self.placement {
            Placement::InsideIndex => self.q,
            Placement::OutsideIndex => 0,
        }
    }

    pub fn q_outside(&self) -> usize {
        self.q - self.q_inside()
    }
}

/// `m` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..m)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (m - 1) as f64))
        .collect()
}

/// Observations on the modelled scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub family: Family,
    /// Environmental covariates, `n × p`.
    pub x: DMatrix<f64>,
    /// Extra covariates, `n × q`.
    pub a: DMatrix<f64>,
    /// Response as modelled: `log Y` for the Gaussian family, `Y` otherwise.
    pub y: DVector<f64>,
}

impl Dataset {
    /// Validates raw responses for the family. The Gaussian family takes
    /// logarithms here.
    pub fn new(
        family: Family,
        x: DMatrix<f64>,
        a: DMatrix<f64>,
        response: DVector<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if x.nrows() != n || a.nrows() != n {
            return Err(Error::Input(format!(
                "row mismatch: {} responses, {} covariate rows, {} extra covariate rows",
                n,
                x.nrows(),
                a.nrows()
            )));
        }
        if n == 0 {
            return Err(Error::Input("dataset is empty".into()));
        }
        if let Some((i, _)) = x.iter().chain(a.iter()).enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite covariate (entry {i})")));
        }
        let mut y = response;
        for (i, v) in y.iter_mut().enumerate() {
            let ok = match family {
                Family::GaussianLog => *v > 0.0 && v.is_finite(),
                Family::Poisson => *v >= 0.0 && v.is_finite() && v.fract() == 0.0,
                Family::BernoulliLogit => *v == 0.0 || *v == 1.0,
            };
            if !ok {
                let need = match family {
                    Family::GaussianLog => "a strictly positive response",
                    Family::Poisson => "a nonnegative integer count",
                    Family::BernoulliLogit => "a 0/1 response",
                };
                return Err(Error::Input(format!(
                    "observation {i}: {} needs {need}, got {v}",
                    family.name()
                )));
            }
            if family == Family::GaussianLog {
                *v = v.ln();
            }
        }
        Ok(Self { family, x, a, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.a.ncols()
    }

    pub(crate) fn check_spec(&self, spec: &ModelSpec) -> Result<()> {
        spec.validate()?;
        if spec.family != self.family {
            return Err(Error::Input(format!(
                "dataset prepared for {} but model is {}",
                self.family.name(),
                spec.family.name()
            )));
        }
        if self.p() != spec.p || self.q() != spec.q {
            return Err(Error::Input(format!(
                "dataset has p = {}, q = {} but model expects p = {}, q = {}",
                self.p(),
                self.q(),
                spec.p,
                spec.q
            )));
        }
        Ok(())
    }

    /// Column means, exact for constant columns.
    pub fn x_mean(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.p(),
            (0..self.p()).map(|j| crate::linalg::shifted_mean(self.x.column(j).iter().copied())),
        )
    }
}

/// Index, extra-covariate and spline coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub beta: DVector<f64>,
    pub gamma: DVector<f64>,
    pub d: DVector<f64>,
}

/// Unit-norm index coefficients with a positive leading entry (the first
/// non-zero entry when the first is exactly zero).
pub fn normalize_index(beta_raw: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = beta_raw.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateIndex);
    }
    let lead = beta_raw.iter().copied().find(|&v| v != 0.0).unwrap_or(0.0);
    let sign = if lead < 0.0 { -1.0 } else { 1.0 };
    Ok(beta_raw * (sign / norm))
}

pub(crate) fn leading_sign(beta: &DVector<f64>) -> f64 {
    match beta.iter().copied().find(|&v| v != 0.0) {
        Some(v) if v < 0.0 => -1.0,
        _ => 1.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitWarning {
    /// Fewer observations than spline and additive coefficients.
    RankDeficient,
    /// A penalized system needed diagonal jitter to factor.
    Jittered,
    /// Index values fell outside the spline domain at the final estimate.
    Clamped,
}

/// Estimates at one smoothing parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub lambda: f64,
    pub coeffs: Coefficients,
    pub basis: SplineBasis,
    /// `Xβ (+ Aγ)`: the argument of `g`.
    pub index_values: DVector<f64>,
    pub eta: DVector<f64>,
    /// `μ` (Poisson), `π` (logit) or the fitted `log Y` (Gaussian).
    pub mean: DVector<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub converged: bool,
    pub n_restarts_used: usize,
    pub iterations: usize,
    pub warnings: Vec<FitWarning>,
}

impl FitResult {
    /// Fitted link values `g(E)` at the observations.
    pub fn g_values(&self) -> DVector<f64> {
        self.basis
            .local_rows(self.index_values.as_slice(), 0)
            .expect("index values are finite")
            .apply(0, &self.coeffs.d)
    }

    /// IRLS weights at the fitted linear predictor.
    pub fn weights(&self, family: Family) -> DVector<f64> {
        self.eta.map(|e| family.weight(e))
    }
}
