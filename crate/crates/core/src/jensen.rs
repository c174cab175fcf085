//! Jensen Effect estimates along the smoothing path, their delta-method
//! covariance, and min-t / max-t tests with simulated critical values.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::basis::LocalRows;
use crate::error::{Error, Result};
use crate::inference::LambdaPath;
use crate::linalg::{min_eigenvalue, project_psd, sym_sqrt, symmetrize, SpdFactor};
use crate::model::{glm_irls, logistic, Dataset, Family, FitResult, ModelSpec, Placement};

/// Largest link value passed to the exponential before clipping.
pub const EXP_CLIP: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JensenDirection {
    /// Reject `δ ≥ 0` when `min t` is small.
    TestNegative,
    /// Reject `δ ≤ 0` when `max t` is large.
    TestPositive,
    /// Reject `δ = δ_∞` (linear-logistic value) when `max |t|` is large.
    TestVsLinearLogistic,
}

impl JensenDirection {
    pub fn name(self) -> &'static str {
        match self {
            JensenDirection::TestNegative => "test_negative",
            JensenDirection::TestPositive => "test_positive",
            JensenDirection::TestVsLinearLogistic => "test_vs_linear_logistic",
        }
    }

    fn statistic(self, t: &[f64]) -> f64 {
        match self {
            JensenDirection::TestNegative => t.iter().copied().fold(f64::INFINITY, f64::min),
            JensenDirection::TestPositive => t.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            JensenDirection::TestVsLinearLogistic => t.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        }
    }

    /// Whether `a` is at least as extreme as `b` in the rejection direction.
    fn as_extreme(self, a: f64, b: f64) -> bool {
        match self {
            JensenDirection::TestNegative => a <= b,
            _ => a >= b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// `(E₁, …, Eₙ, Ē)` with weights `(1/n, …, 1/n, −1)`.
    Shared,
    /// `(E₁, Ē₁, …, Eₙ, Ēₙ)` pairs with weights `(1/n, −1/n, …)`, where the
    /// environmental part of each pair member is replaced by its average.
    Interleaved,
}

/// Augmented evaluation points for one fit.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub layout: Layout,
    pub points: DVector<f64>,
    pub weights: DVector<f64>,
    /// Additive terms `Aᵢγ` added to `g` before the response transform
    /// (extra covariates outside the index); zero otherwise.
    pub offsets: DVector<f64>,
    /// Observation whose extra covariates each point carries; `None` for the
    /// shared reference point.
    pub rows_of: Vec<Option<usize>>,
    rows: LocalRows,
}

impl EvalSet {
    pub fn for_fit(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<Self> {
        let beta = &fit.coeffs.beta;
        let n = data.n();
        let xbar = data.x_mean();
        let env = |i: usize| dot_row(&data.x, i, beta);
        let env_bar = dot_slice(xbar.as_slice(), beta.as_slice());
        let extra = |i: usize| -> f64 {
            if spec.q == 0 {
                0.0
            } else {
                dot_row(&data.a, i, &fit.coeffs.gamma)
            }
        };
        let inv_n = 1.0 / n as f64;
        let (layout, points, weights, offsets, rows_of) = if spec.q == 0 {
            let mut pts: Vec<f64> = (0..n).map(env).collect();
            pts.push(env_bar);
            let mut w = vec![inv_n; n];
            w.push(-1.0);
            let mut rows: Vec<Option<usize>> = (0..n).map(Some).collect();
            rows.push(None);
            (Layout::Shared, pts, w, vec![0.0; n + 1], rows)
        } else {
            let mut pts = Vec::with_capacity(2 * n);
            let mut offs = Vec::with_capacity(2 * n);
            let mut w = Vec::with_capacity(2 * n);
            let mut rows = Vec::with_capacity(2 * n);
            for i in 0..n {
                let ai = extra(i);
                match spec.placement {
                    Placement::InsideIndex => {
                        pts.extend([ai + env(i), ai + env_bar]);
                        offs.extend([0.0, 0.0]);
                    }
                    Placement::OutsideIndex => {
                        pts.extend([env(i), env_bar]);
                        offs.extend([ai, ai]);
                    }
                }
                w.extend([inv_n, -inv_n]);
                rows.extend([Some(i), Some(i)]);
            }
            (Layout::Interleaved, pts, w, offs, rows)
        };
        let rows = fit.basis.local_rows(&points, 0)?;
        Ok(Self {
            layout,
            points: DVector::from_vec(points),
            weights: DVector::from_vec(weights),
            offsets: DVector::from_vec(offsets),
            rows_of,
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Dense `Φ⁺`.
    pub fn phi_plus(&self) -> DMatrix<f64> {
        self.rows.dense(0)
    }

    /// Link values `Φ⁺d` plus offsets, clipped for the exponential.
    pub fn linear_predictor(&self, family: Family, d: &DVector<f64>) -> (DVector<f64>, bool) {
        let mut eta = self.rows.apply(0, d) + &self.offsets;
        let mut clipped = false;
        if family != Family::BernoulliLogit {
            for v in eta.iter_mut() {
                if *v > EXP_CLIP {
                    *v = EXP_CLIP;
                    clipped = true;
                }
            }
        }
        (eta, clipped)
    }

    /// `Σₖ aₖ vₖ` accumulated as pair differences so that equal values
    /// cancel exactly.
    pub fn contract(&self, v: &DVector<f64>) -> f64 {
        let n_obs = match self.layout {
            Layout::Shared => self.len() - 1,
            Layout::Interleaved => self.len() / 2,
        };
        let mut acc = 0.0;
        match self.layout {
            Layout::Shared => {
                let r = v[n_obs];
                for i in 0..n_obs {
                    acc += v[i] - r;
                }
            }
            Layout::Interleaved => {
                for i in 0..n_obs {
                    acc += v[2 * i] - v[2 * i + 1];
                }
            }
        }
        acc / n_obs as f64
    }
}

fn dot_slice(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn dot_row(m: &DMatrix<f64>, i: usize, b: &DVector<f64>) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        acc += m[(i, j)] * b[j];
    }
    acc
}

/// `δ̂ = aᵀ h(Φ⁺d̂ + offsets)` with `h = exp` or the logistic function.
pub fn delta_hat(family: Family, fit: &FitResult, eval: &EvalSet) -> f64 {
    let (eta, _) = eval.linear_predictor(family, &fit.coeffs.d);
    eval.contract(&eta.map(|g| family.response_transform(g)))
}

/// Gradient of `δ̂` with respect to the inner parameters `θ = (d, γ_out)`.
fn delta_gradient(spec: &ModelSpec, data: &Dataset, fit: &FitResult, eval: &EvalSet) -> DVector<f64> {
    let fam = spec.family;
    let (eta, _) = eval.linear_predictor(fam, &fit.coeffs.d);
    let ah = DVector::from_fn(eval.len(), |k, _| eval.weights[k] * fam.response_transform_derivative(eta[k]));
    let k = spec.dim;
    let phi_part = eval.rows.transpose_apply(0, &ah);
    if spec.placement == Placement::OutsideIndex && spec.q > 0 {
        let mut g = DVector::zeros(k + spec.q);
        g.rows_mut(0, k).copy_from(&phi_part);
        for (idx, row) in eval.rows_of.iter().enumerate() {
            if let Some(i) = row {
                for j in 0..spec.q {
                    g[k + j] += ah[idx] * data.a[(*i, j)];
                }
            }
        }
        g
    } else {
        phi_part
    }
}

/// Per-λ evaluation sets for a path.
pub fn eval_sets(path: &LambdaPath) -> Result<Vec<EvalSet>> {
    path.fits
        .iter()
        .map(|f| EvalSet::for_fit(&path.spec, &path.data, f))
        .collect()
}

/// Influence vectors `uᵢ = Zᵢ Hᵢ⁻¹ ∇δ̂ᵢ`, so that `cov(δ̂ᵢ, δ̂ⱼ) = s · uᵢᵀ W uⱼ`.
fn influence(path: &LambdaPath, evals: &[EvalSet]) -> Vec<DVector<f64>> {
    (0..path.len())
        .map(|i| {
            let m = &path.mats[i];
            let g = delta_gradient(&path.spec, &path.data, &path.fits[i], &evals[i]);
            let mut padded = DVector::zeros(m.h_inv.nrows());
            padded.rows_mut(0, g.len()).copy_from(&g);
            &m.z * (&m.h_inv * padded)
        })
        .collect()
}

fn gram_of(vectors: &[DVector<f64>], w: &DVector<f64>, scale: f64) -> DMatrix<f64> {
    let m = vectors.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        let wi = vectors[i].component_mul(w);
        for j in i..m {
            let v = wi.dot(&vectors[j]) * scale;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// `Σ_δ` across the grid: the delta-method covariance, symmetrized and with
/// negative eigenvalues truncated at zero.
pub fn delta_cov(path: &LambdaPath, evals: &[EvalSet]) -> Result<DMatrix<f64>> {
    let u = influence(path, evals);
    let raw = gram_of(&u, &path.middle_weights(), path.dispersion()?);
    finish_cov(raw)
}

/// `Σ_δ` assembled entry by entry from the coefficient covariances,
/// `∇δ̂ᵢᵀ cov(θ̂ᵢ, θ̂ⱼ) ∇δ̂ⱼ`. Slower than [`delta_cov`]; kept as a check.
pub fn delta_cov_from_coefficients(path: &LambdaPath, evals: &[EvalSet]) -> Result<DMatrix<f64>> {
    let m = path.len();
    let grads: Vec<DVector<f64>> = (0..m)
        .map(|i| delta_gradient(&path.spec, &path.data, &path.fits[i], &evals[i]))
        .collect();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            out[(i, j)] = grads[i].dot(&(path.theta_cov(i, j)? * &grads[j]));
        }
    }
    finish_cov(out)
}

fn finish_cov(raw: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = project_psd(&symmetrize(&raw));
    if sym.diagonal().iter().all(|&v| v <= 0.0) {
        return Err(Error::DegenerateVariance);
    }
    Ok(sym)
}

/// Normalized process `t = D^{−1/2}δ̂` and its correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TProcess {
    pub t: Vec<f64>,
    pub sigma_t: DMatrix<f64>,
    /// Grid positions that survived the positive-variance filter.
    pub kept: Vec<usize>,
}

/// Grid entries whose variance is not clearly positive relative to the
/// largest are dropped.
pub fn t_process(deltas: &[f64], sigma_delta: &DMatrix<f64>) -> Result<TProcess> {
    let m = deltas.len();
    if sigma_delta.nrows() != m || sigma_delta.ncols() != m {
        return Err(Error::Input("δ̂ and Σ_δ sizes differ".into()));
    }
    let max_var = sigma_delta.diagonal().iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..m)
        .filter(|&i| {
            let v = sigma_delta[(i, i)];
            v > 0.0 && v > 1e-12 * max_var && deltas[i].is_finite()
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::TestInfeasible("no grid value has positive estimated variance".into()));
    }
    let sd: Vec<f64> = kept.iter().map(|&i| sigma_delta[(i, i)].sqrt()).collect();
    let t = kept.iter().zip(&sd).map(|(&i, s)| deltas[i] / s).collect();
    let r = kept.len();
    let mut sigma_t = DMatrix::from_fn(r, r, |a, b| sigma_delta[(kept[a], kept[b])] / (sd[a] * sd[b]));
    for a in 0..r {
        sigma_t[(a, a)] = 1.0;
    }
    Ok(TProcess { t, sigma_t, kept })
}

/// Monte-Carlo null distribution of the process extremum.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    pub direction: JensenDirection,
    pub critical: f64,
    /// Simulated extrema in draw order.
    pub draws: Vec<f64>,
}

impl NullDistribution {
    /// Fraction of null draws at least as extreme as `statistic`.
    pub fn p_value(&self, statistic: f64) -> f64 {
        let hits = self
            .draws
            .iter()
            .filter(|&&v| self.direction.as_extreme(v, statistic))
            .count();
        hits as f64 / self.draws.len() as f64
    }

    pub fn rejects(&self, statistic: f64) -> bool {
        match self.direction {
            JensenDirection::TestNegative => statistic < self.critical,
            _ => statistic > self.critical,
        }
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Simulated critical value for the extremum of `N(0, Σ_t)`: the `α`
/// quantile of the minimum, or the `1 − α` quantile of the maximum (of
/// `|t|` for the two-sided test).
pub fn null_critical_value(
    sigma_t: &DMatrix<f64>,
    alpha: f64,
    direction: JensenDirection,
    n_sims: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Input(format!("alpha must lie in (0, 0.5], got {alpha}")));
    }
    if n_sims == 0 {
        return Err(Error::Input("at least one null draw is required".into()));
    }
    let m = sigma_t.nrows();
    let proj = project_psd(sigma_t);
    let scale = proj.diagonal().amax().max(1.0);
    if min_eigenvalue(&proj) < -1e-8 * scale {
        return Err(Error::Internal("correlation matrix is not positive semidefinite after projection".into()));
    }
    let root = sym_sqrt(&proj);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = DVector::zeros(m);
    let mut draws = Vec::with_capacity(n_sims);
    for _ in 0..n_sims {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let x = &root * &z;
        draws.push(direction.statistic(x.as_slice()));
    }
    let mut sorted = draws.clone();
    sorted.sort_by(f64::total_cmp);
    let prob = match direction {
        JensenDirection::TestNegative => alpha,
        _ => 1.0 - alpha,
    };
    Ok(NullDistribution {
        direction,
        critical: quantile(&sorted, prob),
        draws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub alpha: f64,
    pub n_null_sims: usize,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_null_sims: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenTestResult {
    pub family: Family,
    pub direction: JensenDirection,
    pub lambdas: Vec<f64>,
    /// `δ̂` per grid value (`δ̂ − δ_∞` for the linear-reference test).
    pub deltas: Vec<f64>,
    pub se: Vec<f64>,
    pub sigma_delta: DMatrix<f64>,
    pub t: Vec<f64>,
    pub sigma_t: DMatrix<f64>,
    /// Grid positions entering `t` and `sigma_t`.
    pub kept: Vec<usize>,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub n_null_sims: usize,
    pub seed: u64,
    pub delta_reference: Option<f64>,
    pub warnings: Vec<String>,
}

/// Sign test of the Jensen Effect across the smoothing path.
pub fn jensen_test(path: &LambdaPath, direction: JensenDirection, alpha: f64, seed: u64) -> Result<JensenTestResult> {
    jensen_test_with(
        path,
        direction,
        &TestConfig {
            alpha,
            seed,
            ..Default::default()
        },
    )
}

pub fn jensen_test_with(path: &LambdaPath, direction: JensenDirection, cfg: &TestConfig) -> Result<JensenTestResult> {
    if direction == JensenDirection::TestVsLinearLogistic {
        let reference = linear_logistic_reference(&path.spec, &path.data)?;
        return alternative_null_test_with(path, &reference, cfg);
    }
    let evals = eval_sets(path)?;
    let fam = path.spec.family;
    let mut warnings = Vec::new();
    let deltas: Vec<f64> = path
        .fits
        .iter()
        .zip(&evals)
        .map(|(f, e)| {
            if e.linear_predictor(fam, &f.coeffs.d).1 {
                warnings.push(format!("link values above {EXP_CLIP} clipped at λ = {}", f.lambda));
            }
            delta_hat(fam, f, e)
        })
        .collect();
    let sigma = delta_cov(path, &evals)?;
    assemble(path, direction, deltas, sigma, None, warnings, cfg)
}

fn assemble(
    path: &LambdaPath,
    direction: JensenDirection,
    deltas: Vec<f64>,
    sigma_delta: DMatrix<f64>,
    delta_reference: Option<f64>,
    mut warnings: Vec<String>,
    cfg: &TestConfig,
) -> Result<JensenTestResult> {
    if !path.fits.iter().any(|f| f.converged) {
        return Err(Error::NoConvergedFits);
    }
    // drop non-converged fits by zeroing their variance
    let mut masked = sigma_delta.clone();
    for (i, f) in path.fits.iter().enumerate() {
        if !f.converged {
            warnings.push(format!("fit at λ = {} did not converge and was left out", f.lambda));
            masked.row_mut(i).fill(0.0);
            masked.column_mut(i).fill(0.0);
        }
    }
    for (m, f) in path.mats.iter().zip(&path.fits) {
        if m.jittered {
            warnings.push(format!("covariance system at λ = {} needed diagonal jitter", f.lambda));
        }
    }
    let tp = t_process(&deltas, &masked)?;
    let dropped = path.len() - tp.kept.len();
    let unconverged = path.fits.iter().filter(|f| !f.converged).count();
    if dropped > unconverged {
        warnings.push(format!("{} grid values without positive variance were left out", dropped - unconverged));
    }
    let null = null_critical_value(&tp.sigma_t, cfg.alpha, direction, cfg.n_null_sims, cfg.seed)?;
    let statistic = direction.statistic(&tp.t);
    let se = (0..path.len()).map(|i| sigma_delta[(i, i)].max(0.0).sqrt()).collect();
    Ok(JensenTestResult {
        family: path.spec.family,
        direction,
        lambdas: path.grid.clone(),
        deltas,
        se,
        sigma_delta,
        t: tp.t,
        sigma_t: tp.sigma_t,
        kept: tp.kept,
        statistic,
        critical_value: null.critical,
        p_value: null.p_value(statistic),
        reject: null.rejects(statistic),
        alpha: cfg.alpha,
        n_null_sims: cfg.n_null_sims,
        seed: cfg.seed,
        delta_reference,
        warnings,
    })
}

/// Linear logistic regression on `[1, X, A]` and its Jensen Effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearReference {
    pub intercept: f64,
    pub beta_inf: DVector<f64>,
    pub gamma_inf: DVector<f64>,
    pub delta_inf: f64,
    /// Fitted linear predictor at the observations.
    pub eta_inf: DVector<f64>,
    pub weights_inf: DVector<f64>,
    /// Linear predictor at the augmented evaluation points.
    pub eval_eta: DVector<f64>,
    pub layout: Layout,
}

impl LinearReference {
    fn design(data: &Dataset) -> DMatrix<f64> {
        let (n, p, q) = (data.n(), data.p(), data.q());
        DMatrix::from_fn(n, 1 + p + q, |i, j| match j {
            0 => 1.0,
            j if j <= p => data.x[(i, j - 1)],
            j => data.a[(i, j - 1 - p)],
        })
    }

    /// Rows of the linear design at the evaluation points.
    fn eval_design(&self, data: &Dataset) -> DMatrix<f64> {
        let (n, p, q) = (data.n(), data.p(), data.q());
        let xbar = data.x_mean();
        let row = |obs: Option<usize>, env_mean: bool, j: usize| -> f64 {
            match j {
                0 => 1.0,
                j if j <= p => match (obs, env_mean) {
                    (Some(i), false) => data.x[(i, j - 1)],
                    _ => xbar[j - 1],
                },
                j => obs.map_or(0.0, |i| data.a[(i, j - 1 - p)]),
            }
        };
        match self.layout {
            Layout::Shared => DMatrix::from_fn(n + 1, 1 + p + q, |r, j| {
                if r < n {
                    row(Some(r), false, j)
                } else {
                    row(None, true, j)
                }
            }),
            Layout::Interleaved => DMatrix::from_fn(2 * n, 1 + p + q, |r, j| row(Some(r / 2), r % 2 == 1, j)),
        }
    }

    fn contract(&self, v: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        let n = match self.layout {
            Layout::Shared => {
                let n = v.len() - 1;
                for i in 0..n {
                    acc += v[i] - v[n];
                }
                n
            }
            Layout::Interleaved => {
                let n = v.len() / 2;
                for i in 0..n {
                    acc += v[2 * i] - v[2 * i + 1];
                }
                n
            }
        };
        acc / n as f64
    }

    fn weights(&self) -> DVector<f64> {
        let len = self.eval_eta.len();
        match self.layout {
            Layout::Shared => {
                let n = len - 1;
                DVector::from_fn(len, |k, _| if k < n { 1.0 / n as f64 } else { -1.0 })
            }
            Layout::Interleaved => {
                let n = (len / 2) as f64;
                DVector::from_fn(len, |k, _| if k % 2 == 0 { 1.0 / n } else { -1.0 / n })
            }
        }
    }

    /// Influence vector of `δ_∞`: `X (XᵀW∞X)⁻¹ X⁺ᵀ(a ∘ h′)`.
    fn influence(&self, data: &Dataset) -> Result<DVector<f64>> {
        let x = Self::design(data);
        let w = &self.weights_inf;
        let wx = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| w[i] * x[(i, j)]);
        let info = SpdFactor::new(&(x.transpose() * wx))?;
        let a = self.weights();
        let ah = DVector::from_fn(a.len(), |k, _| {
            let p = logistic(self.eval_eta[k]);
            a[k] * p * (1.0 - p)
        });
        let grad = self.eval_design(data).transpose() * ah;
        Ok(x * info.solve_vec(&grad))
    }
}

/// Linear logistic fit and `δ_∞`, the Jensen Effect implied when `g` is
/// linear.
pub fn linear_logistic_reference(spec: &ModelSpec, data: &Dataset) -> Result<LinearReference> {
    if spec.family != Family::BernoulliLogit || data.family != Family::BernoulliLogit {
        return Err(Error::Unsupported(
            "the linear reference test is defined for the logistic family only".into(),
        ));
    }
    let design = LinearReference::design(data);
    let glm = glm_irls(Family::BernoulliLogit, &design, &data.y)?;
    let (p, q) = (data.p(), data.q());
    let mut reference = LinearReference {
        intercept: glm.coef[0],
        beta_inf: glm.coef.rows(1, p).into_owned(),
        gamma_inf: glm.coef.rows(1 + p, q).into_owned(),
        delta_inf: 0.0,
        eta_inf: glm.eta,
        weights_inf: glm.weights,
        eval_eta: DVector::zeros(0),
        layout: if q == 0 { Layout::Shared } else { Layout::Interleaved },
    };
    let ed = reference.eval_design(data);
    reference.eval_eta = DVector::from_fn(ed.nrows(), |r, _| {
        let mut acc = 0.0;
        for j in 0..ed.ncols() {
            acc += ed[(r, j)] * glm.coef[j];
        }
        acc
    });
    reference.delta_inf = reference.contract(&reference.eval_eta.map(logistic));
    Ok(reference)
}

/// Full Taylor operator `H⁺_λ` (evaluation points × observations) mapping a
/// response perturbation to the change in `h(fitted)` at the evaluation
/// points, spline fit minus linear fit.
pub fn hat_operator(path: &LambdaPath, reference: &LinearReference, i: usize) -> Result<DMatrix<f64>> {
    let evals = EvalSet::for_fit(&path.spec, &path.data, &path.fits[i])?;
    let fam = path.spec.family;
    let m = &path.mats[i];
    let (eta, _) = evals.linear_predictor(fam, &path.fits[i].coeffs.d);
    let n_theta = m.n_theta;
    let mut lhs = DMatrix::zeros(evals.len(), m.h_inv.nrows());
    let phi = evals.phi_plus();
    lhs.view_mut((0, 0), (evals.len(), phi.ncols())).copy_from(&phi);
    if n_theta > phi.ncols() {
        for (r, obs) in evals.rows_of.iter().enumerate() {
            if let Some(o) = obs {
                for j in 0..(n_theta - phi.ncols()) {
                    lhs[(r, phi.ncols() + j)] = path.data.a[(*o, j)];
                }
            }
        }
    }
    for r in 0..evals.len() {
        let s = fam.response_transform_derivative(eta[r]);
        lhs.row_mut(r).scale_mut(s);
    }
    let spline = lhs * &m.h_inv * m.z.transpose();

    let x = LinearReference::design(&path.data);
    let w = &reference.weights_inf;
    let wx = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| w[r] * x[(r, c)]);
    let info = SpdFactor::new(&(x.transpose() * wx))?;
    let mut ed = reference.eval_design(&path.data);
    for r in 0..ed.nrows() {
        let p = logistic(reference.eval_eta[r]);
        ed.row_mut(r).scale_mut(p * (1.0 - p));
    }
    let linear = ed * info.solve(&x.transpose());
    Ok(spline - linear)
}

/// Two-sided max-|t| test of `δ_λ − δ_∞ = 0` across the path.
pub fn alternative_null_test(
    path: &LambdaPath,
    reference: &LinearReference,
    alpha: f64,
    seed: u64,
) -> Result<JensenTestResult> {
    alternative_null_test_with(
        path,
        reference,
        &TestConfig {
            alpha,
            seed,
            ..Default::default()
        },
    )
}

pub fn alternative_null_test_with(
    path: &LambdaPath,
    reference: &LinearReference,
    cfg: &TestConfig,
) -> Result<JensenTestResult> {
    if path.spec.family != Family::BernoulliLogit {
        return Err(Error::Unsupported(
            "the linear reference test is defined for the logistic family only".into(),
        ));
    }
    let evals = eval_sets(path)?;
    let fam = path.spec.family;
    let deltas: Vec<f64> = path
        .fits
        .iter()
        .zip(&evals)
        .map(|(f, e)| delta_hat(fam, f, e) - reference.delta_inf)
        .collect();
    let lin = reference.influence(&path.data)?;
    let v: Vec<DVector<f64>> = influence(path, &evals).into_iter().map(|u| u - &lin).collect();
    let sigma = finish_cov(gram_of(&v, &path.middle_weights(), 1.0))?;
    assemble(
        path,
        JensenDirection::TestVsLinearLogistic,
        deltas,
        sigma,
        Some(reference.delta_inf),
        Vec::new(),
        cfg,
    )
}

/// Delta covariance rebuilt from the full Taylor operators,
/// `aᵀH⁺ᵢ W H⁺ⱼᵀa`. Quadratic in `n`; kept as a check.
pub fn alternative_cov_from_operators(path: &LambdaPath, reference: &LinearReference) -> Result<DMatrix<f64>> {
    let w = path.middle_weights();
    let v: Vec<DVector<f64>> = (0..path.len())
        .map(|i| {
            let evals = EvalSet::for_fit(&path.spec, &path.data, &path.fits[i])?;
            Ok(hat_operator(path, reference, i)?.transpose() * &evals.weights)
        })
        .collect::<Result<_>>()?;
    finish_cov(gram_of(&v, &w, 1.0))
}

/// Brute-force `δ̂` by direct per-point evaluation, for checks.
pub fn delta_hat_naive(family: Family, fit: &FitResult, eval: &EvalSet) -> f64 {
    let mut total = 0.0;
    for k in 0..eval.len() {
        let phi = crate::basis::eval_basis(&fit.basis, eval.points[k], 0).expect("finite point");
        let g = (phi.dot(&fit.coeffs.d) + eval.offsets[k]).min(if family == Family::BernoulliLogit {
            f64::INFINITY
        } else {
            EXP_CLIP
        });
        total += eval.weights[k] * family.response_transform(g);
    }
    total
}

/// Mean of the environmental index at the covariate average, `X̄β`.
pub fn mean_index(data: &Dataset, beta: &DVector<f64>) -> f64 {
    let xbar = data.x_mean();
    dot_slice(xbar.as_slice(), beta.as_slice())
}
