//! Smoother matrices, GCV, residual variance and cross-λ coefficient
//! covariances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::basis::penalty_matrix;
use crate::error::{Error, Result};
use crate::linalg::penalized_inverse;
use crate::model::{Dataset, Family, FitResult, ModelSpec, Placement};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    /// Keep the index-coefficient blocks in the coefficient covariance
    /// instead of treating the index as known.
    pub retain_index_block: bool,
    /// Count extra covariates estimated inside the index against the
    /// residual degrees of freedom, alongside the `p` index coefficients.
    pub subtract_extra: bool,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            retain_index_block: false,
            subtract_extra: true,
        }
    }
}

/// Dense per-fit matrices: the design `Z` (`C = [Φ | A_out]`, optionally
/// followed by index columns), the inverse curvature and the fit weights.
#[derive(Debug, Clone)]
pub(crate) struct FitMats {
    pub z: DMatrix<f64>,
    pub h_inv: DMatrix<f64>,
    pub w: DVector<f64>,
    pub n_theta: usize,
    pub trace_s: f64,
    pub trace_ss: f64,
    pub jittered: bool,
}

impl FitMats {
    pub(crate) fn new(spec: &ModelSpec, data: &Dataset, fit: &FitResult, retain_index: bool) -> Result<Self> {
        let fam = spec.family;
        let n = data.n();
        let k = fit.basis.dim();
        let q_out = match spec.placement {
            Placement::OutsideIndex => spec.q,
            Placement::InsideIndex => 0,
        };
        let n_theta = k + q_out;
        let phi = fit.basis.design_matrix(fit.index_values.as_slice(), 0)?;
        let w = fit.weights(fam);

        let extra = if retain_index { index_columns(spec, data, fit)? } else { DMatrix::zeros(n, 0) };
        let r = n_theta + extra.ncols();
        let mut z = DMatrix::zeros(n, r);
        z.view_mut((0, 0), (n, k)).copy_from(&phi);
        if q_out > 0 {
            z.view_mut((0, k), (n, q_out)).copy_from(&data.a);
        }
        if extra.ncols() > 0 {
            z.view_mut((0, n_theta), (n, extra.ncols())).copy_from(&extra);
        }

        let wz = DMatrix::from_fn(n, r, |i, j| w[i] * z[(i, j)]);
        let gram = z.transpose() * &wz;
        let pen = penalty_matrix(&fit.basis)?.entries;
        let scale = fam.penalty_factor() * fit.lambda;
        let (h_inv, jittered) = penalized_inverse(&gram, &pen, scale)?;

        // traces over the θ block only; index columns are not part of the smoother
        let (trace_s, trace_ss) = {
            let t_inv = if retain_index {
                penalized_inverse(&gram.view((0, 0), (n_theta, n_theta)).into_owned(), &pen, scale)?.0
            } else {
                h_inv.clone()
            };
            let g = gram.view((0, 0), (n_theta, n_theta)).into_owned();
            let a = &t_inv * &g;
            let c = z.view((0, 0), (n, n_theta));
            let w2c = DMatrix::from_fn(n, n_theta, |i, j| w[i] * w[i] * c[(i, j)]);
            let g2 = c.transpose() * w2c;
            let ctc = c.transpose() * c;
            let tr_ss = (&t_inv * g2 * &t_inv).component_mul(&ctc).sum();
            (a.trace(), tr_ss)
        };
        Ok(Self {
            z,
            h_inv,
            w,
            n_theta,
            trace_s,
            trace_ss,
            jittered,
        })
    }

    /// `C` without any index columns.
    pub(crate) fn c(&self) -> nalgebra::DMatrixView<'_, f64> {
        self.z.columns(0, self.n_theta)
    }
}

/// Derivative columns of `η` with respect to the index parameters:
/// `diag(g′(E)) X U` with `U` an orthonormal basis of the tangent space of
/// the unit sphere at `β`, and `diag(g′(E)) A` for extra covariates inside
/// the index.
fn index_columns(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<DMatrix<f64>> {
    let rows = fit.basis.local_rows(fit.index_values.as_slice(), 1)?;
    let slope = rows.apply(1, &fit.coeffs.d);
    let p = spec.p;
    let b = &fit.coeffs.beta;
    let proj = DMatrix::identity(p, p) - b * b.transpose();
    let eig = SymmetricEigen::new(proj);
    let tangent: Vec<usize> = (0..p).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let u = DMatrix::from_fn(p, tangent.len(), |i, j| eig.eigenvectors[(i, tangent[j])]);
    let xu = &data.x * u;
    let qi = spec.q_inside();
    let n = data.n();
    Ok(DMatrix::from_fn(n, xu.ncols() + qi, |i, j| {
        if j < xu.ncols() {
            slope[i] * xu[(i, j)]
        } else {
            slope[i] * data.a[(i, j - xu.ncols())]
        }
    }))
}

/// Fits over the smoothing grid with their GCV scores and the variance
/// summaries shared by all covariance computations.
#[derive(Debug, Clone)]
pub struct LambdaPath {
    pub spec: ModelSpec,
    pub data: Dataset,
    pub config: InferenceConfig,
    pub grid: Vec<f64>,
    pub fits: Vec<FitResult>,
    pub gcv: Vec<f64>,
    /// Position of the GCV minimizer (zero-based).
    pub selected: usize,
    pub sigma2_hat: Option<f64>,
    /// Fit weights at the GCV-selected smoothing parameter.
    pub weight_ref: DVector<f64>,
    pub all_converged: bool,
    pub(crate) mats: Vec<FitMats>,
}

impl LambdaPath {
    pub fn from_fits(spec: &ModelSpec, data: &Dataset, fits: Vec<FitResult>, config: &InferenceConfig) -> Result<Self> {
        if fits.len() != spec.lambda_grid.len() {
            return Err(Error::Input("one fit per grid value is required".into()));
        }
        let retain = config.retain_index_block;
        let mats = fits
            .iter()
            .map(|f| FitMats::new(spec, data, f, retain))
            .collect::<Result<Vec<_>>>()?;
        let gcv: Vec<f64> = fits
            .iter()
            .zip(&mats)
            .map(|(f, m)| gcv_value(spec.family, data, f, m.trace_s).unwrap_or(f64::INFINITY))
            .collect();
        let pick = |only_converged: bool| {
            (0..fits.len())
                .filter(|&i| gcv[i].is_finite() && (!only_converged || fits[i].converged))
                .min_by(|&a, &b| gcv[a].total_cmp(&gcv[b]))
        };
        let selected = pick(true)
            .or_else(|| pick(false))
            .ok_or_else(|| Error::DegreesOfFreedom("every grid value has tr(S) ≥ n".into()))?;
        let all_converged = fits.iter().all(|f| f.converged);
        let weight_ref = fits[selected].weights(spec.family);
        let mut path = Self {
            spec: spec.clone(),
            data: data.clone(),
            config: *config,
            grid: spec.lambda_grid.clone(),
            fits,
            gcv,
            selected,
            sigma2_hat: None,
            weight_ref,
            all_converged,
            mats,
        };
        if spec.family == Family::GaussianLog {
            path.sigma2_hat = sigma2_hat(&path).ok();
        }
        Ok(path)
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn selected_fit(&self) -> &FitResult {
        &self.fits[self.selected]
    }

    pub fn trace_s(&self, i: usize) -> f64 {
        self.mats[i].trace_s
    }

    /// Residual degrees of freedom `n − 2tr(S) + tr(SSᵀ) − (p + q)` at grid
    /// position `i`.
    pub fn residual_df(&self, i: usize) -> f64 {
        let n = self.data.n() as f64;
        let extra = if self.config.subtract_extra { self.spec.q_inside() } else { 0 };
        let m = &self.mats[i];
        n - 2.0 * m.trace_s + m.trace_ss - (self.spec.p + extra) as f64
    }

    /// Multiplier of the middle term in the covariance sandwich.
    pub(crate) fn dispersion(&self) -> Result<f64> {
        match self.spec.family {
            Family::GaussianLog => self.sigma2_hat.map_or_else(|| sigma2_hat(self), Ok),
            _ => Ok(1.0),
        }
    }

    /// Middle weights: `I` for the Gaussian family, the fit weights at the
    /// GCV choice otherwise.
    pub(crate) fn middle_weights(&self) -> DVector<f64> {
        match self.spec.family {
            Family::GaussianLog => DVector::from_element(self.data.n(), 1.0),
            _ => self.weight_ref.clone(),
        }
    }

    /// Covariance of the inner parameters `θ = (d, γ_out)` between grid
    /// positions `i` and `j`.
    pub fn theta_cov(&self, i: usize, j: usize) -> Result<DMatrix<f64>> {
        let (mi, mj) = (&self.mats[i], &self.mats[j]);
        let w = self.middle_weights();
        let wzj = DMatrix::from_fn(mj.z.nrows(), mj.z.ncols(), |r, c| w[r] * mj.z[(r, c)]);
        let middle = mi.z.transpose() * wzj;
        let full = &mi.h_inv * middle * &mj.h_inv * self.dispersion()?;
        Ok(full.view((0, 0), (mi.n_theta, mj.n_theta)).into_owned())
    }
}

/// Cross-covariance of the spline coefficients at two smoothing parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefCovariance {
    pub lambda_i: f64,
    pub lambda_j: f64,
    pub matrix: DMatrix<f64>,
}

/// `cov(d̂_{λᵢ}, d̂_{λⱼ})`.
pub fn coef_cov(path: &LambdaPath, i: usize, j: usize) -> Result<CoefCovariance> {
    if i >= path.len() || j >= path.len() {
        return Err(Error::Input(format!("grid positions ({i}, {j}) out of range")));
    }
    let k = path.spec.dim;
    let theta = path.theta_cov(i, j)?;
    Ok(CoefCovariance {
        lambda_i: path.grid[i],
        lambda_j: path.grid[j],
        matrix: theta.view((0, 0), (k, k)).into_owned(),
    })
}

/// Gaussian sandwich `H_i⁻¹ J H_j⁻¹` built directly from the Hessian of the
/// penalized sum of squares, `H = 2(CᵀC + λP)`, and score covariance
/// `J = 4σ̂² C_iᵀC_j`, restricted to the spline block.
pub fn gaussian_sandwich(path: &LambdaPath, i: usize, j: usize) -> Result<DMatrix<f64>> {
    if path.spec.family != Family::GaussianLog {
        return Err(Error::Unsupported("the least-squares sandwich applies to the Gaussian family".into()));
    }
    let sigma2 = sigma2_hat(path)?;
    let hess = |idx: usize| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let fit = &path.fits[idx];
        let c = path.mats[idx].c().into_owned();
        let pen = penalty_matrix(&fit.basis)?.entries * 2.0;
        let (h_inv, _) = penalized_inverse(&(c.transpose() * &c * 2.0), &pen, fit.lambda)?;
        Ok((h_inv, c))
    };
    let (hi, ci) = hess(i)?;
    let (hj, cj) = hess(j)?;
    let j_mat = ci.transpose() * cj * (4.0 * sigma2);
    let k = path.spec.dim;
    Ok((hi * j_mat * hj).view((0, 0), (k, k)).into_owned())
}

/// `S_λ = C (CᵀWC + κλP)⁻¹ CᵀW` with `C = [Φ | A_out]`.
pub fn smoother_matrix(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<DMatrix<f64>> {
    let m = FitMats::new(spec, data, fit, false)?;
    let c = m.c();
    let wct = DMatrix::from_fn(c.ncols(), c.nrows(), |r, s| m.w[s] * c[(s, r)]);
    Ok(c * &m.h_inv * wct)
}

/// Effective degrees of freedom `tr(S_λ)`.
pub fn trace_smoother(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<f64> {
    Ok(FitMats::new(spec, data, fit, false)?.trace_s)
}

/// `n ‖√W (z − η̂)‖² / (n − tr S)²` with the IRLS working response
/// `z = η̂ + W⁻¹(Y − μ̂)`.
pub fn gcv(spec: &ModelSpec, data: &Dataset, fit: &FitResult) -> Result<f64> {
    let trace = trace_smoother(spec, data, fit)?;
    gcv_value(spec.family, data, fit, trace)
}

fn gcv_value(family: Family, data: &Dataset, fit: &FitResult, trace_s: f64) -> Result<f64> {
    let n = data.n() as f64;
    if trace_s >= n {
        return Err(Error::DegreesOfFreedom(format!(
            "effective degrees of freedom {trace_s} reach the sample size {n}"
        )));
    }
    let pearson: f64 = data
        .y
        .iter()
        .zip(fit.eta.iter())
        .map(|(&y, &e)| {
            let r = y - family.mean(e);
            r * r / family.weight(e)
        })
        .sum();
    Ok(n * pearson / (n - trace_s).powi(2))
}

/// `σ̂² = RSS / df_res` at the GCV choice, Gaussian family only.
pub fn sigma2_hat(path: &LambdaPath) -> Result<f64> {
    if path.spec.family != Family::GaussianLog {
        return Err(Error::Unsupported("σ̂² is defined for the Gaussian family only".into()));
    }
    let i = path.selected;
    let df = path.residual_df(i);
    if !(df > 0.0) {
        return Err(Error::DegreesOfFreedom(format!("residual degrees of freedom {df} are not positive")));
    }
    let fit = &path.fits[i];
    let rss: f64 = path.data.y.iter().zip(fit.eta.iter()).map(|(y, e)| (y - e).powi(2)).sum();
    Ok(rss / df)
}
