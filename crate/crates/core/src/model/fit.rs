use nalgebra::{DMatrix, DVector};

use super::objective::{Evaluator, InnerFit};
use super::{leading_sign, Coefficients, Dataset, Family, FitResult, FitWarning, ModelSpec, Placement};
use crate::basis::SplineBasis;
use crate::error::{Error, Result};
use crate::inference::{InferenceConfig, LambdaPath};
use crate::linalg::SpdFactor;
use crate::optim::{minimize, BfgsOptions, BfgsOutcome};

const IRLS_MAX_ITER: usize = 100;

/// Unpenalized linear GLM fit.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coef: DVector<f64>,
    pub eta: DVector<f64>,
    pub weights: DVector<f64>,
    pub iterations: usize,
}

/// Linear regression (Gaussian) or linear GLM by iteratively reweighted
/// least squares on the given design. Diverging coefficients, as under
/// complete separation, are reported as an error rather than returned.
pub fn glm_irls(family: Family, design: &DMatrix<f64>, y: &DVector<f64>) -> Result<GlmFit> {
    let n = y.len();
    if design.nrows() != n {
        return Err(Error::Input("design and response lengths differ".into()));
    }
    if family == Family::GaussianLog {
        let factor = SpdFactor::new(&(design.transpose() * design))?;
        let coef = factor.solve_vec(&(design.transpose() * y));
        let eta = design * &coef;
        return Ok(GlmFit {
            coef,
            eta,
            weights: DVector::from_element(n, 1.0),
            iterations: 1,
        });
    }
    let mut eta = y.map(|v| match family {
        Family::Poisson => (v + 0.1).ln(),
        _ => ((v + 0.5) / (1.5 - v)).ln(),
    });
    let deviance = |eta: &DVector<f64>| -> f64 { y.iter().zip(eta.iter()).map(|(&yi, &e)| family.loss(yi, e)).sum() };
    let mut dev = deviance(&eta);
    let mut coef = DVector::zeros(design.ncols());
    for it in 1..=IRLS_MAX_ITER {
        let w = eta.map(|e| family.weight(e).max(1e-300));
        let z = DVector::from_fn(n, |i, _| eta[i] + (y[i] - family.mean(eta[i])) / w[i]);
        let wx = DMatrix::from_fn(n, design.ncols(), |i, j| w[i] * design[(i, j)]);
        let factor = SpdFactor::new(&(design.transpose() * &wx))?;
        let mut next = factor.solve_vec(&(wx.transpose() * z));
        let mut next_eta = design * &next;
        let mut next_dev = deviance(&next_eta);
        let mut halvings = 0;
        while !(next_dev.is_finite() && next_dev <= dev + 1e-12 * dev.abs()) && it > 1 && halvings < 30 {
            next = (&next + &coef) * 0.5;
            next_eta = design * &next;
            next_dev = deviance(&next_eta);
            halvings += 1;
        }
        let change = (dev - next_dev).abs() / (next_dev.abs() + 0.1);
        coef = next;
        eta = next_eta;
        dev = next_dev;
        if !dev.is_finite() {
            return Err(Error::Separation { iterations: it });
        }
        if it > 1 && change < 1e-12 {
            let saturated = family == Family::BernoulliLogit && eta.amax() > 30.0;
            if saturated {
                return Err(Error::Separation { iterations: it });
            }
            let weights = eta.map(|e| family.weight(e));
            return Ok(GlmFit {
                coef,
                eta,
                weights,
                iterations: it,
            });
        }
    }
    Err(Error::Separation {
        iterations: IRLS_MAX_ITER,
    })
}

/// Starting values from a linear (GLM) regression on `[1, X, A]`: `β₀` is
/// the normalized `X` slope, `γ₀` the matching `A` slope, and `d₀` the
/// spline coefficients of the implied affine link on a basis spanning the
/// starting index range.
pub fn linear_start(spec: &ModelSpec, data: &Dataset) -> Result<(Coefficients, SplineBasis)> {
    data.check_spec(spec)?;
    let (n, p, q) = (data.n(), spec.p, spec.q);
    let design = DMatrix::from_fn(n, 1 + p + q, |i, j| match j {
        0 => 1.0,
        j if j <= p => data.x[(i, j - 1)],
        j => data.a[(i, j - 1 - p)],
    });
    let glm = glm_irls(spec.family, &design, &data.y).or_else(|err| match err {
        // fall back to least squares on the working scale
        Error::Separation { .. } => {
            let ys = data.y.map(|v| match spec.family {
                Family::BernoulliLogit => 4.0 * (v - 0.5),
                _ => (v + 0.5).ln(),
            });
            glm_irls(Family::GaussianLog, &design, &ys)
        }
        other => Err(other),
    })?;
    let intercept = glm.coef[0];
    let bx = glm.coef.rows(1, p).into_owned();
    let ba = glm.coef.rows(1 + p, q).into_owned();
    let mut scale = bx.norm();
    let beta = if scale > 1e-12 * (1.0 + intercept.abs()) && scale.is_finite() {
        let sign = leading_sign(&bx);
        scale *= sign;
        &bx / scale
    } else {
        scale = 1.0;
        DVector::from_element(p, 1.0 / (p as f64).sqrt())
    };
    let gamma = match spec.placement {
        Placement::InsideIndex => &ba / scale,
        Placement::OutsideIndex => ba,
    };
    let mut index = &data.x * &beta;
    if spec.placement == Placement::InsideIndex && q > 0 {
        index += &data.a * &gamma;
    }
    let basis = SplineBasis::for_index_range(spec.degree, spec.dim, index.as_slice(), spec.fit.domain_pad)?;
    let d = basis.affine_coefficients(intercept, scale);
    Ok((Coefficients { beta, gamma, d }, basis))
}

struct Run {
    outcome: BfgsOutcome,
    inner: InnerFit,
    basis: SplineBasis,
    index: DVector<f64>,
}

/// Penalized fit at one smoothing parameter.
///
/// The spline coefficients (and any additive `γ`) are solved exactly for
/// each trial index, so the quasi-Newton search runs over `β` (and `γ`
/// inside the index) alone. The search is run twice, the second run
/// restarted from the first on a basis rebuilt around the current index
/// range; up to `max_restarts` further runs follow if the last one did not
/// converge or left index values outside the spline domain.
///
/// With `init` given, its `β` and `γ` seed the search and its `d` is read on
/// a basis spanning the initial index range.
pub fn fit(spec: &ModelSpec, data: &Dataset, lambda: f64, init: Option<&Coefficients>) -> Result<FitResult> {
    let start = match init {
        Some(c) => {
            data.check_spec(spec)?;
            let index = start_index(spec, data, c)?;
            let basis =
                SplineBasis::for_index_range(spec.degree, spec.dim, index.as_slice(), spec.fit.domain_pad)?;
            (c.clone(), basis)
        }
        None => linear_start(spec, data)?,
    };
    fit_from(spec, data, lambda, start.0, start.1)
}

fn start_index(spec: &ModelSpec, data: &Dataset, c: &Coefficients) -> Result<DVector<f64>> {
    if c.beta.len() != spec.p || c.gamma.len() != spec.q || c.d.len() != spec.dim {
        return Err(Error::Input("initial coefficients do not match the model dimensions".into()));
    }
    let norm = c.beta.norm();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::DegenerateIndex);
    }
    let mut index = &data.x * (&c.beta / norm);
    if spec.placement == Placement::InsideIndex && spec.q > 0 {
        index += &data.a * &c.gamma;
    }
    Ok(index)
}

fn fit_from(
    spec: &ModelSpec,
    data: &Dataset,
    lambda: f64,
    start: Coefficients,
    start_basis: SplineBasis,
) -> Result<FitResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Input(format!("smoothing parameter must be positive, got {lambda}")));
    }
    data.check_spec(spec)?;
    let (p, qi, k) = (spec.p, spec.q_inside(), spec.dim);
    let cfg = &spec.fit;
    let opts = BfgsOptions {
        max_iter: cfg.max_iter,
        grad_tol: cfg.grad_tol,
        rel_f_tol: cfg.rel_f_tol,
        ..Default::default()
    };

    let first = Evaluator::new(spec, data, start_basis.clone(), lambda)?;
    let initial_objective = first.objective_at(&start)?;
    let mut params = DVector::zeros(p + qi);
    params.rows_mut(0, p).copy_from(&start.beta);
    if qi > 0 {
        params.rows_mut(p, qi).copy_from(&start.gamma);
    }
    let mut warm = {
        let mut t = DVector::zeros(first.n_theta());
        t.rows_mut(0, k).copy_from(&start.d);
        if spec.q_outside() > 0 {
            t.rows_mut(k, spec.q).copy_from(&start.gamma);
        }
        Some(t)
    };

    let mut best: Option<Run> = None;
    let mut runs = 0;
    let mut iterations = 0;
    let mut jittered = false;
    let max_runs = 2 + cfg.max_restarts;
    let mut basis = start_basis;
    loop {
        let ev = Evaluator::new(spec, data, basis.clone(), lambda)?;
        let outcome = {
            let mut warm_run = warm.clone();
            minimize(
                |x| {
                    // outside the domain the clamped basis is flat, which
                    // would let the index buy curvature the penalty never sees
                    if !ev.index_within_domain(x) {
                        return (f64::INFINITY, DVector::zeros(x.len()));
                    }
                    match ev.profile(x, &mut warm_run) {
                        Ok((f, g, _)) => (f, g),
                        Err(_) => (f64::INFINITY, DVector::zeros(x.len())),
                    }
                },
                params.clone(),
                &opts,
            )
        };
        runs += 1;
        iterations += outcome.iterations;
        let beta_raw = outcome.x.rows(0, p).into_owned();
        let gamma_in = outcome.x.rows(p, qi).into_owned();
        let index = ev.index(&beta_raw, &gamma_in)?;
        let rows = ev.rows(&index, 0)?;
        let inner = ev.inner_solve(&rows, warm.as_ref())?;
        jittered |= inner.jittered;
        let clamped = index.iter().any(|&s| !basis.contains(s));
        let done = runs >= 2 && outcome.converged() && inner.converged && !clamped;

        params = outcome.x.clone();
        warm = None;
        let replace = best.as_ref().is_none_or(|b| inner.value <= b.inner.value || done);
        if replace {
            best = Some(Run {
                outcome,
                inner,
                basis: basis.clone(),
                index: index.clone(),
            });
        }
        if done || runs >= max_runs {
            break;
        }
        basis = SplineBasis::for_index_range(spec.degree, spec.dim, index.as_slice(), cfg.domain_pad)?;
    }

    let run = best.expect("at least one optimizer run");
    let beta_raw = run.outcome.x.rows(0, p).into_owned();
    let norm = beta_raw.norm();
    let mut beta = &beta_raw / norm;
    let mut gamma = DVector::zeros(spec.q);
    let mut d = run.inner.theta.rows(0, k).into_owned();
    let mut basis = run.basis;
    let mut index = run.index;
    match spec.placement {
        Placement::InsideIndex => {
            if qi > 0 {
                gamma.copy_from(&run.outcome.x.rows(p, qi));
            }
        }
        Placement::OutsideIndex => {
            if spec.q > 0 {
                gamma.copy_from(&run.inner.theta.rows(k, spec.q));
            }
        }
    }
    if leading_sign(&beta) < 0.0 {
        // g(E) = g̃(−E) with g̃ on the mirrored basis and reversed coefficients
        beta = -beta;
        if spec.placement == Placement::InsideIndex {
            gamma = -gamma;
        }
        index = -index;
        basis = basis.mirrored();
        d = DVector::from_iterator(k, d.iter().rev().copied());
    }

    let mut warnings = Vec::new();
    if data.n() < k + spec.p + spec.q {
        warnings.push(FitWarning::RankDeficient);
    }
    if jittered {
        warnings.push(FitWarning::Jittered);
    }
    if index.iter().any(|&s| !basis.contains(s)) {
        warnings.push(FitWarning::Clamped);
    }
    let eta = run.inner.eta.clone();
    let mean = eta.map(|e| spec.family.mean(e));
    Ok(FitResult {
        lambda,
        coeffs: Coefficients { beta, gamma, d },
        basis,
        index_values: index,
        eta,
        mean,
        objective: run.inner.value,
        initial_objective,
        converged: run.outcome.converged() && run.inner.converged,
        n_restarts_used: runs.saturating_sub(2),
        iterations,
        warnings,
    })
}

/// Fits every grid value in ascending order, each warm-started from its
/// predecessor when configured, and attaches GCV and variance summaries.
pub fn fit_path(spec: &ModelSpec, data: &Dataset) -> Result<LambdaPath> {
    fit_path_with(spec, data, &InferenceConfig::default())
}

pub fn fit_path_with(spec: &ModelSpec, data: &Dataset, config: &InferenceConfig) -> Result<LambdaPath> {
    let fits = fit_grid(spec, data)?;
    LambdaPath::from_fits(spec, data, fits, config)
}

/// The per-λ fits of a path without the inference summaries.
pub fn fit_grid(spec: &ModelSpec, data: &Dataset) -> Result<Vec<FitResult>> {
    spec.validate()?;
    let (start, start_basis) = linear_start(spec, data)?;
    let mut fits: Vec<FitResult> = Vec::with_capacity(spec.lambda_grid.len());
    for &lambda in &spec.lambda_grid {
        let result = match fits.last() {
            Some(prev) if spec.fit.warm_start => {
                fit_from(spec, data, lambda, prev.coeffs.clone(), prev.basis.clone())?
            }
            _ => fit_from(spec, data, lambda, start.clone(), start_basis.clone())?,
        };
        fits.push(result);
    }
    Ok(fits)
}
