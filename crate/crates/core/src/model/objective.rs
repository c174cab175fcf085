use nalgebra::{DMatrix, DVector};

use super::{Coefficients, Dataset, Family, ModelSpec, Placement};
use crate::basis::{penalty_matrix, LocalRows, SplineBasis};
use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

const NEWTON_MAX_ITER: usize = 100;

/// Objective, gradient and inner spline solves for one model, basis and λ.
///
/// The inner parameter vector `θ = (d, γ_out)` stacks the spline
/// coefficients with any additive extra-covariate coefficients; it enters
/// the linear predictor through `C = [Φ | A_out]`.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub spec: &'a ModelSpec,
    pub data: &'a Dataset,
    pub basis: SplineBasis,
    pub penalty: DMatrix<f64>,
    /// Quadrature root of `penalty`, used wherever `P` meets `d`.
    pub penalty_root: DMatrix<f64>,
    pub lambda: f64,
}

/// Minimizer of the objective over `θ = (d, γ_out)` at a fixed index.
#[derive(Debug, Clone)]
pub struct InnerFit {
    pub theta: DVector<f64>,
    pub value: f64,
    pub eta: DVector<f64>,
    pub jittered: bool,
    pub converged: bool,
}

impl<'a> Evaluator<'a> {
    pub fn new(spec: &'a ModelSpec, data: &'a Dataset, basis: SplineBasis, lambda: f64) -> Result<Self> {
        data.check_spec(spec)?;
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Input(format!("smoothing parameter must be nonnegative, got {lambda}")));
        }
        if basis.dim() != spec.dim || basis.degree() != spec.degree {
            return Err(Error::Input("basis does not match the model's degree and dimension".into()));
        }
        let pm = penalty_matrix(&basis)?;
        Ok(Self {
            spec,
            data,
            basis,
            penalty: pm.entries,
            penalty_root: pm.root,
            lambda,
        })
    }

    pub fn family(&self) -> Family {
        self.spec.family
    }

    pub fn a_outside(&self) -> Option<&DMatrix<f64>> {
        (self.spec.placement == Placement::OutsideIndex && self.spec.q > 0).then_some(&self.data.a)
    }

    pub fn n_theta(&self) -> usize {
        self.spec.dim + self.spec.q_outside()
    }

    /// Index values `X β/‖β‖ (+ A γ)` for raw index coefficients.
    pub fn index(&self, beta_raw: &DVector<f64>, gamma_in: &DVector<f64>) -> Result<DVector<f64>> {
        let norm = beta_raw.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::DegenerateIndex);
        }
        let mut e = &self.data.x * (beta_raw / norm);
        if self.spec.q_inside() > 0 {
            e += &self.data.a * gamma_in;
        }
        Ok(e)
    }

    /// Whether every index value at the packed `(β_raw, γ_inside)` lies in
    /// the spline domain.
    pub fn index_within_domain(&self, params: &DVector<f64>) -> bool {
        let p = self.spec.p;
        let beta_raw = params.rows(0, p).into_owned();
        let gamma_in = params.rows(p, self.spec.q_inside()).into_owned();
        self.index(&beta_raw, &gamma_in)
            .is_ok_and(|e| e.iter().all(|&s| self.basis.contains(s)))
    }

    pub fn rows(&self, index: &DVector<f64>, n_ders: usize) -> Result<LocalRows> {
        self.basis.local_rows(index.as_slice(), n_ders)
    }

    /// `C θ`.
    pub fn linear_predictor(&self, rows: &LocalRows, theta: &DVector<f64>) -> DVector<f64> {
        let k = self.spec.dim;
        let d = theta.rows(0, k).into_owned();
        let mut eta = rows.apply(0, &d);
        if let Some(a) = self.a_outside() {
            eta += a * theta.rows(k, a.ncols());
        }
        eta
    }

    /// `Cᵀ diag(w) C`.
    pub fn weighted_gram(&self, rows: &LocalRows, w: &DVector<f64>) -> DMatrix<f64> {
        let k = self.spec.dim;
        let g = rows.weighted_gram(w);
        match self.a_outside() {
            None => g,
            Some(a) => {
                let q = a.ncols();
                let mut out = DMatrix::zeros(k + q, k + q);
                out.view_mut((0, 0), (k, k)).copy_from(&g);
                let wa = DMatrix::from_fn(a.nrows(), q, |i, j| w[i] * a[(i, j)]);
                for j in 0..q {
                    let col = rows.transpose_apply(0, &wa.column(j).into_owned());
                    out.view_mut((0, k + j), (k, 1)).copy_from(&col);
                    out.view_mut((k + j, 0), (1, k)).copy_from(&col.transpose());
                }
                out.view_mut((k, k), (q, q)).copy_from(&(a.transpose() * wa));
                out
            }
        }
    }

    /// `Cᵀ v`.
    pub fn transpose_apply(&self, rows: &LocalRows, v: &DVector<f64>) -> DVector<f64> {
        let k = self.spec.dim;
        let phi_t = rows.transpose_apply(0, v);
        match self.a_outside() {
            None => phi_t,
            Some(a) => {
                let mut out = DVector::zeros(k + a.ncols());
                out.rows_mut(0, k).copy_from(&phi_t);
                out.rows_mut(k, a.ncols()).copy_from(&(a.transpose() * v));
                out
            }
        }
    }

    /// Penalty matrix padded with zeros for the `γ_out` block.
    pub fn padded_penalty(&self) -> DMatrix<f64> {
        let k = self.spec.dim;
        let m = self.n_theta();
        let mut out = DMatrix::zeros(m, m);
        out.view_mut((0, 0), (k, k)).copy_from(&self.penalty);
        out
    }

    /// `CᵀWC + κλP̃`, the curvature of the objective in `θ` up to a common factor.
    pub fn information(&self, rows: &LocalRows, w: &DVector<f64>) -> DMatrix<f64> {
        let kappa = self.family().penalty_factor();
        self.weighted_gram(rows, w) + self.padded_penalty() * (kappa * self.lambda)
    }

    fn penalty_value(&self, theta: &DVector<f64>) -> f64 {
        let d = theta.rows(0, self.spec.dim);
        self.lambda * (&self.penalty_root * d).norm_squared()
    }

    /// Gradient of the penalty term in `θ`, `2λP̃θ`, through the root.
    fn penalty_gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let k = self.spec.dim;
        let rd = &self.penalty_root * theta.rows(0, k);
        let mut out = DVector::zeros(theta.len());
        out.rows_mut(0, k).copy_from(&(self.penalty_root.tr_mul(&rd) * (2.0 * self.lambda)));
        out
    }

    /// Unpenalized loss `Σ ℓ(yᵢ, ηᵢ)`, failing on the first non-finite term.
    pub fn loss(&self, eta: &DVector<f64>) -> Result<f64> {
        let fam = self.family();
        let mut total = 0.0;
        for (i, (&y, &e)) in self.data.y.iter().zip(eta.iter()).enumerate() {
            let l = fam.loss(y, e);
            if !l.is_finite() {
                return Err(Error::Overflow { observation: i });
            }
            total += l;
        }
        Ok(total)
    }

    fn value(&self, rows: &LocalRows, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let eta = self.linear_predictor(rows, theta);
        Ok((self.loss(&eta)? + self.penalty_value(theta), eta))
    }

    /// Exact minimizer over `θ` at fixed index values: a penalized least
    /// squares solve (Gaussian) or penalized Newton iterations (GLM).
    pub fn inner_solve(&self, rows: &LocalRows, warm: Option<&DVector<f64>>) -> Result<InnerFit> {
        let fam = self.family();
        let y = &self.data.y;
        if fam == Family::GaussianLog {
            let ones = DVector::from_element(y.len(), 1.0);
            let m = self.information(rows, &ones);
            let factor = SpdFactor::new(&m)?;
            let mut theta = factor.solve_vec(&self.transpose_apply(rows, y));
            // refinement against the stably evaluated normal equations; the
            // factor alone loses digits along the penalty's null space at large λ
            for _ in 0..2 {
                let resid = y - self.linear_predictor(rows, &theta);
                let r = self.transpose_apply(rows, &resid) - self.penalty_gradient(&theta) * 0.5;
                theta += factor.solve_vec(&r);
            }
            let (value, eta) = self.value(rows, &theta)?;
            return Ok(InnerFit {
                theta,
                value,
                eta,
                jittered: factor.jittered(),
                converged: true,
            });
        }

        let pen2 = self.padded_penalty() * (2.0 * self.lambda);
        let mut jittered = false;
        let mut theta = match warm.filter(|t| t.len() == self.n_theta()) {
            Some(t) => t.clone(),
            None => self.cold_start(rows, &pen2, &mut jittered)?,
        };
        let (mut value, mut eta) = match self.value(rows, &theta) {
            Ok(v) => v,
            Err(_) => {
                theta = self.cold_start(rows, &pen2, &mut jittered)?;
                self.value(rows, &theta)?
            }
        };
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let w = eta.map(|e| fam.weight(e));
            let resid = DVector::from_iterator(
                y.len(),
                y.iter().zip(eta.iter()).map(|(&yi, &e)| fam.dloss(yi, e)),
            );
            let grad = self.transpose_apply(rows, &resid) + self.penalty_gradient(&theta);
            let hess = self.weighted_gram(rows, &w) + &pen2;
            let factor = SpdFactor::new(&hess)?;
            jittered |= factor.jittered();
            let step = factor.solve_vec(&grad);
            let mut t = 1.0;
            let mut accepted = None;
            while t > 1e-10 {
                let cand = &theta - &step * t;
                if let Ok((v, e)) = self.value(rows, &cand) {
                    if v <= value + 1e-12 * value.abs() {
                        accepted = Some((cand, v, e));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((cand, v, e)) = accepted else {
                converged = grad.amax() < 1e-8 * (1.0 + value.abs());
                break;
            };
            let moved = (step.amax() * t) / (1.0 + theta.amax());
            let dropped = value - v;
            theta = cand;
            value = v;
            eta = e;
            if moved < 1e-11 || dropped.abs() < 1e-15 * (1.0 + value.abs()) {
                converged = true;
                break;
            }
        }
        Ok(InnerFit {
            theta,
            value,
            eta,
            jittered,
            converged,
        })
    }

    fn cold_start(&self, rows: &LocalRows, pen2: &DMatrix<f64>, jittered: &mut bool) -> Result<DVector<f64>> {
        let fam = self.family();
        let y = &self.data.y;
        let mu0 = y.map(|v| match fam {
            Family::Poisson => v + 0.1,
            Family::BernoulliLogit => (v + 0.5) / 2.0,
            Family::GaussianLog => v,
        });
        let eta0 = mu0.map(|m| match fam {
            Family::Poisson => m.ln(),
            Family::BernoulliLogit => (m / (1.0 - m)).ln(),
            Family::GaussianLog => m,
        });
        let w0 = eta0.map(|e| fam.weight(e));
        let z0 = DVector::from_iterator(
            y.len(),
            (0..y.len()).map(|i| eta0[i] + (y[i] - mu0[i]) / w0[i]),
        );
        let m = self.weighted_gram(rows, &w0) + pen2;
        let factor = SpdFactor::new(&m)?;
        *jittered |= factor.jittered();
        Ok(factor.solve_vec(&self.transpose_apply(rows, &w0.component_mul(&z0))))
    }

    /// Objective minimized over `θ` at index parameters `(β_raw, γ_in)`, with
    /// its gradient in those parameters. `warm` carries the inner solution
    /// between calls.
    pub fn profile(
        &self,
        params: &DVector<f64>,
        warm: &mut Option<DVector<f64>>,
    ) -> Result<(f64, DVector<f64>, InnerFit)> {
        let p = self.spec.p;
        let qi = self.spec.q_inside();
        let beta_raw = params.rows(0, p).into_owned();
        let gamma_in = params.rows(p, qi).into_owned();
        let index = self.index(&beta_raw, &gamma_in)?;
        let rows = self.rows(&index, 1)?;
        let inner = self.inner_solve(&rows, warm.as_ref())?;
        *warm = Some(inner.theta.clone());

        let fam = self.family();
        let d = inner.theta.rows(0, self.spec.dim).into_owned();
        let slope = rows.apply(1, &d);
        let chain = DVector::from_iterator(
            index.len(),
            (0..index.len()).map(|i| fam.dloss(self.data.y[i], inner.eta[i]) * slope[i]),
        );
        let mut grad = DVector::zeros(p + qi);
        grad.rows_mut(0, p)
            .copy_from(&self.beta_gradient(&beta_raw, &chain));
        if qi > 0 {
            grad.rows_mut(p, qi).copy_from(&(self.data.a.transpose() * &chain));
        }
        Ok((inner.value, grad, inner))
    }

    /// Gradient in raw `β` of a function of `β/‖β‖`, given the per-observation
    /// chain factors `∂f/∂Eᵢ`.
    fn beta_gradient(&self, beta_raw: &DVector<f64>, chain: &DVector<f64>) -> DVector<f64> {
        let norm = beta_raw.norm();
        let b = beta_raw / norm;
        let g = self.data.x.transpose() * chain;
        (&g - &b * b.dot(&g)) / norm
    }

    /// Penalized objective at explicit coefficients.
    pub fn objective_at(&self, coeffs: &Coefficients) -> Result<f64> {
        let (theta, index) = self.unpack(coeffs)?;
        let rows = self.rows(&index, 0)?;
        Ok(self.value(&rows, &theta)?.0)
    }

    /// Gradient at explicit coefficients, ordered `(d, β, γ)`.
    pub fn gradient_at(&self, coeffs: &Coefficients) -> Result<DVector<f64>> {
        let (theta, index) = self.unpack(coeffs)?;
        let rows = self.rows(&index, 1)?;
        let eta = self.linear_predictor(&rows, &theta);
        self.loss(&eta)?;
        let fam = self.family();
        let y = &self.data.y;
        let resid = DVector::from_iterator(y.len(), (0..y.len()).map(|i| fam.dloss(y[i], eta[i])));
        let k = self.spec.dim;
        let p = self.spec.p;
        let q = self.spec.q;

        let theta_grad =
            self.transpose_apply(&rows, &resid) + self.penalty_gradient(&theta);
        let slope = rows.apply(1, &coeffs.d);
        let chain = resid.component_mul(&slope);

        let mut out = DVector::zeros(k + p + q);
        out.rows_mut(0, k).copy_from(&theta_grad.rows(0, k));
        out.rows_mut(k, p).copy_from(&self.beta_gradient(&coeffs.beta, &chain));
        if q > 0 {
            match self.spec.placement {
                Placement::InsideIndex => {
                    out.rows_mut(k + p, q).copy_from(&(self.data.a.transpose() * &chain))
                }
                Placement::OutsideIndex => out.rows_mut(k + p, q).copy_from(&theta_grad.rows(k, q)),
            }
        }
        Ok(out)
    }

    fn unpack(&self, coeffs: &Coefficients) -> Result<(DVector<f64>, DVector<f64>)> {
        let (k, p, q) = (self.spec.dim, self.spec.p, self.spec.q);
        if coeffs.d.len() != k || coeffs.beta.len() != p || coeffs.gamma.len() != q {
            return Err(Error::Input(format!(
                "coefficient lengths (d {}, beta {}, gamma {}) do not match the model ({k}, {p}, {q})",
                coeffs.d.len(),
                coeffs.beta.len(),
                coeffs.gamma.len()
            )));
        }
        let mut theta = DVector::zeros(self.n_theta());
        theta.rows_mut(0, k).copy_from(&coeffs.d);
        let gamma_in = match self.spec.placement {
            Placement::InsideIndex => coeffs.gamma.clone(),
            Placement::OutsideIndex => {
                theta.rows_mut(k, q).copy_from(&coeffs.gamma);
                DVector::zeros(0)
            }
        };
        let index = self.index(&coeffs.beta, &gamma_in)?;
        Ok((theta, index))
    }
}

/// Penalized objective: squared error on `log Y` (Gaussian) or negative
/// log-likelihood (Poisson, logit), plus `λ dᵀPd`.
pub fn objective(
    spec: &ModelSpec,
    data: &Dataset,
    basis: &SplineBasis,
    coeffs: &Coefficients,
    lambda: f64,
) -> Result<f64> {
    Evaluator::new(spec, data, basis.clone(), lambda)?.objective_at(coeffs)
}

/// Analytic gradient of [`objective`] ordered `(d, β, γ)`. The `β` block is
/// taken with respect to the raw (unnormalized) coefficients, so it is
/// tangent to the unit sphere at a unit-norm `β`.
pub fn gradient(
    spec: &ModelSpec,
    data: &Dataset,
    basis: &SplineBasis,
    coeffs: &Coefficients,
    lambda: f64,
) -> Result<DVector<f64>> {
    Evaluator::new(spec, data, basis.clone(), lambda)?.gradient_at(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::eval_basis;
    use crate::model::{logistic, softplus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(family: Family, placement: Placement, q: usize, seed: u64) -> (ModelSpec, Dataset, SplineBasis) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, p, k) = (20, 3, 8);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(0.0..1.0));
        let a = DMatrix::from_fn(n, q, |_, _| rng.random_range(-0.5..0.5));
        let y = DVector::from_fn(n, |_, _| match family {
            Family::GaussianLog => rng.random_range(0.5..3.0),
            Family::Poisson => rng.random_range(0..6) as f64,
            Family::BernoulliLogit => (rng.random_range(0.0..1.0) < 0.5) as u8 as f64,
        });
        let spec = ModelSpec::new(family, p, q).with_basis(3, k).with_placement(placement);
        let data = Dataset::new(family, x, a, y).unwrap();
        let basis = SplineBasis::uniform(3, k, -0.5, 2.5).unwrap();
        (spec, data, basis)
    }

    fn random_coeffs(spec: &ModelSpec, seed: u64) -> Coefficients {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta = DVector::from_fn(spec.p, |_, _| rng.random_range(0.2..1.0));
        Coefficients {
            beta: &beta / beta.norm(),
            gamma: DVector::from_fn(spec.q, |_, _| rng.random_range(-0.3..0.3)),
            d: DVector::from_fn(spec.dim, |_, _| rng.random_range(-1.0..1.0)),
        }
    }

    #[test]
    fn softplus_is_overflow_safe() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((softplus(0.3) - (1.0 + 0.3f64.exp()).ln()).abs() < 1e-15);
        assert!((logistic(-800.0)).abs() < 1e-300);
    }

    #[test]
    fn poisson_objective_at_zero_link() {
        let (spec, data, basis) = random_problem(Family::Poisson, Placement::InsideIndex, 0, 1);
        let mut c = random_coeffs(&spec, 2);
        c.d = DVector::zeros(spec.dim);
        for lambda in [0.0, 1.0, 1e5] {
            let v = objective(&spec, &data, &basis, &c, lambda).unwrap();
            assert!((v - data.n() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn vectorized_objective_matches_naive_loop() {
        for family in [Family::GaussianLog, Family::Poisson, Family::BernoulliLogit] {
            let (spec, data, basis) = random_problem(family, Placement::InsideIndex, 0, 3);
            let c = random_coeffs(&spec, 4);
            let lambda = 0.37;
            let v = objective(&spec, &data, &basis, &c, lambda).unwrap();
            let pen = penalty_matrix(&basis).unwrap();
            let mut naive = 0.0;
            for i in 0..data.n() {
                let mut s = 0.0;
                for j in 0..spec.p {
                    s += data.x[(i, j)] * c.beta[j];
                }
                let g = eval_basis(&basis, s, 0).unwrap().dot(&c.d);
                let y = data.y[i];
                naive += match family {
                    Family::GaussianLog => (y - g).powi(2),
                    Family::Poisson => -(y * g - g.exp()),
                    Family::BernoulliLogit => -(y * g - (1.0 + g.exp()).ln()),
                };
            }
            naive += lambda * pen.quadratic_form(&c.d);
            assert!((v - naive).abs() < 1e-12 * (1.0 + naive.abs()), "{family:?}: {v} vs {naive}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        for (family, placement, q) in [
            (Family::GaussianLog, Placement::InsideIndex, 0),
            (Family::Poisson, Placement::InsideIndex, 2),
            (Family::BernoulliLogit, Placement::OutsideIndex, 2),
            (Family::GaussianLog, Placement::OutsideIndex, 1),
        ] {
            let (spec, data, basis) = random_problem(family, placement, q, 11);
            let c = random_coeffs(&spec, 12);
            let lambda = 0.05;
            let g = gradient(&spec, &data, &basis, &c, lambda).unwrap();
            let f = |c: &Coefficients| objective(&spec, &data, &basis, c, lambda).unwrap();
            let h = 1e-6;
            let k = spec.dim;
            for idx in 0..g.len() {
                let mut plus = c.clone();
                let mut minus = c.clone();
                let bump = |c: &mut Coefficients, delta: f64| {
                    if idx < k {
                        c.d[idx] += delta
                    } else if idx < k + spec.p {
                        c.beta[idx - k] += delta
                    } else {
                        c.gamma[idx - k - spec.p] += delta
                    }
                };
                bump(&mut plus, h);
                bump(&mut minus, -h);
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let err = (fd - g[idx]).abs() / (1e-3 + g[idx].abs().max(fd.abs()));
                assert!(err < 1e-5, "{family:?} coordinate {idx}: analytic {} fd {fd}", g[idx]);
            }
        }
    }

    #[test]
    fn zero_residual_gradient_is_penalty_only() {
        let (spec, mut data, basis) = random_problem(Family::GaussianLog, Placement::InsideIndex, 0, 5);
        let c = random_coeffs(&spec, 6);
        let ev = Evaluator::new(&spec, &data, basis.clone(), 0.0).unwrap();
        let index = ev.index(&c.beta, &DVector::zeros(0)).unwrap();
        let fitted = ev.rows(&index, 0).unwrap().apply(0, &c.d);
        data.y = fitted;
        let lambda = 0.8;
        let g = gradient(&spec, &data, &basis, &c, lambda).unwrap();
        let pen = penalty_matrix(&basis).unwrap().entries;
        let expected = &pen * &c.d * (2.0 * lambda);
        assert!((g.rows(0, spec.dim) - expected).amax() < 1e-8);
        let g0 = gradient(&spec, &data, &basis, &c, 0.0).unwrap();
        assert!(g0.amax() < 1e-8);
        assert!(objective(&spec, &data, &basis, &c, 0.0).unwrap().abs() < 1e-20);
    }

    #[test]
    fn profile_gradient_matches_finite_differences() {
        for family in [Family::GaussianLog, Family::Poisson, Family::BernoulliLogit] {
            let (spec, data, basis) = random_problem(family, Placement::InsideIndex, 1, 21);
            let ev = Evaluator::new(&spec, &data, basis, 0.5).unwrap();
            let params = DVector::from_vec(vec![0.6, 0.5, 0.62, 0.1]);
            let mut warm = None;
            let (_, g, _) = ev.profile(&params, &mut warm).unwrap();
            let h = 1e-6;
            for i in 0..params.len() {
                let mut up = params.clone();
                up[i] += h;
                let mut dn = params.clone();
                dn[i] -= h;
                let fu = ev.profile(&up, &mut None).unwrap().0;
                let fdn = ev.profile(&dn, &mut None).unwrap().0;
                let fd = (fu - fdn) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + g[i].abs()), "{family:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn overflow_names_observation() {
        let (spec, data, basis) = random_problem(Family::Poisson, Placement::InsideIndex, 0, 8);
        let mut c = random_coeffs(&spec, 9);
        c.d = DVector::from_element(spec.dim, 800.0);
        assert!(matches!(
            objective(&spec, &data, &basis, &c, 1.0),
            Err(Error::Overflow { observation: 0 })
        ));
    }
}
