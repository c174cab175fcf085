//! Quasi-Newton (BFGS) minimization with a strong-Wolfe line search.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Converged when `‖∇f‖ < grad_tol · (1 + |f|)`.
    pub grad_tol: f64,
    /// Converged when the relative objective change of an iteration drops below this.
    pub rel_f_tol: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-6,
            rel_f_tol: 1e-10,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    ObjectiveChange,
    MaxIterations,
    LineSearchFailed,
    NonFiniteStart,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad: DVector<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub reason: StopReason,
}

impl BfgsOutcome {
    pub fn converged(&self) -> bool {
        matches!(self.reason, StopReason::Gradient | StopReason::ObjectiveChange)
    }
}

struct Probe {
    alpha: f64,
    f: f64,
    slope: f64,
    x: DVector<f64>,
    g: DVector<f64>,
}

/// Minimize `f` starting at `x0`. The closure returns the objective and its
/// gradient; a non-finite objective marks an infeasible trial point.
pub fn minimize<F>(mut f: F, x0: DVector<f64>, opts: &BfgsOptions) -> BfgsOutcome
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let n = x0.len();
    let (mut fx, mut gx) = f(&x0);
    let mut evaluations = 1;
    let mut x = x0;
    if !fx.is_finite() {
        return BfgsOutcome {
            x,
            f: fx,
            grad: gx,
            iterations: 0,
            evaluations,
            reason: StopReason::NonFiniteStart,
        };
    }
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut iterations = 0;

    let reason = loop {
        if gx.norm() < opts.grad_tol * (1.0 + fx.abs()) {
            break StopReason::Gradient;
        }
        if iterations >= opts.max_iter {
            break StopReason::MaxIterations;
        }
        let mut dir = -(&h * &gx);
        let mut slope = dir.dot(&gx);
        if slope >= 0.0 {
            h = DMatrix::identity(n, n);
            fresh = true;
            dir = -gx.clone();
            slope = dir.dot(&gx);
        }
        let alpha0 = if fresh {
            (1.0 / gx.amax()).min(1.0)
        } else {
            1.0
        };
        let probe = line_search(&mut f, &x, fx, slope, &dir, alpha0, opts, &mut evaluations);
        let probe = match probe {
            Some(p) => p,
            None if !fresh => {
                h = DMatrix::identity(n, n);
                fresh = true;
                continue;
            }
            None => break StopReason::LineSearchFailed,
        };
        iterations += 1;
        let s = &probe.x - &x;
        let y = &probe.g - &gx;
        let f_prev = fx;
        x = probe.x;
        fx = probe.f;
        gx = probe.g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
                fresh = false;
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H ← (I − ρsyᵀ) H (I − ρysᵀ) + ρssᵀ
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        let scale = fx.abs().max(f_prev.abs()).max(1e-300);
        if (f_prev - fx).abs() <= opts.rel_f_tol * scale {
            break StopReason::ObjectiveChange;
        }
    };
    BfgsOutcome {
        x,
        f: fx,
        grad: gx,
        iterations,
        evaluations,
        reason,
    }
}

#[allow(clippy::too_many_arguments)]
fn line_search<F>(
    f: &mut F,
    x: &DVector<f64>,
    f0: f64,
    slope0: f64,
    dir: &DVector<f64>,
    alpha0: f64,
    opts: &BfgsOptions,
    evaluations: &mut usize,
) -> Option<Probe>
where
    F: FnMut(&DVector<f64>) -> (f64, DVector<f64>),
{
    let mut eval = |alpha: f64| -> Probe {
        let xt = x + dir * alpha;
        let (ft, gt) = f(&xt);
        *evaluations += 1;
        let slope = if ft.is_finite() { gt.dot(dir) } else { f64::NAN };
        Probe {
            alpha,
            f: if ft.is_finite() { ft } else { f64::INFINITY },
            slope,
            x: xt,
            g: gt,
        }
    };
    let armijo = |p: &Probe| p.f <= f0 + opts.c1 * p.alpha * slope0;
    let curvature = |p: &Probe| p.slope.abs() <= -opts.c2 * slope0;

    let mut prev = Probe {
        alpha: 0.0,
        f: f0,
        slope: slope0,
        x: x.clone(),
        g: DVector::zeros(0),
    };
    let mut alpha = alpha0;
    let mut best: Option<Probe> = None;
    for i in 0..opts.max_line_search {
        let cur = eval(alpha);
        if !cur.f.is_finite() {
            alpha = 0.5 * (prev.alpha + alpha);
            continue;
        }
        if armijo(&cur) && best.as_ref().is_none_or(|b| cur.f < b.f) {
            // keep the best sufficient-decrease point as a fallback
            best = Some(Probe {
                alpha: cur.alpha,
                f: cur.f,
                slope: cur.slope,
                x: cur.x.clone(),
                g: cur.g.clone(),
            });
        }
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) {
            return zoom(&mut eval, prev, cur, f0, slope0, opts).or(best);
        }
        if curvature(&cur) {
            return Some(cur);
        }
        if cur.slope >= 0.0 {
            return zoom(&mut eval, cur, prev, f0, slope0, opts).or(best);
        }
        prev = cur;
        alpha *= 2.0;
    }
    best
}

fn zoom<E>(
    eval: &mut E,
    mut lo: Probe,
    mut hi: Probe,
    f0: f64,
    slope0: f64,
    opts: &BfgsOptions,
) -> Option<Probe>
where
    E: FnMut(f64) -> Probe,
{
    let mut best: Option<Probe> = None;
    for _ in 0..opts.max_line_search {
        let (a, b) = (lo.alpha, hi.alpha);
        let width = (b - a).abs();
        if width < 1e-16 * a.abs().max(b.abs()).max(1e-300) {
            break;
        }
        let mut alpha = cubic_min(&lo, &hi).unwrap_or(0.5 * (a + b));
        let (mn, mx) = (a.min(b), a.max(b));
        let margin = 0.1 * width;
        if !(alpha > mn + margin && alpha < mx - margin) {
            alpha = 0.5 * (a + b);
        }
        let cur = eval(alpha);
        let sufficient = cur.f.is_finite() && cur.f <= f0 + opts.c1 * alpha * slope0;
        if sufficient && best.as_ref().is_none_or(|p| cur.f < p.f) {
            best = Some(Probe {
                alpha: cur.alpha,
                f: cur.f,
                slope: cur.slope,
                x: cur.x.clone(),
                g: cur.g.clone(),
            });
        }
        if !sufficient || cur.f >= lo.f {
            hi = cur;
        } else {
            if cur.slope.abs() <= -opts.c2 * slope0 {
                return Some(cur);
            }
            if cur.slope * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    best
}

fn cubic_min(a: &Probe, b: &Probe) -> Option<f64> {
    if !(a.f.is_finite() && b.f.is_finite() && a.slope.is_finite() && b.slope.is_finite()) {
        return None;
    }
    let d1 = a.slope + b.slope - 3.0 * (a.f - b.f) / (a.alpha - b.alpha);
    let disc = d1 * d1 - a.slope * b.slope;
    if disc < 0.0 {
        return None;
    }
    let d2 = (b.alpha - a.alpha).signum() * disc.sqrt();
    let denom = b.slope - a.slope + 2.0 * d2;
    if denom == 0.0 {
        return None;
    }
    let t = b.alpha - (b.alpha - a.alpha) * (b.slope + d2 - d1) / denom;
    t.is_finite().then_some(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_rosenbrock() {
        let rosen = |x: &DVector<f64>| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = DVector::from_vec(vec![
                -2.0 * (1.0 - a) - 400.0 * a * (b - a * a),
                200.0 * (b - a * a),
            ]);
            (f, g)
        };
        let opts = BfgsOptions {
            rel_f_tol: 0.0,
            grad_tol: 1e-10,
            ..Default::default()
        };
        let out = minimize(rosen, DVector::from_vec(vec![-1.2, 1.0]), &opts);
        assert!(out.converged());
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let diag = [1.0, 1e3, 1e6, 1e-2];
        let q = |x: &DVector<f64>| {
            let f: f64 = (0..4).map(|i| 0.5 * diag[i] * (x[i] - 1.0).powi(2)).sum();
            let g = DVector::from_iterator(4, (0..4).map(|i| diag[i] * (x[i] - 1.0)));
            (f, g)
        };
        let opts = BfgsOptions {
            rel_f_tol: 0.0,
            grad_tol: 1e-9,
            ..Default::default()
        };
        let out = minimize(q, DVector::zeros(4), &opts);
        assert!(out.converged());
        assert!(out.f < 1e-12);
    }

    #[test]
    fn non_finite_region_is_avoided() {
        // log barrier: infeasible for x <= 0
        let f = |x: &DVector<f64>| {
            if x[0] <= 0.0 {
                return (f64::INFINITY, DVector::zeros(1));
            }
            (x[0] - x[0].ln(), DVector::from_vec(vec![1.0 - 1.0 / x[0]]))
        };
        let out = minimize(f, DVector::from_vec(vec![5.0]), &BfgsOptions::default());
        assert!((out.x[0] - 1.0).abs() < 1e-5);
    }
}
