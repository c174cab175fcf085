mod common;

use std::time::Instant;

use gsim::basis::{eval_basis, penalty_matrix, SplineBasis};
use gsim::error::Error;
use gsim::model::*;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn normalize_index_examples() {
    let v = normalize_index(&DVector::from_vec(vec![2.0, 0.0, 0.0])).unwrap();
    assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0]);
    let v = normalize_index(&DVector::from_vec(vec![-3.0, 4.0])).unwrap();
    assert!((v[0] - 0.6).abs() < 1e-15 && (v[1] + 0.8).abs() < 1e-15);
    let v = normalize_index(&DVector::from_vec(vec![0.0, -2.0, 1.0])).unwrap();
    assert!(v[1] > 0.0 && (v.norm() - 1.0).abs() < 1e-15);
    assert!(matches!(normalize_index(&DVector::zeros(3)), Err(Error::DegenerateIndex)));
}

fn noiseless_exp(n: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = DVector::from_element(5, 1.0 / 5f64.sqrt());
    let x = DMatrix::from_fn(n, 5, |_, _| rng.random_range(0.0..0.5));
    let y = (&x * &beta).map(f64::exp);
    (x, y, beta)
}

#[test]
fn noiseless_exponential_truth_is_recovered() {
    let n = 500;
    let (x, y, beta) = noiseless_exp(n, 3);
    let data = Dataset::new(Family::GaussianLog, x, DMatrix::zeros(n, 0), y).unwrap();
    let spec = ModelSpec::new(Family::GaussianLog, 5, 0);
    let lambda = spec.lambda_grid[spec.lambda_grid.len() / 2] * n as f64;
    let f = fit(&spec, &data, lambda, None).unwrap();
    assert!(f.converged);
    assert!((&f.coeffs.beta - &beta).norm() < 1e-2);
    let (lo, hi) = f
        .index_values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    for k in 0..=100 {
        let s = lo + (hi - lo) * k as f64 / 100.0;
        let g = eval_basis(&f.basis, s, 0).unwrap().dot(&f.coeffs.d);
        assert!((g - s).abs() < 1e-2, "g({s}) = {g}");
    }
}

#[test]
fn optimizer_never_worsens_the_start() {
    for name in ["gauss-sqrt", "pois-logistic", "logit-convex"] {
        let (spec, data) = common::replicate(name, 300, None, 5, 4);
        for &lambda in &spec.lambda_grid {
            let f = fit(&spec, &data, lambda, None).unwrap();
            assert!(f.initial_objective >= f.objective, "{name} λ = {lambda}");
        }
    }
}

#[test]
fn tiny_sample_is_flagged() {
    let (x, y, _) = noiseless_exp(10, 4);
    let data = Dataset::new(Family::GaussianLog, x, DMatrix::zeros(10, 0), y).unwrap();
    let spec = ModelSpec::new(Family::GaussianLog, 5, 0);
    let f = fit(&spec, &data, 1e-8, None).unwrap();
    assert!(!f.converged || f.warnings.contains(&FitWarning::RankDeficient));
}

#[test]
fn nonpositive_lambda_is_an_input_error() {
    let (spec, data) = common::replicate("gauss-sqrt", 100, None, 1, 2);
    for lambda in [0.0, -1.0, f64::NAN] {
        assert!(matches!(fit(&spec, &data, lambda, None), Err(Error::Input(_))));
    }
}

#[test]
fn single_point_grid_matches_single_fit() {
    let (spec, data) = common::replicate("pois-exp", 300, None, 2, 3);
    let lambda = spec.lambda_grid[1];
    let single = fit(&spec, &data, lambda, None).unwrap();
    let path = fit_path(&spec.clone().with_grid(vec![lambda]), &data).unwrap();
    assert_eq!(path.fits.len(), 1);
    assert_eq!(path.fits[0].objective, single.objective);
    assert_eq!(path.fits[0].coeffs, single.coeffs);
}

#[test]
fn fitted_quantities_are_consistent() {
    for (name, q) in [("gauss-sin", 0), ("pois-logistic", 0), ("logit-convex", 0), ("pois-exp", 1)] {
        let (mut spec, mut data) = common::replicate(name, 300, None, 6, 5);
        if q > 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            data.a = DMatrix::from_fn(data.n(), q, |_, _| rng.random_range(-0.5..0.5));
            spec.q = q;
            spec.placement = Placement::OutsideIndex;
        }
        let path = fit_path(&spec, &data).unwrap();
        for f in &path.fits {
            assert!(f.objective.is_finite());
            let renorm = normalize_index(&f.coeffs.beta).unwrap();
            assert!((&renorm - &f.coeffs.beta).amax() < 1e-12);
            assert!((f.coeffs.beta.norm() - 1.0).abs() < 1e-10 && f.coeffs.beta[0] > 0.0);
            assert!(f.index_values.iter().all(|&s| f.basis.contains(s)), "{name}: index left the domain");
            let mut eta = f.g_values();
            if q > 0 {
                eta += &data.a * &f.coeffs.gamma;
            }
            assert!((&eta - &f.eta).amax() < 1e-12 * (1.0 + eta.amax()));
            for (e, m) in f.eta.iter().zip(f.mean.iter()) {
                match spec.family {
                    Family::Poisson => assert!(*m > 0.0 && (m - e.exp()).abs() <= 1e-12 * m),
                    Family::BernoulliLogit => {
                        assert!(*m > 0.0 && *m < 1.0 && (m - 1.0 / (1.0 + (-e).exp())).abs() < 1e-12)
                    }
                    Family::GaussianLog => assert_eq!(m, e),
                }
            }
        }
    }
}

#[test]
fn roughness_decreases_along_the_path() {
    let (spec, data) = common::replicate("gauss-sqrt", 500, Some(0.05), 8, 20);
    let path = fit_path(&spec, &data).unwrap();
    let rough: Vec<f64> = path
        .fits
        .iter()
        .map(|f| penalty_matrix(&f.basis).unwrap().quadratic_form(&f.coeffs.d))
        .collect();
    for w in rough.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6) + 1e-12, "{rough:?}");
    }
}

#[test]
fn warm_starts_match_cold_starts_and_are_not_slower() {
    let (spec, data) = common::replicate("gauss-sqrt", 1000, None, 9, 20);
    let t0 = Instant::now();
    let warm = fit_grid(&spec, &data).unwrap();
    let t_warm = t0.elapsed();
    let mut cold_spec = spec.clone();
    cold_spec.fit.warm_start = false;
    let t1 = Instant::now();
    let cold = fit_grid(&cold_spec, &data).unwrap();
    let t_cold = t1.elapsed();
    for (w, c) in warm.iter().zip(&cold) {
        assert!(common::rel_err(w.objective, c.objective) < 1e-6, "λ = {}", w.lambda);
    }
    assert!(t_warm < t_cold * 2, "warm {t_warm:?} vs cold {t_cold:?}");
}

#[test]
fn largest_lambda_shrinks_to_a_line() {
    let (spec, data) = common::replicate("gauss-linear", 1000, None, 10, 20);
    let path = fit_path(&spec, &data).unwrap();
    let f = path.fits.last().unwrap();
    let (lo, hi) = f.basis.domain();
    let mut max_g2 = 0.0f64;
    let mut max_g1 = 0.0f64;
    for k in 0..=200 {
        let s = lo + (hi - lo) * k as f64 / 200.0;
        max_g1 = max_g1.max(eval_basis(&f.basis, s, 1).unwrap().dot(&f.coeffs.d).abs());
        max_g2 = max_g2.max(eval_basis(&f.basis, s, 2).unwrap().dot(&f.coeffs.d).abs());
    }
    assert!(max_g2 <= 1e-3 * max_g1, "max|g''| {max_g2} against max|g'| {max_g1}");
}

#[test]
fn gradient_matches_central_differences_everywhere() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for family in [Family::GaussianLog, Family::Poisson, Family::BernoulliLogit] {
        let (n, p, k) = (40, 3, 10);
        let x = DMatrix::from_fn(n, p, |_, _| rng.random_range(0.0..1.0));
        let y = DVector::from_fn(n, |_, _| match family {
            Family::GaussianLog => rng.random_range(0.5..3.0),
            Family::Poisson => rng.random_range(0..8) as f64,
            Family::BernoulliLogit => rng.random_range(0..2) as f64,
        });
        let data = Dataset::new(family, x, DMatrix::zeros(n, 0), y).unwrap();
        let spec = ModelSpec::new(family, p, 0).with_basis(5, k);
        let basis = SplineBasis::uniform(5, k, -0.2, 2.0).unwrap();
        for _ in 0..10 {
            let b = DVector::from_fn(p, |_, _| rng.random_range(0.1..1.0));
            let c = Coefficients {
                beta: &b / b.norm(),
                gamma: DVector::zeros(0),
                d: DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0)),
            };
            let lambda = rng.random_range(0.01..2.0);
            let g = gradient(&spec, &data, &basis, &c, lambda).unwrap();
            let h = 1e-6;
            for idx in 0..k + p {
                let mut up = c.clone();
                let mut dn = c.clone();
                if idx < k {
                    up.d[idx] += h;
                    dn.d[idx] -= h;
                } else {
                    up.beta[idx - k] += h;
                    dn.beta[idx - k] -= h;
                }
                let fd = (objective(&spec, &data, &basis, &up, lambda).unwrap()
                    - objective(&spec, &data, &basis, &dn, lambda).unwrap())
                    / (2.0 * h);
                let err = (fd - g[idx]).abs() / (1e-3 + fd.abs().max(g[idx].abs()));
                assert!(err < 1e-5, "{family:?} coordinate {idx}: {} vs {fd}", g[idx]);
            }
        }
    }
}
