mod common;

use std::sync::OnceLock;

use gsim::basis::{eval_basis, penalty_matrix, SplineBasis};
use gsim::fmt::g17;
use gsim::inference::gcv;
use gsim::jensen::t_process;
use gsim::linalg::{min_eigenvalue, project_psd};
use gsim::model::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn basis_strategy() -> impl Strategy<Value = SplineBasis> {
    (2usize..=5, 0usize..20, -5.0..5.0f64, 0.1..10.0f64)
        .prop_map(|(deg, extra, lo, width)| SplineBasis::uniform(deg, deg + 1 + extra, lo, lo + width).unwrap())
}

fn coeffs(k: usize) -> impl Strategy<Value = DVector<f64>> {
    prop::collection::vec(-3.0..3.0f64, k).prop_map(DVector::from_vec)
}

fn square(m: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0..1.0f64, m * m).prop_map(move |v| DMatrix::from_vec(m, m, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn basis_is_a_nonnegative_partition_of_unity(b in basis_strategy(), u in 0.0..=1.0f64) {
        let (lo, hi) = b.domain();
        let phi = eval_basis(&b, lo + u * (hi - lo), 0).unwrap();
        prop_assert!((phi.sum() - 1.0).abs() < 1e-12);
        prop_assert!(phi.iter().all(|&v| v >= -1e-14));
        prop_assert!(phi.iter().filter(|&&v| v != 0.0).count() <= b.degree() + 1);
    }

    #[test]
    fn derivatives_match_central_differences(
        (b, d) in basis_strategy().prop_flat_map(|b| { let k = b.dim(); (Just(b), coeffs(k)) }),
        u in 0.05..0.95f64,
        order in 0usize..2,
    ) {
        prop_assume!(b.degree() >= 3);
        let (lo, hi) = b.domain();
        let s = lo + u * (hi - lo);
        let h = 1e-5 * (hi - lo);
        let at = |x: f64, k: usize| eval_basis(&b, x, k).unwrap().dot(&d);
        let fd = (at(s + h, order) - at(s - h, order)) / (2.0 * h);
        let exact = at(s, order + 1);
        let scale = exact.abs() + at(s, order).abs() / (hi - lo) + 1e-8;
        prop_assert!((fd - exact).abs() < 1e-5 * scale, "{fd} vs {exact}");
    }

    #[test]
    fn penalty_ignores_affine_functions(
        (b, d) in basis_strategy().prop_flat_map(|b| { let k = b.dim(); (Just(b), coeffs(k)) }),
        a0 in -10.0..10.0f64,
        a1 in -10.0..10.0f64,
    ) {
        let pen = penalty_matrix(&b).unwrap();
        let line = b.affine_coefficients(a0, a1);
        let tol = 1e-9 * (pen.quadratic_form(&d) + pen.entries.amax() * (1.0 + line.norm_squared()));
        prop_assert!(pen.quadratic_form(&line) < tol);
        prop_assert!((pen.quadratic_form(&(&d + &line)) - pen.quadratic_form(&d)).abs() < tol);
        prop_assert!(pen.quadratic_form(&d) >= 0.0);
        let sym = &pen.entries - pen.entries.transpose();
        prop_assert!(sym.amax() <= 1e-12 * pen.entries.amax());
    }

    #[test]
    fn normalized_index_is_a_canonical_unit_vector(
        b in prop::collection::vec(-5.0..5.0f64, 1..8),
        c in prop_oneof![-100.0..-0.01f64, 0.01..100.0f64],
    ) {
        let b = DVector::from_vec(b);
        prop_assume!(b.amax() > 1e-6);
        let v = normalize_index(&b).unwrap();
        prop_assert!((v.norm() - 1.0).abs() < 1e-14);
        let lead = v.iter().find(|&&x| x != 0.0).unwrap();
        prop_assert!(*lead > 0.0);
        prop_assert!((normalize_index(&v).unwrap() - &v).amax() < 1e-15);
        prop_assert!((normalize_index(&(&b * c)).unwrap() - &v).amax() < 1e-13);
    }

    #[test]
    fn t_process_is_a_correlation_scaling(
        a in (1usize..8).prop_flat_map(square),
        shift in 0.0..0.5f64,
    ) {
        let m = a.nrows();
        let sigma = &a * a.transpose() + DMatrix::identity(m, m) * shift;
        let deltas: Vec<f64> = (0..m).map(|i| (i as f64 - 2.0) * 0.3).collect();
        let Ok(tp) = t_process(&deltas, &sigma) else { return Ok(()) };
        for (r, &i) in tp.kept.iter().enumerate() {
            prop_assert_eq!(tp.sigma_t[(r, r)], 1.0);
            prop_assert!((tp.t[r] - deltas[i] / sigma[(i, i)].sqrt()).abs() <= 1e-12 * (1.0 + tp.t[r].abs()));
            for c in 0..tp.kept.len() {
                prop_assert!(tp.sigma_t[(r, c)].abs() <= 1.0 + 1e-12);
                prop_assert_eq!(tp.sigma_t[(r, c)], tp.sigma_t[(c, r)]);
            }
        }
        let scale = tp.sigma_t.amax();
        prop_assert!(min_eigenvalue(&project_psd(&tp.sigma_t)) >= -1e-12 * scale);
    }

    #[test]
    fn psd_projection_is_idempotent(a in (1usize..9).prop_flat_map(square)) {
        let p = project_psd(&a);
        let scale = a.amax().max(1e-300);
        prop_assert_eq!(&p, &p.transpose());
        prop_assert!(min_eigenvalue(&p) >= -1e-12 * scale);
        prop_assert!((project_psd(&p) - &p).amax() <= 1e-12 * scale);
        let gram = &a * a.transpose();
        prop_assert!((project_psd(&gram) - &gram).amax() <= 1e-12 * gram.amax().max(1e-300));
    }

    #[test]
    fn g17_parses_back_exactly(bits in any::<u64>()) {
        let v = f64::from_bits(bits);
        prop_assume!(v.is_finite());
        prop_assert_eq!(g17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
    }

    #[test]
    fn log_grids_are_geometric(lo in -8.0..2.0f64, span in 0.1..10.0f64, m in 2usize..40) {
        let (a, b) = (10f64.powf(lo), 10f64.powf(lo + span));
        let g = log_grid(a, b, m);
        prop_assert_eq!(g.len(), m);
        prop_assert!(common::rel_err(g[0], a) < 1e-12 && common::rel_err(g[m - 1], b) < 1e-12);
        let ratio = g[1] / g[0];
        for w in g.windows(2) {
            prop_assert!(w[1] > w[0] && common::rel_err(w[1] / w[0], ratio) < 1e-9);
        }
    }
}

fn reference_fit() -> &'static (ModelSpec, Dataset, FitResult) {
    static FIT: OnceLock<(ModelSpec, Dataset, FitResult)> = OnceLock::new();
    FIT.get_or_init(|| {
        let (spec, data) = common::replicate("pois-logistic", 150, None, 3, 3);
        let f = fit(&spec, &data, spec.lambda_grid[1], None).unwrap();
        (spec, data, f)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gcv_does_not_depend_on_observation_order(perm in Just((0..150).collect::<Vec<usize>>()).prop_shuffle()) {
        let (spec, data, f) = reference_fit();
        let mut d = data.clone();
        d.x = data.x.select_rows(&perm);
        d.a = data.a.select_rows(&perm);
        d.y = data.y.select_rows(&perm);
        let mut g = f.clone();
        g.index_values = f.index_values.select_rows(&perm);
        g.eta = f.eta.select_rows(&perm);
        g.mean = f.mean.select_rows(&perm);
        let a = gcv(spec, data, f).unwrap();
        let b = gcv(spec, &d, &g).unwrap();
        prop_assert!(common::rel_err(a, b) < 1e-9, "{a} vs {b}");
    }
}
