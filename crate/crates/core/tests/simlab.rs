mod common;

use gsim::error::Error;
use gsim::simlab::*;

#[test]
fn replicates_are_reproducible_and_distinct() {
    for s in CATALOG.iter() {
        let cfg = common::scenario(s.name, 200, None, 4);
        let a = gen_dataset(&cfg, 3).unwrap();
        let b = gen_dataset(&cfg, 3).unwrap();
        assert_eq!(a, b, "{}", s.name);
        let c = gen_dataset(&cfg, 4).unwrap();
        assert_ne!(a.0, c.0);
    }
}

#[test]
fn gaussian_index_stays_in_the_documented_range() {
    let cfg = common::scenario("gauss-sqrt", 2000, None, 1);
    let (x, _) = gen_dataset(&cfg, 0).unwrap();
    let s = &x * &cfg.beta_true;
    let hi = 5.0 * 0.5 / 5f64.sqrt();
    assert!(s.iter().all(|&v| (0.0..=hi).contains(&v)) && hi < 1.12);
}

#[test]
fn scaled_logistic_mean_is_valid_over_the_poisson_index_range() {
    let cfg = common::scenario("pois-logistic", 10, None, 1);
    let top = 5.0 * 20.0 / 5f64.sqrt();
    // the mean is exactly 0 at s = 0, which uniform covariates never hit
    assert!(cfg.mean_at(0.0).is_err());
    for k in 1..=10_000 {
        let s = top * k as f64 / 10_000.0;
        let m = cfg.mean_at(s).unwrap();
        assert!(m > 0.0 && m < 15.01, "s = {s}: {m}");
    }
}

#[test]
fn infeasible_means_name_the_index() {
    let mut cfg = common::scenario("pois-linear", 50, None, 1);
    cfg.covariate_range = (-2.0, -1.0);
    match gen_dataset(&cfg, 0) {
        Err(Error::ScenarioInfeasible { s, mean }) => assert!(s < 0.0 && mean <= 0.0),
        other => panic!("expected an infeasible scenario, got {other:?}"),
    }
}

#[test]
fn true_effect_sign_follows_curvature() {
    let delta = |name: &str| common::scenario(name, 100, None, 2).true_delta().unwrap();
    assert!(delta("gauss-exp") > 0.0);
    assert!(delta("gauss-sqrt") < 0.0);
    assert!(delta("gauss-sin") < 0.0);
    assert!(delta("gauss-linear").abs() < 1e-12);
    assert!(delta("pois-exp") > 0.0);
    assert!(delta("pois-logistic") < 0.0);
    assert!(delta("pois-linear").abs() < 1e-12);
}

#[test]
fn covariate_column_means_sit_at_the_midpoint() {
    for name in ["gauss-sin", "pois-exp", "logit-convex"] {
        let cfg = common::scenario(name, 2000, None, 5);
        let (x, _) = gen_dataset(&cfg, 1).unwrap();
        let (lo, hi) = cfg.covariate_range;
        let se = (hi - lo) / 12f64.sqrt() / (cfg.n as f64).sqrt();
        for j in 0..cfg.p {
            let m = x.column(j).mean();
            assert!((m - 0.5 * (lo + hi)).abs() < 3.0 * se, "{name} column {j}: {m}");
        }
    }
}

#[test]
fn unknown_scenarios_list_the_catalog() {
    let err = scenario("nope").unwrap_err().to_string();
    for s in CATALOG.iter() {
        assert!(err.contains(s.name));
    }
}

#[test]
fn power_tables_are_reproducible() {
    let mk = |n| {
        let mut c = ScenarioConfig::new("gauss-exp", n, Some(0.05), 3, 8).unwrap();
        c.n_null_sims = 500;
        c
    };
    let configs = vec![mk(150), mk(300)];
    let a = power_study(&configs, 0.05).unwrap();
    let b = power_study(&configs, 0.05).unwrap();
    assert_eq!(a, b);
    for row in &a.rows {
        assert!((0.0..=1.0).contains(&row.rejection_rate));
        assert!(row.replicates > 0 && row.true_delta > 0.0);
        assert_eq!(row.replicates + row.failures, 3);
    }
    let mut csv = Vec::new();
    a.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(POWER_HEADER));
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[0], "gauss-exp");
    assert_eq!(first[4].parse::<f64>().unwrap(), a.rows[0].true_delta);
    assert!(power_study(&configs, 0.0).is_err());
}
