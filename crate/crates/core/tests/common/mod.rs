#![allow(dead_code)]

use gsim::model::{log_grid, Dataset, ModelSpec};
use gsim::simlab::{analysis_spec, gen_model_data, ScenarioConfig};

/// Catalog scenario at size `n` with an optional parameter override.
pub fn scenario(name: &str, n: usize, param: Option<f64>, seed: u64) -> ScenarioConfig {
    ScenarioConfig::new(name, n, param, 1, seed).expect("catalog scenario")
}

/// One replicate and the analysis model, on a shortened grid spanning the
/// default endpoints.
pub fn replicate(name: &str, n: usize, param: Option<f64>, seed: u64, grid_len: usize) -> (ModelSpec, Dataset) {
    let mut cfg = scenario(name, n, param, seed);
    let (lo, hi) = (cfg.lambda_grid[0], *cfg.lambda_grid.last().unwrap());
    cfg.lambda_grid = log_grid(lo, hi, grid_len);
    let data = gen_model_data(&cfg, 0).expect("replicate");
    (analysis_spec(&cfg), data)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
