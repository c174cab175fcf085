use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gsim::cli::ResultBundle;
use gsim::fmt::g17;
use gsim::simlab::{gen_dataset, ScenarioConfig};
use tempfile::TempDir;

const GRID: &str = "1e-2:1e6:8";

fn gsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsim")).args(args).output().expect("binary runs")
}

fn write_csv(dir: &Path, name: &str, scenario: &str, n: usize, param: Option<f64>) -> PathBuf {
    let cfg = ScenarioConfig::new(scenario, n, param, 1, 21).unwrap();
    let (x, y) = gen_dataset(&cfg, 0).unwrap();
    let mut text = String::from("response");
    for j in 0..x.ncols() {
        text += &format!(",x_{}", j + 1);
    }
    text.push('\n');
    for i in 0..x.nrows() {
        text += &g17(y[i]);
        for j in 0..x.ncols() {
            text += &format!(",{}", g17(x[(i, j)]));
        }
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn jensen(data: &Path, out: &Path, family: &str, direction: &str, extra: &[&str]) -> Output {
    let mut args = vec![
        "jensen",
        "--family",
        family,
        "--data",
        data.to_str().unwrap(),
        "--direction",
        direction,
        "--lambda-grid",
        GRID,
        "--null-sims",
        "2000",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    gsim(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn concave_gaussian_data_is_rejected_with_complete_outputs() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "sqrt.csv", "gauss-sqrt", 400, Some(0.01));
    let out = dir.path().join("run");
    let o = jensen(&data, &out, "gaussian-log", "neg", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let line = stdout(&o);
    assert!(line.starts_with("family=gaussian_log direction=") && line.trim_end().ends_with("decision=REJECT"), "{line}");

    let json = fs::read_to_string(out.join("result.json")).unwrap();
    let bundle: ResultBundle = serde_json::from_str(&json).unwrap();
    assert!(bundle.reject && bundle.decision == "REJECT");
    assert_eq!(bundle.path.len(), 8);
    assert_eq!(bundle.n, 400);
    assert_eq!(bundle.x_columns.len(), 5);
    // nothing is lost in the round trip
    assert_eq!(serde_json::to_string_pretty(&bundle).unwrap() + "\n", json);
    assert_eq!(serde_json::from_str::<ResultBundle>(&serde_json::to_string(&bundle).unwrap()).unwrap(), bundle);

    let delta = fs::read_to_string(out.join("delta_vs_lambda.csv")).unwrap();
    let mut rows = delta.lines();
    assert_eq!(rows.next(), Some("log10_lambda,delta,se,t"));
    let rows: Vec<&str> = rows.collect();
    assert_eq!(rows.len(), 8);
    let first: Vec<f64> = rows[0].split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[0] + 2.0).abs() < 1e-12);
    assert_eq!(first[1], bundle.path[0].delta);

    let ghat = fs::read_to_string(out.join("ghat.csv")).unwrap();
    let mut rows = ghat.lines();
    assert_eq!(rows.next(), Some("s,ghat,hg"));
    assert_eq!(rows.count(), 200);
}

#[test]
fn repeated_runs_are_byte_identical_at_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "pois.csv", "pois-logistic", 300, None);
    let runs: Vec<(String, PathBuf)> = [None, None, Some("1"), Some("3")]
        .iter()
        .enumerate()
        .map(|(k, threads)| {
            let out = dir.path().join(format!("run{k}"));
            let o = match threads {
                Some(t) => {
                    let mut args = vec!["--threads", t];
                    let d = data.to_str().unwrap().to_string();
                    let od = out.to_str().unwrap().to_string();
                    let rest = [
                        "jensen", "--family", "poisson", "--data", &d, "--direction", "neg", "--lambda-grid", GRID, "--null-sims",
                        "2000", "--seed", "5", "--out", &od,
                    ];
                    args.extend_from_slice(&rest);
                    gsim(&args)
                }
                None => jensen(&data, &out, "poisson", "neg", &[]),
            };
            assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
            (stdout(&o), out)
        })
        .collect();
    for (line, out) in &runs[1..] {
        assert_eq!(line, &runs[0].0);
        for file in ["result.json", "delta_vs_lambda.csv", "ghat.csv"] {
            assert_eq!(fs::read(out.join(file)).unwrap(), fs::read(runs[0].1.join(file)).unwrap(), "{file}");
        }
    }
}

#[test]
fn power_tables_repeat_exactly() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, threads: &str| {
        let path = dir.path().join(name);
        let o = gsim(&[
            "--threads",
            threads,
            "power",
            "--scenario",
            "gauss-exp",
            "--n",
            "150,200",
            "--param",
            "0.05",
            "--replicates",
            "2",
            "--null-sims",
            "500",
            "--seed",
            "3",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        (stdout(&o), fs::read_to_string(path).unwrap())
    };
    let a = run("a.csv", "1");
    let b = run("b.csv", "2");
    assert_eq!(a, b);
    assert_eq!(a.0, a.1);
    let lines: Vec<&str> = a.1.lines().collect();
    assert_eq!(lines[0], gsim::simlab::POWER_HEADER);
    assert_eq!(lines.len(), 3);
}

#[test]
fn empty_data_file_is_an_input_error_naming_the_response() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("empty.csv");
    fs::write(&data, "").unwrap();
    let o = jensen(&data, &dir.path().join("out"), "poisson", "neg", &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("response"), "{}", stderr(&o));
}

#[test]
fn alternative_null_needs_the_logistic_family() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "pois.csv", "pois-linear", 100, None);
    let o = jensen(&data, &dir.path().join("out"), "poisson", "vs-linear", &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn alternative_null_runs_on_binary_data() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "logit.csv", "logit-linear", 300, None);
    let out = dir.path().join("out");
    let o = jensen(&data, &out, "logit", "vs-linear", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let bundle: ResultBundle = serde_json::from_str(&fs::read_to_string(out.join("result.json")).unwrap()).unwrap();
    assert!(bundle.delta_reference.is_some());
}

#[test]
fn invalid_power_requests_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.csv");
    let out = out.to_str().unwrap();
    let o = gsim(&["power", "--scenario", "gauss-exp", "--n", "100", "--replicates", "0", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = gsim(&["power", "--scenario", "nope", "--n", "100", "--replicates", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gauss-sqrt"));
    let o = gsim(&["power", "--scenario", "gauss-exp", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_flags_are_input_errors() {
    let dir = TempDir::new().unwrap();
    let data = write_csv(dir.path(), "g.csv", "gauss-exp", 50, None);
    let out = dir.path().join("out");
    let d = data.to_str().unwrap();
    let o = gsim(&["jensen", "--family", "gaussian-log", "--data", d, "--lambda-grid", "1:2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = gsim(&["jensen", "--family", "weibull", "--data", d]);
    assert_eq!(o.status.code(), Some(2));
}
