//! The `gsim` command line: `jensen` fits a smoothing path to a data file and
//! tests the sign of its Jensen Effect; `power` tabulates rejection rates
//! over simulated replicates.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::basis::{fourier_design, read_history_csv, FourierBasis};
use crate::error::Error;
use crate::fmt::g17;
use crate::inference::{InferenceConfig, LambdaPath};
use crate::jensen::{jensen_test_with, JensenDirection, JensenTestResult, TestConfig};
use crate::model::{fit_path_with, log_grid, Dataset, Family, ModelSpec, Placement};
use crate::simlab::{power_study, ScenarioConfig};

/// Exit status for malformed input, flags or files.
pub const EXIT_INPUT: i32 = 2;
/// Exit status when estimation or testing breaks down numerically.
pub const EXIT_NUMERICAL: i32 = 3;

/// Number of index points in `ghat.csv`.
pub const GHAT_POINTS: usize = 200;

#[derive(Debug, Parser)]
#[command(name = "gsim", version, about = "Penalized single-index models and Jensen Effect tests")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a smoothing path and test the Jensen Effect.
    Jensen(JensenArgs),
    /// Rejection rates of a simulation scenario.
    Power(PowerArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    GaussianLog,
    Poisson,
    Logit,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::GaussianLog => Family::GaussianLog,
            FamilyArg::Poisson => Family::Poisson,
            FamilyArg::Logit => Family::BernoulliLogit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Neg,
    Pos,
    VsLinear,
}

impl From<DirectionArg> for JensenDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Neg => JensenDirection::TestNegative,
            DirectionArg::Pos => JensenDirection::TestPositive,
            DirectionArg::VsLinear => JensenDirection::TestVsLinearLogistic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacementArg {
    Inside,
    Outside,
}

impl From<PlacementArg> for Placement {
    fn from(p: PlacementArg) -> Self {
        match p {
            PlacementArg::Inside => Placement::InsideIndex,
            PlacementArg::Outside => Placement::OutsideIndex,
        }
    }
}

#[derive(Debug, Args)]
pub struct JensenArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    /// CSV with a `response` column, `x_*` covariates and optional `a_*` columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub direction: DirectionArg,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// `LO:HI:COUNT`, log-spaced, in raw units.
    #[arg(long, default_value = "1e-4:1e6:20")]
    pub lambda_grid: String,
    #[arg(long, default_value_t = 25)]
    pub basis_dim: usize,
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    #[arg(long, default_value_t = 5000)]
    pub null_sims: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "inside")]
    pub extra_placement: PlacementArg,
    /// Output directory for `result.json` and the CSV sidecars.
    #[arg(long)]
    pub out: PathBuf,
    /// Functional covariate in long `series_id,t,value` form, matched to the
    /// data file's `series_id` column. May be repeated.
    #[arg(long)]
    pub history: Vec<PathBuf>,
    #[arg(long, default_value_t = 15)]
    pub fourier_dim: usize,
    /// History window length (default: the span of the history grid).
    #[arg(long)]
    pub history_period: Option<f64>,
    /// Keep the index-coefficient block in the coefficient covariance.
    #[arg(long)]
    pub retain_index_block: bool,
}

#[derive(Debug, Args)]
pub struct PowerArgs {
    #[arg(long)]
    pub scenario: String,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Noise sd or link parameter per row, comma separated (default: the scenario's).
    #[arg(long, value_delimiter = ',')]
    pub param: Vec<f64>,
    #[arg(long)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub null_sims: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// A failed command: message and process exit status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::input(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Input(_)
            | Error::Unsupported(_)
            | Error::InvalidBasis(_)
            | Error::UnderResolved { .. }
            | Error::ScenarioInfeasible { .. } => EXIT_INPUT,
            _ => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

/// Parses `LO:HI:COUNT` into a log-spaced grid.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::input(format!("--lambda-grid expects LO:HI:COUNT, got `{spec}`"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 0.0 && lo.is_finite() && hi.is_finite()) || count == 0 {
        return Err(CliError::input("--lambda-grid needs 0 < LO, finite HI and COUNT ≥ 1"));
    }
    if count == 1 && hi != lo || count > 1 && hi <= lo {
        return Err(CliError::input("--lambda-grid needs HI > LO (or HI = LO with COUNT = 1)"));
    }
    Ok(log_grid(lo, hi, count))
}

/// Columns of a data file after ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    pub response: DVector<f64>,
    pub x_names: Vec<String>,
    pub x: DMatrix<f64>,
    pub a_names: Vec<String>,
    pub a: DMatrix<f64>,
    pub series_ids: Option<Vec<String>>,
}

pub fn read_data_csv(path: &Path) -> Result<DataTable, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_data(&text)
}

/// Parses a data file. Every row must be complete; errors carry the 1-based
/// line number.
pub fn parse_data(text: &str) -> Result<DataTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::input(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let response_col = find("response").ok_or_else(|| CliError::input("data file has no `response` column"))?;
    let series_col = find("series_id");
    let x_cols: Vec<usize> = (0..headers.len()).filter(|&j| headers[j].starts_with("x_")).collect();
    let a_cols: Vec<usize> = (0..headers.len()).filter(|&j| headers[j].starts_with("a_")).collect();

    let mut response = Vec::new();
    let mut x = Vec::new();
    let mut a = Vec::new();
    let mut ids = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| CliError::input(format!("line {line}: {e}")))?;
        if record.len() != headers.len() {
            return Err(CliError::input(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        let cell = |j: usize| -> Result<f64, CliError> {
            let raw = record[j].trim();
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(CliError::input(format!("line {line}: missing value in column `{}`", headers[j])));
            }
            let v: f64 = raw
                .parse()
                .map_err(|_| CliError::input(format!("line {line}: `{raw}` in column `{}` is not a number", headers[j])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::input(format!("line {line}: non-finite value in column `{}`", headers[j])))
            }
        };
        response.push(cell(response_col)?);
        for &j in &x_cols {
            x.push(cell(j)?);
        }
        for &j in &a_cols {
            a.push(cell(j)?);
        }
        if let Some(j) = series_col {
            let id = record[j].trim();
            if id.is_empty() {
                return Err(CliError::input(format!("line {line}: missing value in column `series_id`")));
            }
            ids.push(id.to_string());
        }
    }
    let n = response.len();
    if n == 0 {
        return Err(CliError::input("data file has no rows"));
    }
    Ok(DataTable {
        response: DVector::from_vec(response),
        x_names: x_cols.iter().map(|&j| headers[j].clone()).collect(),
        x: DMatrix::from_row_slice(n, x_cols.len(), &x),
        a_names: a_cols.iter().map(|&j| headers[j].clone()).collect(),
        a: DMatrix::from_row_slice(n, a_cols.len(), &a),
        series_ids: series_col.map(|_| ids),
    })
}

/// Appends Fourier inner products of each history file to the covariates.
fn append_histories(table: &mut DataTable, args: &JensenArgs) -> Result<(), CliError> {
    if args.history.is_empty() {
        return Ok(());
    }
    let ids = table
        .series_ids
        .clone()
        .ok_or_else(|| CliError::input("--history needs a `series_id` column in the data file"))?;
    let n = table.response.len();
    for (h, path) in args.history.iter().enumerate() {
        let set = read_history_csv(path)?;
        let span = set.grid.last().copied().unwrap_or(0.0) - set.grid.first().copied().unwrap_or(0.0);
        let basis = FourierBasis::new(args.fourier_dim, args.history_period.unwrap_or(span))?;
        let design = fourier_design(&set.values, &set.grid, &basis)?;
        let mut block = DMatrix::zeros(n, design.ncols());
        for (i, id) in ids.iter().enumerate() {
            let r = set
                .row_of(id)
                .ok_or_else(|| CliError::input(format!("{}: no history for series `{id}`", path.display())))?;
            block.row_mut(i).copy_from(&design.row(r));
        }
        let old = table.x.ncols();
        table.x = table.x.clone().insert_columns(old, block.ncols(), 0.0);
        table.x.view_mut((0, old), (n, block.ncols())).copy_from(&block);
        table.x_names.extend((0..block.ncols()).map(|j| format!("x_hist{h}_{j}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEntry {
    pub lambda: f64,
    pub delta: f64,
    pub se: f64,
    /// Absent where the variance was not positive or the fit was left out.
    pub t: Option<f64>,
    pub gcv: Option<f64>,
    pub trace_s: f64,
    pub converged: bool,
}

/// Everything `gsim jensen` reports, serialized as `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub spec: ModelSpec,
    pub data_file: String,
    pub n: usize,
    pub x_columns: Vec<String>,
    pub a_columns: Vec<String>,
    /// The `--lambda-grid` flag as given.
    pub lambda_grid_flag: String,
    pub path: Vec<LambdaEntry>,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub sigma2_hat: Option<f64>,
    pub family: Family,
    pub direction: JensenDirection,
    pub statistic: f64,
    pub critical_value: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub decision: String,
    pub null_sims: usize,
    pub seed: u64,
    pub delta_reference: Option<f64>,
    pub warnings: Vec<String>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl ResultBundle {
    fn new(args: &JensenArgs, table: &DataTable, path: &LambdaPath, test: &JensenTestResult) -> Self {
        let mut t = vec![None; path.len()];
        for (v, &i) in test.t.iter().zip(&test.kept) {
            t[i] = Some(*v);
        }
        let entries = (0..path.len())
            .map(|i| LambdaEntry {
                lambda: path.grid[i],
                delta: test.deltas[i],
                se: test.se[i],
                t: t[i],
                gcv: finite(path.gcv[i]),
                trace_s: path.trace_s(i),
                converged: path.fits[i].converged,
            })
            .collect();
        let sel = path.selected_fit();
        let mut warnings: Vec<String> = path
            .fits
            .iter()
            .flat_map(|f| f.warnings.iter().map(move |w| format!("λ = {}: {w:?}", f.lambda)))
            .collect();
        warnings.extend(test.warnings.iter().cloned());
        Self {
            spec: path.spec.clone(),
            data_file: args.data.display().to_string(),
            n: path.data.n(),
            x_columns: table.x_names.clone(),
            a_columns: table.a_names.clone(),
            lambda_grid_flag: args.lambda_grid.clone(),
            path: entries,
            selected_index: path.selected,
            selected_lambda: path.grid[path.selected],
            beta: sel.coeffs.beta.iter().copied().collect(),
            gamma: sel.coeffs.gamma.iter().copied().collect(),
            sigma2_hat: path.sigma2_hat,
            family: test.family,
            direction: test.direction,
            statistic: test.statistic,
            critical_value: test.critical_value,
            p_value: test.p_value,
            alpha: test.alpha,
            reject: test.reject,
            decision: decision(test.reject).to_string(),
            null_sims: test.n_null_sims,
            seed: test.seed,
            delta_reference: test.delta_reference,
            warnings,
        }
    }

    /// The one-line standard-output summary.
    pub fn summary(&self) -> String {
        format!(
            "family={} direction={} statistic={} critical_value={} p_value={} decision={}",
            self.family.name(),
            self.direction.name(),
            g17(self.statistic),
            g17(self.critical_value),
            g17(self.p_value),
            self.decision
        )
    }
}

fn decision(reject: bool) -> &'static str {
    if reject {
        "REJECT"
    } else {
        "ACCEPT"
    }
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<fs::File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

/// `delta_vs_lambda.csv`.
pub fn write_delta_csv<W: Write>(bundle: &ResultBundle, mut out: W) -> std::io::Result<()> {
    writeln!(out, "log10_lambda,delta,se,t")?;
    for e in &bundle.path {
        writeln!(
            out,
            "{},{},{},{}",
            g17(e.lambda.log10()),
            g17(e.delta),
            g17(e.se),
            g17(e.t.unwrap_or(f64::NAN))
        )?;
    }
    Ok(())
}

/// `ghat.csv`: the GCV-selected link on a uniform grid over the observed
/// index range, with its value through the response transform.
pub fn write_ghat_csv<W: Write>(path: &LambdaPath, mut out: W) -> crate::Result<()> {
    let fit = path.selected_fit();
    let fam = path.spec.family;
    let (lo, hi) = fit
        .index_values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let s: Vec<f64> = (0..GHAT_POINTS)
        .map(|k| lo + (hi - lo) * k as f64 / (GHAT_POINTS - 1) as f64)
        .collect();
    let g = fit.basis.local_rows(&s, 0)?.apply(0, &fit.coeffs.d);
    let io = |e: std::io::Error| Error::Internal(e.to_string());
    writeln!(out, "s,ghat,hg").map_err(io)?;
    for (sk, gk) in s.iter().zip(g.iter()) {
        writeln!(out, "{},{},{}", g17(*sk), g17(*gk), g17(fam.response_transform(*gk))).map_err(io)?;
    }
    Ok(())
}

/// Runs `gsim jensen`, returning the bundle it wrote.
pub fn cmd_jensen(args: &JensenArgs) -> Result<ResultBundle, CliError> {
    let family: Family = args.family.into();
    let direction: JensenDirection = args.direction.into();
    if direction == JensenDirection::TestVsLinearLogistic && family != Family::BernoulliLogit {
        return Err(CliError::input(
            "--direction vs-linear compares against a linear logistic fit and needs --family logit",
        ));
    }
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::input(format!("--alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if args.null_sims == 0 {
        return Err(CliError::input("--null-sims must be positive"));
    }
    let grid = parse_lambda_grid(&args.lambda_grid)?;
    let mut table = read_data_csv(&args.data)?;
    append_histories(&mut table, args)?;
    if table.x.ncols() == 0 {
        return Err(CliError::input("data file has no `x_` columns"));
    }
    let spec = ModelSpec::new(family, table.x.ncols(), table.a.ncols())
        .with_grid(grid)
        .with_basis(args.degree, args.basis_dim)
        .with_placement(args.extra_placement.into());
    spec.validate()?;
    let data = Dataset::new(family, table.x.clone(), table.a.clone(), table.response.clone())?;
    let config = InferenceConfig {
        retain_index_block: args.retain_index_block,
        ..Default::default()
    };
    let path = fit_path_with(&spec, &data, &config)?;
    let test = jensen_test_with(
        &path,
        direction,
        &TestConfig {
            alpha: args.alpha,
            n_null_sims: args.null_sims,
            seed: args.seed,
        },
    )?;
    let bundle = ResultBundle::new(args, &table, &path, &test);

    fs::create_dir_all(&args.out).map_err(|e| CliError::io(&args.out, e))?;
    let json = serde_json::to_string_pretty(&bundle).map_err(|e| CliError::input(e.to_string()))?;
    let json_path = args.out.join("result.json");
    write_file(&json_path, |w| writeln!(w, "{json}"))?;
    write_file(&args.out.join("delta_vs_lambda.csv"), |w| write_delta_csv(&bundle, w))?;
    let ghat_path = args.out.join("ghat.csv");
    let mut ghat = Vec::new();
    write_ghat_csv(&path, &mut ghat)?;
    write_file(&ghat_path, |w| w.write_all(&ghat))?;
    Ok(bundle)
}

/// Runs `gsim power`, returning the CSV it wrote.
pub fn cmd_power(args: &PowerArgs) -> Result<String, CliError> {
    if args.replicates == 0 {
        return Err(CliError::input("--replicates must be at least 1"));
    }
    if args.n.is_empty() {
        return Err(CliError::input("--n needs at least one sample size"));
    }
    let params: Vec<Option<f64>> = if args.param.is_empty() {
        vec![None]
    } else {
        args.param.iter().map(|&p| Some(p)).collect()
    };
    let mut configs = Vec::new();
    for &n in &args.n {
        for &param in &params {
            let mut c = ScenarioConfig::new(&args.scenario, n, param, args.replicates, args.seed)?;
            c.n_null_sims = args.null_sims;
            c.validate()?;
            configs.push(c);
        }
    }
    let table = power_study(&configs, args.alpha)?;
    let mut buf = Vec::new();
    table.write_csv(&mut buf).map_err(|e| CliError::input(e.to_string()))?;
    let csv = String::from_utf8(buf).expect("CSV output is ASCII");
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    write_file(&args.out, |w| w.write_all(csv.as_bytes()))?;
    for row in table.rows.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} n={}: {} replicates failed (first: {})",
            row.scenario,
            row.n,
            row.failures,
            row.first_failure.as_deref().unwrap_or("unknown")
        );
    }
    Ok(csv)
}

/// Parses `argv`, runs the command and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => EXIT_INPUT,
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return EXIT_INPUT;
        }
    };
    let outcome = pool.install(|| match &cli.command {
        Command::Jensen(args) => cmd_jensen(args).map(|b| println!("{}", b.summary())),
        Command::Power(args) => cmd_power(args).map(|csv| print!("{csv}")),
    });
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_flag_parses() {
        let g = parse_lambda_grid("1e-4:1e6:20").unwrap();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-4).abs() < 1e-18 && (g[19] - 1e6).abs() < 1e-6);
        assert_eq!(parse_lambda_grid("2:2:1").unwrap(), vec![2.0]);
        for bad in ["1:2", "0:1:3", "5:1:3", "a:b:c", "1:2:0"] {
            assert_eq!(parse_lambda_grid(bad).unwrap_err().code, EXIT_INPUT, "{bad}");
        }
    }

    #[test]
    fn data_columns_by_prefix() {
        let t = parse_data("x_1,response,a_z,x_2\n1,2,3,4\n5,6,7,8\n").unwrap();
        assert_eq!(t.x_names, ["x_1", "x_2"]);
        assert_eq!(t.a_names, ["a_z"]);
        assert_eq!(t.x, DMatrix::from_row_slice(2, 2, &[1.0, 4.0, 5.0, 8.0]));
        assert_eq!(t.response.as_slice(), &[2.0, 6.0]);
        assert!(t.series_ids.is_none());
    }

    #[test]
    fn missing_cells_name_the_line() {
        let e = parse_data("response,x_1\n1,2\n3,\n").unwrap_err();
        assert_eq!(e.code, EXIT_INPUT);
        assert!(e.message.contains("line 3"), "{}", e.message);
        let e = parse_data("response,x_1\n1,2\n3\n").unwrap_err();
        assert!(e.message.contains("line 3"), "{}", e.message);
        let e = parse_data("response,x_1\n1,abc\n").unwrap_err();
        assert!(e.message.contains("line 2"), "{}", e.message);
    }

    #[test]
    fn empty_file_names_response() {
        let e = parse_data("").unwrap_err();
        assert_eq!(e.code, EXIT_INPUT);
        assert!(e.message.contains("response"), "{}", e.message);
    }

    #[test]
    fn error_codes_by_kind() {
        assert_eq!(CliError::from(Error::Input("x".into())).code, EXIT_INPUT);
        assert_eq!(CliError::from(Error::NoConvergedFits).code, EXIT_NUMERICAL);
        assert_eq!(CliError::from(Error::DegenerateVariance).code, EXIT_NUMERICAL);
    }
}
