//! Subcommand definitions and execution.
//!
//! Conventions shared by every subcommand:
//!
//! * `--input` omitted means stdin, `--output` omitted means stdout, so
//!   stages pipe into each other (`preq simulate sv ... | preq backtest ...`).
//! * Single-file results are CSV for series and JSON (with a
//!   `schema_version` field) for verdicts; multi-file results go under
//!   `--output-dir`.
//! * Scalar knobs resolve as flag > config file > built-in default; seeds
//!   of stochastic subcommands have no built-in default and must come from
//!   a flag or the config file.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use prequential::calibration::{
    lil_statistic, mean_calibration, running_frequency, tail_summary, CalibrationTrace,
};
use prequential::dependence::{ci_table, independence_test};
use prequential::predictors::{
    default_epsilon, nonsense_predictor, run_predictor, sensitivity, Direction, PredictionTrace,
    Target,
};
use prequential::scoring::{compare, Preference};
use prequential::series::{
    empirical_quantile, load_prices, read_prices, returns, tail_fit, CsvFormat, KappaGrid,
    ReturnSeries, TailSide,
};
use prequential::simlab::{sample_markov, sample_pareto, sample_sv, MarkovSpec, SvSpec};
use prequential::tailrisk::{
    cmvar, cvar_of, cvar_power_tail, cvar_truncated, expectile_estimate, var_of,
};

use crate::config::Defaults;
use crate::failure::Failure;
use crate::predictor_spec::parse_predictor;

const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "preq",
    version,
    about = "Prequential verification of sequential risk forecasts",
    propagate_version = true
)]
pub struct Cli {
    /// Flat key=value file supplying defaults for omitted flags.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a price CSV into a simple-return CSV.
    Returns(ReturnsArgs),
    /// Run a forecaster over a return series and write its calibration record.
    Backtest(BacktestArgs),
    /// Test a hit sequence for independence against a Markov alternative.
    Independence(IndependenceArgs),
    /// Tabulate finite-sample null acceptance intervals for the dependence statistic.
    CiTable(CiTableArgs),
    /// Compare two forecast traces by moving-window consistent scores.
    Compare(CompareArgs),
    /// Estimate VaR/CVaR-type tail risk from a sample.
    Cvar(CvarArgs),
    /// Fit a power-law envelope to one tail of a sample.
    TailFit(TailFitArgs),
    /// Generate synthetic data with known ground truth.
    Simulate(SimulateArgs),
    /// Measure how a forecaster's next forecast reacts to its input history.
    Sensitivity(SensitivityArgs),
    /// Full verification report: backtest, calibration, independence, baseline comparison.
    Report(ReportArgs),
}

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let defaults = Defaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Returns(args) => run_returns(args),
        Command::Backtest(args) => run_backtest(args, &defaults),
        Command::Independence(args) => run_independence(args, &defaults),
        Command::CiTable(args) => run_ci_table(args, &defaults),
        Command::Compare(args) => run_compare(args, &defaults),
        Command::Cvar(args) => run_cvar(args, &defaults),
        Command::TailFit(args) => run_tail_fit(args, &defaults),
        Command::Simulate(args) => run_simulate(args, &defaults),
        Command::Sensitivity(args) => run_sensitivity(args, &defaults),
        Command::Report(args) => run_report(args, &defaults),
    }
}

// ---------------------------------------------------------------------------
// I/O plumbing
// ---------------------------------------------------------------------------

fn read_input(path: Option<&Path>) -> Result<Vec<u8>, Failure> {
    match path {
        Some(p) => {
            fs::read(p).map_err(|e| Failure::runtime(format!("reading {}: {e}", p.display())))
        }
        None => {
            let mut buf = Vec::new();
            std::io::stdin().lock().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, bytes)
            .map_err(|e| Failure::runtime(format!("writing {}: {e}", p.display()))),
        None => {
            std::io::stdout().lock().write_all(bytes)?;
            Ok(())
        }
    }
}

fn emit_json(path: Option<&Path>, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(path, text.as_bytes())
}

fn write_artifact(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, bytes)
        .map_err(|e| Failure::runtime(format!("writing {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .map_err(|e| Failure::runtime(format!("creating {}: {e}", dir.display())))
}

/// Serializes a library struct and stamps the schema version on it.
fn versioned<T: serde::Serialize>(value: &T) -> Result<serde_json::Value, Failure> {
    let mut v = serde_json::to_value(value)?;
    match v.as_object_mut() {
        Some(map) => {
            map.insert("schema_version".into(), SCHEMA_VERSION.into());
            Ok(v)
        }
        None => Err(Failure::runtime("expected a JSON object".to_string())),
    }
}

fn read_return_series(path: Option<&Path>) -> Result<ReturnSeries, Failure> {
    let bytes = read_input(path)?;
    Ok(ReturnSeries::read_csv(bytes.as_slice())?)
}

/// Reads a plain sample: either a `date,return` series (values taken in
/// order) or a single column of numbers with an optional header line.
fn read_sample(path: Option<&Path>) -> Result<Vec<f64>, Failure> {
    let bytes = read_input(path)?;
    let text =
        String::from_utf8(bytes).map_err(|_| Failure::validation("input is not valid UTF-8"))?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Failure::validation("empty input"))?;
    if header.split(',').any(|c| c.trim() == "date") {
        return Ok(ReturnSeries::read_csv(text.as_bytes())?.values());
    }
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if idx == 0 => {} // header line
            Err(_) => {
                return Err(Failure::validation(format!(
                    "line {}: {trimmed:?} is not a number",
                    idx + 1
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Failure::validation("no sample values in input"));
    }
    Ok(values)
}

/// Reads a hit sequence for the independence test. Accepts a forecast
/// trace (its `exceeded` column is inverted: a hit is a non-exceedance) or
/// a bare flag series with a `flag` column (nonzero = hit).
fn read_hits(path: Option<&Path>, beta: f64) -> Result<Vec<bool>, Failure> {
    let bytes = read_input(path)?;
    let text =
        String::from_utf8(bytes).map_err(|_| Failure::validation("input is not valid UTF-8"))?;
    let header = text
        .lines()
        .next()
        .ok_or_else(|| Failure::validation("empty input"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.contains(&"exceeded") {
        let trace = PredictionTrace::read_csv(text.as_bytes(), Target::Quantile(beta))?;
        return Ok(trace.steps.iter().map(|s| !s.exceeded).collect());
    }
    let Some(flag_idx) = columns.iter().position(|c| *c == "flag") else {
        return Err(Failure::validation(
            "input header must contain an 'exceeded' column (forecast trace) \
             or a 'flag' column (hit series)",
        ));
    };
    let mut hits = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(flag_idx)
            .map(str::trim)
            .ok_or_else(|| Failure::validation(format!("line {}: missing flag field", idx + 1)))?;
        let value: i64 = field.parse().map_err(|_| {
            Failure::validation(format!(
                "line {}: flag {field:?} is not an integer",
                idx + 1
            ))
        })?;
        hits.push(value != 0);
    }
    Ok(hits)
}

fn csv_bytes(
    write: impl FnOnce(&mut Vec<u8>) -> prequential::Result<()>,
) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    Ok(buf)
}

// ---------------------------------------------------------------------------
// returns
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ReturnsArgs {
    /// Price CSV; stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Return CSV destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
    /// Header name of the date column.
    #[arg(long, default_value = "date")]
    date_column: String,
    /// Header name of the price column.
    #[arg(long, default_value = "price")]
    price_column: String,
    /// Field delimiter of the price CSV.
    #[arg(long, default_value = ",")]
    delimiter: char,
}

fn run_returns(args: ReturnsArgs) -> Result<(), Failure> {
    if !args.delimiter.is_ascii() {
        return Err(Failure::validation(format!(
            "delimiter {:?} must be a single ASCII character",
            args.delimiter
        )));
    }
    let format = CsvFormat {
        delimiter: args.delimiter as u8,
        date_column: args.date_column,
        price_column: args.price_column,
    };
    let prices = match &args.input {
        Some(path) => load_prices(path, &format)?,
        None => {
            let bytes = read_input(None)?;
            read_prices(bytes.as_slice(), &format)?
        }
    };
    let series = returns(&prices)?;
    let csv = csv_bytes(|buf| series.write_csv(buf))?;
    emit(args.output.as_deref(), &csv)
}

// ---------------------------------------------------------------------------
// backtest
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Return CSV (`date,return`); stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Forecaster, e.g. rolling:window=20,rank=2 or
    /// adaptive:window=20,rank=2,varphi=1.2 (see long help of `preq backtest`).
    #[arg(long, value_name = "SPEC")]
    predictor: String,
    /// Quantile level the forecaster targets.
    #[arg(long)]
    beta: Option<f64>,
    /// Directory for trace.csv, the calibration CSVs and summary.json.
    #[arg(long, value_name = "DIR")]
    output_dir: PathBuf,
}

/// Calibration artifacts of one forecast trace; which files exist depends
/// on the trace target (quantile vs mean).
struct BacktestArtifacts {
    files: Vec<(&'static str, Vec<u8>)>,
    summary: serde_json::Value,
}

fn backtest_artifacts(
    trace: &PredictionTrace,
    predictor: &str,
) -> Result<BacktestArtifacts, Failure> {
    let mut files = vec![("trace.csv", csv_bytes(|buf| trace.write_csv(buf))?)];
    let steps = trace.len();
    let first_k = trace.steps.first().map_or(0, |s| s.k);
    let last_k = trace.steps.last().map_or(0, |s| s.k);
    let settled_from = (steps / 2).max(1);
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "predictor": predictor,
        "steps": steps,
        "first_k": first_k,
        "last_k": last_k,
    });
    let map = summary.as_object_mut().expect("json! object");
    match trace.target {
        Target::Quantile(nominal) => {
            let frequency = running_frequency(trace)?;
            let lil = lil_statistic(trace)?;
            map.insert("target".into(), json!("quantile"));
            map.insert("beta".into(), json!(nominal));
            map.insert(
                "exceedances".into(),
                json!(trace.steps.iter().filter(|s| s.exceeded).count()),
            );
            map.insert("terminal_frequency".into(), json!(frequency.terminal()));
            map.insert(
                "frequency_tail".into(),
                serde_json::to_value(tail_summary(&frequency, settled_from))?,
            );
            map.insert("lil_terminal".into(), json!(lil.terminal()));
            map.insert(
                "lil_tail".into(),
                serde_json::to_value(tail_summary(&lil, settled_from))?,
            );
            files.push(("frequency.csv", calibration_csv(&frequency)?));
            files.push(("lil.csv", calibration_csv(&lil)?));
        }
        Target::Mean => {
            let ratio = mean_calibration(trace)?;
            map.insert("target".into(), json!("mean"));
            map.insert("mean_ratio_terminal".into(), json!(ratio.terminal()));
            map.insert("mean_ratio_degenerate".into(), json!(ratio.degenerate));
            map.insert(
                "mean_ratio_tail".into(),
                serde_json::to_value(tail_summary(&ratio, settled_from))?,
            );
            files.push(("mean_ratio.csv", calibration_csv(&ratio)?));
        }
    }
    Ok(BacktestArtifacts { files, summary })
}

fn calibration_csv(trace: &CalibrationTrace) -> Result<Vec<u8>, Failure> {
    csv_bytes(|buf| trace.write_csv(buf))
}

fn run_backtest(args: BacktestArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let mut predictor = parse_predictor(&args.predictor, beta)?;
    let data = read_return_series(args.input.as_deref())?;
    let trace = run_predictor(predictor.as_mut(), &data)?;
    let artifacts = backtest_artifacts(&trace, &args.predictor)?;
    create_dir(&args.output_dir)?;
    for (name, bytes) in &artifacts.files {
        write_artifact(&args.output_dir, name, bytes)?;
    }
    let mut text = serde_json::to_string_pretty(&artifacts.summary)?;
    text.push('\n');
    write_artifact(&args.output_dir, "summary.json", text.as_bytes())
}

// ---------------------------------------------------------------------------
// independence
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct IndependenceArgs {
    /// Forecast trace or flag CSV; stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Nominal hit probability of the tested forecasts.
    #[arg(long)]
    beta: Option<f64>,
    /// Test size (two-sided where the null interval allows it).
    #[arg(long)]
    gamma: Option<f64>,
    /// Monte Carlo replications behind the null acceptance interval.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed of the Monte Carlo null sample.
    #[arg(long)]
    seed: Option<u64>,
    /// Verdict JSON destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn run_independence(args: IndependenceArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let gamma = defaults.resolve(args.gamma, "gamma", 0.05)?;
    let reps = defaults.resolve(args.reps, "reps", 10_000)?;
    let seed = defaults.require(args.seed, "seed")?;
    let hits = read_hits(args.input.as_deref(), beta)?;
    let result = independence_test(&hits, beta, gamma, reps, seed)?;
    let mut value = versioned(&result)?;
    let map = value.as_object_mut().expect("versioned returns an object");
    map.insert("n".into(), json!(hits.len()));
    map.insert("reps".into(), json!(reps));
    map.insert("seed".into(), json!(seed));
    emit_json(args.output.as_deref(), &value)
}

// ---------------------------------------------------------------------------
// ci-table
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CiTableArgs {
    /// Nominal hit probability.
    #[arg(long)]
    beta: Option<f64>,
    /// Data lengths to tabulate.
    #[arg(long, value_delimiter = ',', default_values_t = [250, 500, 1000])]
    lengths: Vec<usize>,
    /// Test sizes to tabulate.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10, 0.50])]
    gammas: Vec<f64>,
    /// Monte Carlo replications per data length.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed of the Monte Carlo null samples.
    #[arg(long)]
    seed: Option<u64>,
    /// Table CSV destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn run_ci_table(args: CiTableArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let reps = defaults.resolve(args.reps, "reps", 10_000)?;
    let seed = defaults.require(args.seed, "seed")?;
    let table = ci_table(beta, &args.lengths, &args.gammas, reps, seed)?;
    let csv = csv_bytes(|buf| table.write_csv(buf))?;
    emit(args.output.as_deref(), &csv)
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Forecast trace CSV of forecaster A.
    #[arg(long, value_name = "FILE")]
    trace_a: PathBuf,
    /// Forecast trace CSV of forecaster B.
    #[arg(long, value_name = "FILE")]
    trace_b: PathBuf,
    /// Quantile level the score penalizes at.
    #[arg(long)]
    beta: Option<f64>,
    /// Moving-average window length, in steps.
    #[arg(long)]
    window: Option<usize>,
    /// Comparison JSON destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn read_trace(path: &Path, beta: f64) -> Result<PredictionTrace, Failure> {
    let bytes = read_input(Some(path))?;
    Ok(PredictionTrace::read_csv(
        bytes.as_slice(),
        Target::Quantile(beta),
    )?)
}

fn comparison_json(
    comparison: &prequential::scoring::Comparison,
    beta: f64,
    window: usize,
) -> serde_json::Value {
    let count = |p: Preference| comparison.preferences.iter().filter(|&&x| x == p).count();
    let mean = |scores: &[f64]| scores.iter().sum::<f64>() / scores.len() as f64;
    json!({
        "schema_version": SCHEMA_VERSION,
        "beta": beta,
        "window": window,
        "first_k": comparison.first_k,
        "windows": comparison.preferences.len(),
        "preferred_a": count(Preference::A),
        "preferred_b": count(Preference::B),
        "ties": count(Preference::Tie),
        "preferred_fraction_a": comparison.preferred_fraction_a(),
        "mean_score_a": mean(&comparison.a.scores),
        "mean_score_b": mean(&comparison.b.scores),
    })
}

fn run_compare(args: CompareArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let window = defaults.resolve(args.window, "window", 50)?;
    let trace_a = read_trace(&args.trace_a, beta)?;
    let trace_b = read_trace(&args.trace_b, beta)?;
    let comparison = compare(&trace_a, &trace_b, beta, window)?;
    emit_json(
        args.output.as_deref(),
        &comparison_json(&comparison, beta, window),
    )
}

// ---------------------------------------------------------------------------
// cvar
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CvarMethod {
    /// Order-statistic quantile (VaR) only.
    Var,
    /// Empirical CVaR of the sample beyond the beta-quantile.
    Empirical,
    /// Central-measure proxy: the quantile at (1+beta)/2.
    Cmvar,
    /// Empirical quantiles up to eta, fitted power tail beyond.
    PowerTail,
    /// Truncated tail mean over quantile levels [beta, eta]; no tail model.
    Truncated,
    /// Expectile at level tau.
    Expectile,
}

#[derive(Debug, Args)]
pub struct CvarArgs {
    /// Sample CSV: a `date,return` series or one number per line; stdin
    /// when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Tail level of the risk measure.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, value_enum, default_value_t = CvarMethod::Empirical)]
    method: CvarMethod,
    /// Quantile level where the fitted tail takes over (power-tail,
    /// truncated).
    #[arg(long)]
    eta: Option<f64>,
    /// Expectile level; defaults to --beta.
    #[arg(long)]
    tau: Option<f64>,
    /// Tail exponent for the power-tail method; fitted from the sample
    /// when omitted.
    #[arg(long)]
    kappa: Option<f64>,
    /// Fraction of the sample used when fitting the tail exponent.
    #[arg(long)]
    fraction: Option<f64>,
    /// Smallest candidate tail exponent.
    #[arg(long, default_value_t = 1.05)]
    kappa_min: f64,
    /// Largest candidate tail exponent.
    #[arg(long, default_value_t = 10.0)]
    kappa_max: f64,
    /// Tail exponent grid spacing.
    #[arg(long, default_value_t = 0.01)]
    kappa_step: f64,
    /// Negate the sample first (turn returns into losses).
    #[arg(long)]
    negate: bool,
    /// Estimate JSON destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn run_cvar(args: CvarArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let mut sample = read_sample(args.input.as_deref())?;
    if args.negate {
        for v in &mut sample {
            *v = -*v;
        }
    }
    let curve = |tau: f64| empirical_quantile(&sample, tau).unwrap_or(f64::NAN);
    let mut fitted_tail = None;
    let estimate = match args.method {
        CvarMethod::Var => var_of(&sample, beta)?,
        CvarMethod::Empirical => cvar_of(&sample, beta)?,
        CvarMethod::Cmvar => cmvar(&sample, beta)?,
        CvarMethod::Expectile => expectile_estimate(&sample, args.tau.unwrap_or(beta))?,
        CvarMethod::Truncated => {
            let eta = defaults.resolve(args.eta, "eta", 0.99)?;
            cvar_truncated(curve, beta, eta)?
        }
        CvarMethod::PowerTail => {
            let eta = defaults.resolve(args.eta, "eta", 0.99)?;
            let kappa = match args.kappa {
                Some(k) => k,
                None => {
                    let fraction = defaults.resolve(args.fraction, "fraction", 0.1)?;
                    let grid = KappaGrid {
                        min: args.kappa_min,
                        max: args.kappa_max,
                        step: args.kappa_step,
                    };
                    let fit = tail_fit(&sample, TailSide::Right, fraction, &grid)?;
                    fitted_tail = Some(fit);
                    fit.kappa
                }
            };
            let q_eta = empirical_quantile(&sample, eta)?;
            cvar_power_tail(curve, q_eta, kappa, beta, eta)?
        }
    };
    let mut value = versioned(&estimate)?;
    let map = value.as_object_mut().expect("versioned returns an object");
    map.insert("n".into(), json!(sample.len()));
    if let Some(fit) = fitted_tail {
        map.insert("kappa_source".into(), json!("fitted"));
        map.insert("tail_fit".into(), serde_json::to_value(fit)?);
    } else if args.kappa.is_some() {
        map.insert("kappa_source".into(), json!("given"));
    }
    emit_json(args.output.as_deref(), &value)
}

// ---------------------------------------------------------------------------
// tail-fit
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(Debug, Args)]
pub struct TailFitArgs {
    /// Sample CSV: a `date,return` series or one number per line; stdin
    /// when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Which extreme of the sample to fit.
    #[arg(long, value_enum, default_value_t = SideArg::Right)]
    side: SideArg,
    /// Fraction of the sample treated as the tail.
    #[arg(long)]
    fraction: Option<f64>,
    /// Smallest candidate tail exponent.
    #[arg(long, default_value_t = 1.05)]
    kappa_min: f64,
    /// Largest candidate tail exponent.
    #[arg(long, default_value_t = 10.0)]
    kappa_max: f64,
    /// Tail exponent grid spacing.
    #[arg(long, default_value_t = 0.01)]
    kappa_step: f64,
    /// Negate the sample first (turn returns into losses).
    #[arg(long)]
    negate: bool,
    /// Fit JSON destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn run_tail_fit(args: TailFitArgs, defaults: &Defaults) -> Result<(), Failure> {
    let fraction = defaults.resolve(args.fraction, "fraction", 0.1)?;
    let mut sample = read_sample(args.input.as_deref())?;
    if args.negate {
        for v in &mut sample {
            *v = -*v;
        }
    }
    let side = match args.side {
        SideArg::Left => TailSide::Left,
        SideArg::Right => TailSide::Right,
    };
    let grid = KappaGrid {
        min: args.kappa_min,
        max: args.kappa_max,
        step: args.kappa_step,
    };
    let fit = tail_fit(&sample, side, fraction, &grid)?;
    let mut value = versioned(&fit)?;
    let map = value.as_object_mut().expect("versioned returns an object");
    map.insert("n".into(), json!(sample.len()));
    emit_json(args.output.as_deref(), &value)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(subcommand)]
    model: SimulateCommand,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Two-state hit chain with marginal P[hit] = beta (`k,flag` CSV).
    Markov(SimulateMarkovArgs),
    /// Stochastic-volatility returns (`date,return` CSV).
    Sv(SimulateSvArgs),
    /// Pareto sample, one value per line.
    Pareto(SimulateParetoArgs),
}

#[derive(Debug, Args)]
pub struct SimulateMarkovArgs {
    /// Marginal hit probability.
    #[arg(long)]
    beta: Option<f64>,
    /// Miss-to-hit transition probability; theta = beta is the i.i.d. null.
    #[arg(long)]
    theta: f64,
    /// Chain length.
    #[arg(long)]
    length: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Flag CSV destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateSvArgs {
    /// AR(1) coefficient of log volatility, in [0, 1).
    #[arg(long, default_value_t = 0.95)]
    persistence: f64,
    /// Innovation scale of log volatility; 0 gives i.i.d. Gaussian returns.
    #[arg(long, default_value_t = 0.2)]
    vol_of_vol: f64,
    /// Stationary volatility scale.
    #[arg(long, default_value_t = 0.02)]
    scale: f64,
    /// Series length.
    #[arg(long)]
    length: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the exact conditional oracle (volatility, mean, quantile
    /// per step) to this JSON file.
    #[arg(long, value_name = "FILE")]
    oracle: Option<PathBuf>,
    /// Quantile level reported in the oracle file.
    #[arg(long)]
    beta: Option<f64>,
    /// Return CSV destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateParetoArgs {
    /// Tail exponent of the power law.
    #[arg(long)]
    kappa: f64,
    /// Scale (left endpoint of the support).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Sample size.
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn run_simulate(args: SimulateArgs, defaults: &Defaults) -> Result<(), Failure> {
    match args.model {
        SimulateCommand::Markov(a) => {
            let beta = defaults.resolve(a.beta, "beta", 0.9)?;
            let seed = defaults.require(a.seed, "seed")?;
            let flags = sample_markov(&MarkovSpec {
                beta,
                theta: a.theta,
                length: a.length,
                seed,
            })?;
            let mut out = String::from("k,flag\n");
            for (k, flag) in flags.iter().enumerate() {
                out.push_str(&format!("{},{}\n", k + 1, u8::from(*flag)));
            }
            emit(a.output.as_deref(), out.as_bytes())
        }
        SimulateCommand::Sv(a) => {
            let seed = defaults.require(a.seed, "seed")?;
            let spec = SvSpec {
                persistence: a.persistence,
                vol_of_vol: a.vol_of_vol,
                scale: a.scale,
                length: a.length,
                seed,
            };
            let sample = sample_sv(&spec)?;
            if let Some(oracle_path) = &a.oracle {
                let beta = defaults.resolve(a.beta, "beta", 0.9)?;
                let steps: Vec<serde_json::Value> = (0..sample.len())
                    .map(|k| {
                        json!({
                            "k": k + 1,
                            "sigma": sample.conditional_sigma(k),
                            "mean": sample.conditional_mean(k),
                            "quantile": sample.conditional_quantile(k, beta),
                        })
                    })
                    .collect();
                let oracle = json!({
                    "schema_version": SCHEMA_VERSION,
                    "spec": spec,
                    "beta": beta,
                    "steps": steps,
                });
                emit_json(Some(oracle_path), &oracle)?;
            }
            let csv = csv_bytes(|buf| sample.returns.write_csv(buf))?;
            emit(a.output.as_deref(), &csv)
        }
        SimulateCommand::Pareto(a) => {
            let seed = defaults.require(a.seed, "seed")?;
            let sample = sample_pareto(a.kappa, a.scale, a.count, seed)?;
            let mut out = String::from("value\n");
            for v in &sample {
                out.push_str(&format!("{v}\n"));
            }
            emit(a.output.as_deref(), out.as_bytes())
        }
    }
}

// ---------------------------------------------------------------------------
// sensitivity
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    /// Return CSV used as the forecaster's history; stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Forecaster to probe (same grammar as `preq backtest`).
    #[arg(long, value_name = "SPEC")]
    predictor: String,
    /// Quantile level the forecaster targets.
    #[arg(long)]
    beta: Option<f64>,
    /// Perturbation direction: `ones` or `geometric:alpha=0.97`.
    #[arg(long, default_value = "ones")]
    direction: String,
    /// Perturbation size; a small multiple of the history's interquartile
    /// range when omitted.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Result JSON destination; stdout when omitted.
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

fn parse_direction(spec: &str) -> Result<Direction, Failure> {
    if spec == "ones" {
        return Ok(Direction::Ones);
    }
    if let Some(rest) = spec.strip_prefix("geometric:") {
        let Some(raw) = rest.strip_prefix("alpha=") else {
            return Err(Failure::validation(format!(
                "direction {spec:?}: expected geometric:alpha=<value>"
            )));
        };
        let alpha: f64 = raw.parse().map_err(|_| {
            Failure::validation(format!("direction {spec:?}: cannot parse alpha={raw:?}"))
        })?;
        return Ok(Direction::Geometric { alpha });
    }
    Err(Failure::validation(format!(
        "unknown direction {spec:?}; expected ones or geometric:alpha=<value>"
    )))
}

fn run_sensitivity(args: SensitivityArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let mut predictor = parse_predictor(&args.predictor, beta)?;
    let history = read_return_series(args.input.as_deref())?.values();
    let direction = parse_direction(&args.direction)?;
    let epsilon = match args.epsilon {
        Some(e) => e,
        None => default_epsilon(&history),
    };
    let vector = direction.vector(history.len())?;
    let slope = sensitivity(predictor.as_mut(), &history, &vector, epsilon)?;
    let value = json!({
        "schema_version": SCHEMA_VERSION,
        "predictor": args.predictor,
        "direction": args.direction,
        "epsilon": epsilon,
        "history_len": history.len(),
        "sensitivity": slope,
    });
    emit_json(args.output.as_deref(), &value)
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Return CSV (`date,return`); stdin when omitted.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Forecaster to verify (same grammar as `preq backtest`).
    #[arg(long, value_name = "SPEC")]
    predictor: String,
    /// Quantile level the forecaster targets.
    #[arg(long)]
    beta: Option<f64>,
    /// Size of the independence test.
    #[arg(long)]
    gamma: Option<f64>,
    /// Monte Carlo replications behind the independence test.
    #[arg(long)]
    reps: Option<usize>,
    /// Seed for the independence test and the baseline forecaster.
    #[arg(long)]
    seed: Option<u64>,
    /// Moving-average window of the baseline score comparison.
    #[arg(long)]
    window: Option<usize>,
    /// Directory for the report artifacts.
    #[arg(long, value_name = "DIR")]
    output_dir: PathBuf,
}

fn run_report(args: ReportArgs, defaults: &Defaults) -> Result<(), Failure> {
    let beta = defaults.resolve(args.beta, "beta", 0.9)?;
    let gamma = defaults.resolve(args.gamma, "gamma", 0.05)?;
    let reps = defaults.resolve(args.reps, "reps", 10_000)?;
    let window = defaults.resolve(args.window, "window", 50)?;
    let seed = defaults.require(args.seed, "seed")?;

    let mut predictor = parse_predictor(&args.predictor, beta)?;
    let data = read_return_series(args.input.as_deref())?;
    let trace = run_predictor(predictor.as_mut(), &data)?;
    // Everything downstream runs at the forecaster's actual nominal level;
    // a rolling window/rank pair implies its own level regardless of --beta.
    let beta = trace.target.beta().ok_or_else(|| {
        Failure::validation("report needs a quantile forecaster, not a mean forecaster")
    })?;
    let artifacts = backtest_artifacts(&trace, &args.predictor)?;

    // Independence of the hit sequence.
    let hits: Vec<bool> = trace.steps.iter().map(|s| !s.exceeded).collect();
    let test = independence_test(&hits, beta, gamma, reps, seed)?;
    let mut independence = versioned(&test)?;
    let map = independence
        .as_object_mut()
        .expect("versioned returns an object");
    map.insert("n".into(), json!(hits.len()));
    map.insert("reps".into(), json!(reps));
    map.insert("seed".into(), json!(seed));

    // Score comparison against a data-blind but frequency-calibrated
    // baseline spanning the bulk of the observed returns.
    let values = data.values();
    let low = empirical_quantile(&values, 0.01)?;
    let high = empirical_quantile(&values, 0.99)?;
    let baseline_seed = seed.wrapping_add(1);
    let baseline_spec = format!("nonsense:low={low},high={high},seed={baseline_seed}");
    let mut baseline = nonsense_predictor(low, high, beta, baseline_seed)?;
    let baseline_trace = run_predictor(&mut baseline, &data)?;
    let comparison = compare(&trace, &baseline_trace, beta, window)?;
    let mut comparison_value = comparison_json(&comparison, beta, window);
    comparison_value
        .as_object_mut()
        .expect("json! object")
        .insert("baseline".into(), json!(baseline_spec));

    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "predictor": args.predictor,
        "beta": beta,
        "gamma": gamma,
        "reps": reps,
        "seed": seed,
        "window": window,
        "observations": data.len(),
        "steps": trace.len(),
        "terminal_frequency": artifacts.summary["terminal_frequency"],
        "lil_terminal": artifacts.summary["lil_terminal"],
        "independence": {
            "theta_hat": test.theta_hat,
            "interval": test.interval,
            "reject": test.reject,
            "one_sided": test.one_sided,
        },
        "baseline": baseline_spec,
        "preferred_fraction_vs_baseline": comparison.preferred_fraction_a(),
        "artifacts": [
            "trace.csv", "frequency.csv", "lil.csv",
            "independence.json", "comparison.json", "summary.json",
        ],
    });

    create_dir(&args.output_dir)?;
    for (name, bytes) in &artifacts.files {
        write_artifact(&args.output_dir, name, bytes)?;
    }
    let write_json = |name: &str, value: &serde_json::Value| -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        write_artifact(&args.output_dir, name, text.as_bytes())
    };
    write_json("independence.json", &independence)?;
    write_json("comparison.json", &comparison_value)?;
    write_json("summary.json", &summary)
}

// ---------------------------------------------------------------------------

/// Compile-time guard: keep the flag names used by config resolution in
/// one place so the doc comment in `config` stays honest.
#[allow(dead_code)]
fn config_keys() -> HashMap<&'static str, &'static str> {
    HashMap::from([
        ("beta", "quantile level"),
        ("gamma", "test size"),
        ("reps", "Monte Carlo replications"),
        ("seed", "random seed"),
        ("window", "score window"),
        ("eta", "tail handover level"),
        ("fraction", "tail fraction"),
    ])
}
