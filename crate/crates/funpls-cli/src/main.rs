//! Command line front end: dataset ingestion, model fitting and
//! prediction, benchmark and rate experiments, and synthetic data
//! emission.
//!
//! Exit codes: 0 on success, 2 for input/parse problems, 3 for
//! numerical/fit failures.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use funpls::apls::{build_h_hat, fit_apls_ortho, fit_apls_qr, fit_apls_raw, predict};
use funpls::bench::{
    quartile_summary, rate_experiment, run_benchmark, Method, RateSpec, SimulationSpec,
};
use funpls::classic::{fit_classic, predict_classic};
use funpls::cov::krylov_sequence;
use funpls::error::{Error, Result};
use funpls::io::{
    format_full, read_curves_csv, read_grid_csv, read_responses_csv, render_predictions,
    render_rates_csv, render_records_csv, render_summary_csv, write_curves_csv, write_grid_csv,
    write_responses_csv, ModelDocument,
};
use funpls::pca::{fit_pca, predict_pca};
use funpls::population::SpectralModelDoc;
use funpls::sim::{generate_responses, simulate_curves};
use funpls::space::{Curve, Dataset, Grid};

#[derive(Parser)]
#[command(
    name = "funpls",
    about = "Partial least squares and principal component regression for scalar-on-function data",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to curves and responses, writing a model JSON document.
    Fit(FitArgs),
    /// Predict responses for curves with a fitted model document.
    Predict(PredictArgs),
    /// Run a benchmark spec, emitting one CSV row per (method, p, replicate).
    Bench(BenchArgs),
    /// Run a convergence-rate experiment from a rate spec.
    Rates(RatesArgs),
    /// Draw synthetic curves and responses from a spectral model.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Curves CSV: n rows of m comma-separated values, no header.
    curves: PathBuf,
    /// Responses CSV: one value per line.
    responses: PathBuf,
    /// Grid CSV (`point,weight` with header). Defaults to abscissae
    /// 1..=m with trapezoid weights.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// One of: apls_raw, apls_qr, apls_ortho, classic, pca.
    #[arg(long)]
    method: String,
    /// Number of components.
    #[arg(long)]
    p: usize,
    /// Output path for the model JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON produced by `fit`.
    model: PathBuf,
    /// Curves CSV on the model grid.
    curves: PathBuf,
    /// Output path for predictions (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Benchmark spec JSON.
    spec: PathBuf,
    /// Output path for the records CSV (stdout when omitted and
    /// `--summary` not given).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print per-(method, p) quartiles to stdout instead of raw records.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct RatesArgs {
    /// Rate spec JSON.
    spec: PathBuf,
    /// Output path for the rate CSV (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Spectral model JSON.
    model: PathBuf,
    /// Number of curves to draw.
    #[arg(long)]
    n: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Output path for the curves CSV.
    #[arg(long = "out-curves")]
    out_curves: PathBuf,
    /// Output path for the responses CSV.
    #[arg(long = "out-responses")]
    out_responses: PathBuf,
    /// Optional output path for the grid CSV.
    #[arg(long = "out-grid")]
    out_grid: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Predict(args) => cmd_predict(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Rates(args) => cmd_rates(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("{} does not exist", path.display()),
        )));
    }
    Ok(())
}

fn load_dataset(
    curves: &Path,
    responses: &Path,
    grid: &Option<PathBuf>,
) -> Result<Dataset> {
    require_file(curves)?;
    require_file(responses)?;
    let rows = read_curves_csv(curves)?;
    let m = rows[0].len();
    let grid = match grid {
        Some(path) => {
            require_file(path)?;
            let g = read_grid_csv(path)?;
            if g.len() != m {
                return Err(Error::GridMismatch(format!(
                    "grid has {} points but curves have {m} columns",
                    g.len()
                )));
            }
            g
        }
        None => Grid::uniform_trapezoid(1.0, m as f64, m)?,
    };
    let curves: Vec<Curve> = rows
        .into_iter()
        .map(|v| Curve::new(grid.clone(), v))
        .collect::<Result<_>>()?;
    let ys = read_responses_csv(responses)?;
    Dataset::new(curves, ys)
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let method = Method::parse(&args.method).ok_or_else(|| {
        Error::InvalidInput(format!(
            "unknown method {:?}; expected apls_raw, apls_qr, apls_ortho, classic or pca",
            args.method
        ))
    })?;
    if args.p == 0 {
        return Err(Error::InvalidInput("--p must be at least 1".into()));
    }
    let data = load_dataset(&args.curves, &args.responses, &args.grid)?;

    // System diagnostics for the covariance-power fitters: assemble the
    // order-p system once and report its spectral summary.
    if matches!(method, Method::AplsRaw | Method::AplsQr | Method::AplsOrtho) {
        let seq = krylov_sequence(&data, args.p + 1)?;
        let diag = build_h_hat(&seq)?;
        eprintln!("condition_estimate: {:e}", diag.condition_estimate);
        eprintln!("lambda_min: {:e}", diag.smallest_eigenvalue);
    }

    let (doc, predictions): (ModelDocument, Vec<f64>) = match method {
        Method::AplsRaw => {
            let (model, _) = fit_apls_raw(&data, args.p)?;
            let preds = data
                .curves()
                .iter()
                .map(|c| predict(&model, c))
                .collect::<Result<_>>()?;
            (ModelDocument::from_apls(&model), preds)
        }
        Method::AplsQr => {
            let model = fit_apls_qr(&data, args.p)?;
            let preds = data
                .curves()
                .iter()
                .map(|c| predict(&model, c))
                .collect::<Result<_>>()?;
            (ModelDocument::from_apls(&model), preds)
        }
        Method::AplsOrtho => {
            let model = fit_apls_ortho(&data, args.p)?;
            let preds = data
                .curves()
                .iter()
                .map(|c| predict(&model, c))
                .collect::<Result<_>>()?;
            (ModelDocument::from_apls(&model), preds)
        }
        Method::Classic => {
            let model = fit_classic(&data, args.p)?;
            let preds = data
                .curves()
                .iter()
                .map(|c| predict_classic(&model, c))
                .collect::<Result<_>>()?;
            (ModelDocument::from_classic(&model), preds)
        }
        Method::Pca => {
            let model = fit_pca(&data, args.p)?;
            eprintln!(
                "theta_min: {:e}",
                model.eigensystem().eigenvalues()[args.p - 1]
            );
            let preds = data
                .curves()
                .iter()
                .map(|c| predict_pca(&model, c))
                .collect::<Result<_>>()?;
            (ModelDocument::from_pca(&model), preds)
        }
    };
    let rmse = {
        let n = data.len() as f64;
        let ss: f64 = predictions
            .iter()
            .zip(data.responses())
            .map(|(p, y)| (p - y) * (p - y))
            .sum();
        (ss / n).sqrt()
    };
    eprintln!("training_rmse: {:e}", rmse);
    let mut json = doc.to_json()?;
    json.push('\n');
    emit(&args.out, &json)
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    require_file(&args.model)?;
    require_file(&args.curves)?;
    let doc = ModelDocument::from_json(&fs::read_to_string(&args.model)?)?;
    let loaded = doc.into_predictor()?;
    let rows = read_curves_csv(&args.curves)?;
    let grid = loaded.mean_curve.grid().clone();
    if rows[0].len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "model grid has {} points but curves have {} columns",
            grid.len(),
            rows[0].len()
        )));
    }
    let predictions: Vec<f64> = rows
        .into_iter()
        .map(|v| {
            let x = Curve::new(grid.clone(), v)?;
            loaded.predict(&x)
        })
        .collect::<Result<_>>()?;
    emit(&args.out, &render_predictions(&predictions))
}

/// Worker cap from FUNPLS_THREADS: 0 means serial, unset means all
/// available cores. Output never depends on this.
fn thread_count() -> Result<usize> {
    match std::env::var("FUNPLS_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| {
            Error::InvalidInput(format!("FUNPLS_THREADS must be an integer, got {v:?}"))
        }),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    require_file(&args.spec)?;
    let spec: SimulationSpec = serde_json::from_str(&fs::read_to_string(&args.spec)?)?;
    let records = run_benchmark(&spec, thread_count()?)?;
    let records_csv = render_records_csv(&records);
    if args.summary {
        if let Some(path) = &args.out {
            fs::write(path, &records_csv)?;
        }
        print!("{}", render_summary_csv(&quartile_summary(&records)));
        Ok(())
    } else {
        emit(&args.out, &records_csv)
    }
}

fn cmd_rates(args: RatesArgs) -> Result<()> {
    require_file(&args.spec)?;
    let spec: RateSpec = serde_json::from_str(&fs::read_to_string(&args.spec)?)?;
    let model = spec.model.into_model()?;
    let rows = rate_experiment(&model, &spec.n_values, spec.j_max, spec.replicates, spec.seed)?;
    emit(&args.out, &render_rates_csv(&rows))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    require_file(&args.model)?;
    let doc: SpectralModelDoc = serde_json::from_str(&fs::read_to_string(&args.model)?)?;
    let model = doc.into_model()?;
    let curves = simulate_curves(&model, args.n, args.seed);
    // responses drawn from a distinct stream position: reuse the library
    // convention of one generator per purpose, offset the seed
    let data = generate_responses(&curves, &model, args.seed.wrapping_add(1))?;
    write_curves_csv(&args.out_curves, data.curves())?;
    write_responses_csv(&args.out_responses, data.responses())?;
    if let Some(path) = &args.out_grid {
        write_grid_csv(path, model.grid())?;
    }
    eprintln!(
        "wrote {} curves of {} points (signal sd scale {})",
        args.n,
        model.grid().len(),
        format_full(model.signal_variance().sqrt())
    );
    Ok(())
}
