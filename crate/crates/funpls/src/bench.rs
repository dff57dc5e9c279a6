//! Train/test benchmarking of the five fitters and Monte Carlo
//! verification of convergence rates.
//!
//! Reproducibility contract: a master seed defines one counter-based
//! generator; replicate `r` draws everything it needs from stream `r + 1`
//! of that generator (stream 0 is reserved for dataset-level generation,
//! such as attaching responses to an external curve set). Records are
//! ordered by (replicate, method, p) regardless of how the replicates
//! were scheduled, so output is byte-identical across thread counts.

use std::path::PathBuf;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::apls::{fit_apls_ortho, fit_apls_qr, fit_apls_raw, predict};
use crate::classic::{fit_classic, predict_classic};
use crate::cov::krylov_sequence;
use crate::error::{Error, Result};
use crate::metrics::{log_log_slope, median, quantile, skewness_excess_kurtosis};
use crate::pca::{eigendecompose, fit_pca, predict_pca};
use crate::population::{population_h_matrix, population_krylov, SpectralModel, SpectralModelDoc};
use crate::space::{inner_product, Curve, Dataset};

/// Target for the kernel norm after rescaling in rate experiments.
const RATE_KERNEL_NORM: f64 = 0.9;

/// The fitting methods the harness can benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    AplsRaw,
    AplsQr,
    AplsOrtho,
    Classic,
    Pca,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::AplsRaw => "apls_raw",
            Method::AplsQr => "apls_qr",
            Method::AplsOrtho => "apls_ortho",
            Method::Classic => "classic",
            Method::Pca => "pca",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "apls_raw" => Some(Method::AplsRaw),
            "apls_qr" => Some(Method::AplsQr),
            "apls_ortho" => Some(Method::AplsOrtho),
            "classic" => Some(Method::Classic),
            "pca" => Some(Method::Pca),
            _ => None,
        }
    }
}

/// Slope-coefficient pattern over the eigenfunction index: the four
/// standard windows put alternating-sign unit coefficients on components
/// 1-5, 6-10, 11-15 or 16-20, and `custom` supplies the list directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CasePattern {
    I,
    Ii,
    Iii,
    Iv,
    Custom(Vec<f64>),
}

impl CasePattern {
    /// Coefficients for components 1..=count (one-based index `j` gets
    /// `(-1)^j` inside the window, zero outside).
    pub fn coefficients(&self, count: usize) -> Result<Vec<f64>> {
        let (lo, hi) = match self {
            CasePattern::I => (1usize, 5usize),
            CasePattern::Ii => (6, 10),
            CasePattern::Iii => (11, 15),
            CasePattern::Iv => (16, 20),
            CasePattern::Custom(v) => {
                if v.len() > count {
                    return Err(Error::InvalidSpec(format!(
                        "{} custom coefficients but only {count} components",
                        v.len()
                    )));
                }
                let mut out = v.clone();
                out.resize(count, 0.0);
                return Ok(out);
            }
        };
        if count < hi {
            return Err(Error::InvalidSpec(format!(
                "case needs components up to {hi} but only {count} are available"
            )));
        }
        Ok((1..=count)
            .map(|j| {
                if j >= lo && j <= hi {
                    if j % 2 == 0 {
                        1.0
                    } else {
                        -1.0
                    }
                } else {
                    0.0
                }
            })
            .collect())
    }
}

/// How the noise level is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseRule {
    /// One-fifth rule: `sigma^2` is a fifth of the signal variance
    /// (analytic for model sources, empirical for external curve sets).
    #[default]
    SignalRule,
    /// Keep the model's own noise level.
    ModelSd,
    /// A fixed standard deviation.
    FixedSd(f64),
}

/// An external curve set on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveSource {
    pub curves_csv: PathBuf,
    #[serde(default)]
    pub grid_csv: Option<PathBuf>,
    /// When given, the benchmark runs against these observed responses and
    /// reports prediction error against them (the true slope is unknown).
    #[serde(default)]
    pub responses_csv: Option<PathBuf>,
}

fn default_n_test() -> usize {
    200
}

/// A complete benchmark description. Exactly one of `model` and `curves`
/// must be set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    #[serde(default)]
    pub model: Option<SpectralModelDoc>,
    #[serde(default)]
    pub curves: Option<CurveSource>,
    /// Slope pattern over the eigenbasis; defaults to the model's own
    /// slope coefficients for model sources. Required for external curve
    /// sets without responses (the pattern applies to their empirical
    /// eigenfunctions); forbidden when responses are supplied.
    #[serde(default)]
    pub case: Option<CasePattern>,
    #[serde(default)]
    pub noise: NoiseRule,
    pub n_train: usize,
    /// Test-set size per replicate for model sources (external curve sets
    /// use everything not in the training split).
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub replicates: usize,
    pub seed: u64,
    /// Inclusive range of component counts.
    pub p_range: (usize, usize),
    pub methods: Vec<Method>,
}

/// One (method, order, replicate) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub p: usize,
    pub replicate: usize,
    /// Mean squared prediction error against the true signal (needs the
    /// true slope).
    pub pe: Option<f64>,
    /// Integrated squared error of the slope estimate (needs the true
    /// slope).
    pub ise: Option<f64>,
    /// Mean squared prediction error against the observed responses
    /// (reported when the true slope is unknown).
    pub pe_hat: Option<f64>,
    pub error: Option<String>,
}

/// Mean squared deviation of predictions from the true signal values.
pub fn compute_pe(predictions: &[f64], true_signal: &[f64]) -> Result<f64> {
    if predictions.is_empty() || predictions.len() != true_signal.len() {
        return Err(Error::EmptyTestSet);
    }
    let n = predictions.len() as f64;
    Ok(predictions
        .iter()
        .zip(true_signal)
        .map(|(p, s)| (p - s) * (p - s))
        .sum::<f64>()
        / n)
}

/// Mean squared deviation of predictions from observed responses.
pub fn compute_pe_hat(predictions: &[f64], responses: &[f64]) -> Result<f64> {
    compute_pe(predictions, responses)
}

/// Integrated squared error between an estimated and a true slope curve.
pub fn compute_ise(estimated: &Curve, truth: &Curve) -> Result<f64> {
    let diff = estimated.sub(truth)?;
    inner_product(&diff, &diff)
}

/// Disjoint (train, test) index sets exhausting `0..n_total`.
pub fn split_indices(
    n_total: usize,
    n_train: usize,
    rng: &mut impl Rng,
) -> (Vec<usize>, Vec<usize>) {
    let mut indices: Vec<usize> = (0..n_total).collect();
    indices.shuffle(rng);
    let test = indices.split_off(n_train);
    (indices, test)
}

enum ResolvedSource {
    /// Simulate fresh train and test data each replicate.
    Model(SpectralModel),
    /// Split a fixed dataset each replicate; the slope is known when the
    /// responses were generated from a case pattern.
    External {
        dataset: Dataset,
        slope: Option<Curve>,
    },
}

fn resolve(spec: &SimulationSpec) -> Result<ResolvedSource> {
    if spec.replicates == 0 {
        return Err(Error::InvalidSpec("replicates must be at least 1".into()));
    }
    if spec.n_train < 2 {
        return Err(Error::InvalidSpec("n_train must be at least 2".into()));
    }
    if spec.p_range.0 == 0 || spec.p_range.0 > spec.p_range.1 {
        return Err(Error::InvalidSpec(format!(
            "invalid p_range {:?}",
            spec.p_range
        )));
    }
    if spec.methods.is_empty() {
        return Err(Error::InvalidSpec("no methods selected".into()));
    }
    match (&spec.model, &spec.curves) {
        (Some(doc), None) => {
            if spec.n_test == 0 {
                return Err(Error::InvalidSpec("n_test must be at least 1".into()));
            }
            let base = doc.clone().into_model()?;
            let with_case = match &spec.case {
                None => base,
                Some(pattern) => {
                    let coeffs = pattern.coefficients(base.rank())?;
                    base.with_slope_coefficients(coeffs)?
                }
            };
            let sigma = match spec.noise {
                NoiseRule::SignalRule => (with_case.signal_variance() / 5.0).sqrt(),
                NoiseRule::ModelSd => with_case.noise_sd(),
                NoiseRule::FixedSd(s) => s,
            };
            Ok(ResolvedSource::Model(with_case.with_noise_sd(sigma)?))
        }
        (None, Some(source)) => {
            let (grid, rows) = crate::io::read_curve_rows(source)?;
            let curves: Vec<Curve> = rows
                .into_iter()
                .map(|v| Curve::new(grid.clone(), v))
                .collect::<Result<_>>()?;
            if spec.n_train >= curves.len() {
                return Err(Error::InvalidSpec(format!(
                    "n_train {} must be below the number of curves {}",
                    spec.n_train,
                    curves.len()
                )));
            }
            match &source.responses_csv {
                Some(path) => {
                    if spec.case.is_some() {
                        return Err(Error::InvalidSpec(
                            "a case pattern cannot be combined with observed responses".into(),
                        ));
                    }
                    let responses = crate::io::read_responses_csv(path)?;
                    let dataset = Dataset::new(curves, responses)?;
                    Ok(ResolvedSource::External {
                        dataset,
                        slope: None,
                    })
                }
                None => {
                    let pattern = spec.case.as_ref().ok_or_else(|| {
                        Error::InvalidSpec(
                            "external curves without responses need a case pattern".into(),
                        )
                    })?;
                    // slope built on the empirical eigenfunctions of the
                    // full curve set
                    let placeholder = vec![0.0; curves.len()];
                    let all = Dataset::new(curves.clone(), placeholder)?;
                    let kernel = crate::cov::empirical_covariance(&all);
                    let count = match pattern {
                        CasePattern::I => 5,
                        CasePattern::Ii => 10,
                        CasePattern::Iii => 15,
                        CasePattern::Iv => 20,
                        CasePattern::Custom(v) => v.len(),
                    };
                    let eig = eigendecompose(&kernel, count.min(grid.len()))?;
                    let usable = eig
                        .eigenvalues()
                        .iter()
                        .take_while(|&&v| v > 0.0)
                        .count();
                    let coeffs = pattern.coefficients(usable)?;
                    let slope =
                        crate::space::assemble_slope(&eig.eigenfunctions()[..usable], &coeffs)?;
                    let sigma = match spec.noise {
                        NoiseRule::SignalRule => crate::sim::sigma_from_signal(&curves, &slope)?,
                        NoiseRule::FixedSd(s) => s,
                        NoiseRule::ModelSd => {
                            return Err(Error::InvalidSpec(
                                "model_sd noise needs a model source".into(),
                            ))
                        }
                    };
                    // responses generated once on stream 0
                    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
                    rng.set_stream(0);
                    let responses: Vec<f64> = curves
                        .iter()
                        .map(|c| {
                            let eps: f64 = rng.sample(StandardNormal);
                            inner_product(&slope, c).expect("shared grid") + sigma * eps
                        })
                        .collect();
                    let dataset = Dataset::new(curves, responses)?;
                    Ok(ResolvedSource::External {
                        dataset,
                        slope: Some(slope),
                    })
                }
            }
        }
        _ => Err(Error::InvalidSpec(
            "exactly one of `model` and `curves` must be given".into(),
        )),
    }
}

fn error_tag(e: &Error) -> String {
    match e {
        Error::IllConditioned { .. } => "ill_conditioned".into(),
        Error::RankDeficient { column, .. } => format!("rank_deficient_{column}"),
        Error::RankExceeded { .. } => "rank_exceeded".into(),
        Error::InsufficientTerms { .. } => "insufficient_terms".into(),
        _ => "fit_error".into(),
    }
}

/// Fits one method at one order and predicts the test curves. Returns the
/// predictions and the fitted slope.
fn fit_and_predict(
    method: Method,
    train: &Dataset,
    p: usize,
    test: &[Curve],
) -> Result<(Vec<f64>, Curve)> {
    match method {
        Method::AplsRaw => {
            let (model, _) = fit_apls_raw(train, p)?;
            let preds = test
                .iter()
                .map(|x| predict(&model, x))
                .collect::<Result<_>>()?;
            Ok((preds, model.slope().clone()))
        }
        Method::AplsQr => {
            let model = fit_apls_qr(train, p)?;
            let preds = test
                .iter()
                .map(|x| predict(&model, x))
                .collect::<Result<_>>()?;
            Ok((preds, model.slope().clone()))
        }
        Method::AplsOrtho => {
            let model = fit_apls_ortho(train, p)?;
            let preds = test
                .iter()
                .map(|x| predict(&model, x))
                .collect::<Result<_>>()?;
            Ok((preds, model.slope().clone()))
        }
        Method::Classic => {
            let model = fit_classic(train, p)?;
            let preds = test
                .iter()
                .map(|x| predict_classic(&model, x))
                .collect::<Result<_>>()?;
            Ok((preds, model.slope().clone()))
        }
        Method::Pca => {
            let model = fit_pca(train, p)?;
            let preds = test
                .iter()
                .map(|x| predict_pca(&model, x))
                .collect::<Result<_>>()?;
            Ok((preds, model.slope().clone()))
        }
    }
}

fn run_replicate(spec: &SimulationSpec, source: &ResolvedSource, replicate: usize) -> Vec<BenchRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(replicate as u64 + 1);

    // Assemble (train, test curves, true signals or observed responses).
    let (train, test_curves, truth): (Dataset, Vec<Curve>, std::result::Result<Vec<f64>, Vec<f64>>);
    let mut slope_truth: Option<Curve> = None;
    match source {
        ResolvedSource::Model(model) => {
            let total = spec.n_train + spec.n_test;
            let b = model.slope_curve();
            let curves: Vec<Curve> = {
                let sds: Vec<f64> = model.eigenvalues().iter().map(|t| t.sqrt()).collect();
                (0..total)
                    .map(|_| {
                        let mut x = model.mean_curve().clone();
                        for (sd, phi) in sds.iter().zip(model.eigenfunctions()) {
                            let xi: f64 = rng.sample(StandardNormal);
                            x.axpy_in_place(sd * xi, phi);
                        }
                        x
                    })
                    .collect()
            };
            let responses: Vec<f64> = curves
                .iter()
                .map(|c| {
                    let eps: f64 = rng.sample(StandardNormal);
                    inner_product(&b, c).expect("shared grid") + model.noise_sd() * eps
                })
                .collect();
            let train_data = Dataset::new(
                curves[..spec.n_train].to_vec(),
                responses[..spec.n_train].to_vec(),
            )
            .expect("validated sizes");
            let test: Vec<Curve> = curves[spec.n_train..].to_vec();
            let signals: Vec<f64> = test
                .iter()
                .map(|c| inner_product(&b, c).expect("shared grid"))
                .collect();
            slope_truth = Some(b);
            (train, test_curves, truth) = (train_data, test, Ok(signals));
        }
        ResolvedSource::External { dataset, slope } => {
            let (train_idx, test_idx) = split_indices(dataset.len(), spec.n_train, &mut rng);
            let train_data = Dataset::new(
                train_idx.iter().map(|&i| dataset.curves()[i].clone()).collect(),
                train_idx.iter().map(|&i| dataset.responses()[i]).collect(),
            )
            .expect("validated sizes");
            let test: Vec<Curve> = test_idx.iter().map(|&i| dataset.curves()[i].clone()).collect();
            match slope {
                Some(b) => {
                    let signals: Vec<f64> = test
                        .iter()
                        .map(|c| inner_product(b, c).expect("shared grid"))
                        .collect();
                    slope_truth = Some(b.clone());
                    (train, test_curves, truth) = (train_data, test, Ok(signals));
                }
                None => {
                    let observed: Vec<f64> =
                        test_idx.iter().map(|&i| dataset.responses()[i]).collect();
                    (train, test_curves, truth) = (train_data, test, Err(observed));
                }
            }
        }
    }

    let mut records = Vec::new();
    for &method in &spec.methods {
        for p in spec.p_range.0..=spec.p_range.1 {
            let record = match fit_and_predict(method, &train, p, &test_curves) {
                Ok((preds, slope)) => match &truth {
                    Ok(signals) => BenchRecord {
                        method,
                        p,
                        replicate,
                        pe: Some(compute_pe(&preds, signals).expect("nonempty test")),
                        ise: slope_truth
                            .as_ref()
                            .map(|b| compute_ise(&slope, b).expect("same grid")),
                        pe_hat: None,
                        error: None,
                    },
                    Err(observed) => BenchRecord {
                        method,
                        p,
                        replicate,
                        pe: None,
                        ise: None,
                        pe_hat: Some(compute_pe_hat(&preds, observed).expect("nonempty test")),
                        error: None,
                    },
                },
                Err(e) => BenchRecord {
                    method,
                    p,
                    replicate,
                    pe: None,
                    ise: None,
                    pe_hat: None,
                    error: Some(error_tag(&e)),
                },
            };
            records.push(record);
        }
    }
    records
}

/// Runs the full benchmark. `threads` of 0 or 1 runs replicates serially;
/// larger values bound the worker pool. Output is identical either way.
pub fn run_benchmark(spec: &SimulationSpec, threads: usize) -> Result<Vec<BenchRecord>> {
    let source = resolve(spec)?;
    let per_replicate: Vec<Vec<BenchRecord>> = if threads <= 1 {
        (0..spec.replicates)
            .map(|r| run_replicate(spec, &source, r))
            .collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            (0..spec.replicates)
                .into_par_iter()
                .map(|r| run_replicate(spec, &source, r))
                .collect()
        })
    };
    Ok(per_replicate.into_iter().flatten().collect())
}

/// Per-(method, order, metric) quartiles over the replicates that
/// produced a value.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub p: usize,
    pub metric: &'static str,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

pub fn quartile_summary(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in records {
        if !keys.contains(&(r.method, r.p)) {
            keys.push((r.method, r.p));
        }
    }
    let mut rows = Vec::new();
    for (method, p) in keys {
        let select = |f: fn(&BenchRecord) -> Option<f64>| -> Vec<f64> {
            records
                .iter()
                .filter(|r| r.method == method && r.p == p)
                .filter_map(f)
                .collect()
        };
        for (metric, values) in [
            ("pe", select(|r| r.pe)),
            ("ise", select(|r| r.ise)),
            ("pe_hat", select(|r| r.pe_hat)),
        ] {
            if values.is_empty() {
                continue;
            }
            rows.push(SummaryRow {
                method,
                p,
                metric,
                q1: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q3: quantile(&values, 0.75),
            });
        }
    }
    rows
}

/// One row of the rate table: median estimation errors at sample size `n`
/// for the `j`-th covariance power, plus the fitted log-log slope of that
/// power's median error across all sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub j: usize,
    /// Median L2 error of the estimated j-th power curve.
    pub median_err: f64,
    /// Median (over replicates) of the worst deviation of the system
    /// matrix entries up to order j.
    pub h_err: f64,
    /// Log-log slope of `median_err` against `n`, one value per `j`.
    pub slope: f64,
}

/// Spec for the rate experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSpec {
    pub model: SpectralModelDoc,
    pub n_values: Vec<usize>,
    pub j_max: usize,
    pub replicates: usize,
    pub seed: u64,
}

/// Measures how fast the empirical covariance powers and system-matrix
/// entries approach their population values as `n` grows.
///
/// The model's eigenvalues are rescaled so the kernel norm is 0.9 before
/// anything is simulated (the regime where the error terms of the
/// iterated estimates stay geometrically controlled); population truths
/// are recomputed from the rescaled model.
pub fn rate_experiment(
    model: &SpectralModel,
    n_values: &[usize],
    j_max: usize,
    replicates: usize,
    seed: u64,
) -> Result<Vec<RateRow>> {
    if n_values.len() < 2 {
        return Err(Error::InvalidSpec(
            "need at least two sample sizes to fit a slope".into(),
        ));
    }
    if j_max == 0 || replicates == 0 {
        return Err(Error::InvalidSpec(
            "j_max and replicates must be at least 1".into(),
        ));
    }
    let factor = RATE_KERNEL_NORM / model.kernel_hs_norm();
    let scaled = model.with_scaled_eigenvalues(factor)?;
    let truth_terms = population_krylov(&scaled, j_max)?;
    let truth_h = population_h_matrix(&scaled, j_max);
    let b = scaled.slope_curve();

    // err_by_nj[(ni, j)] and h_by_nj[(ni, j)] hold per-replicate samples
    let mut err_by_nj = vec![vec![Vec::with_capacity(replicates); j_max]; n_values.len()];
    let mut h_by_nj = vec![vec![Vec::with_capacity(replicates); j_max]; n_values.len()];
    for (ni, &n) in n_values.iter().enumerate() {
        for rep in 0..replicates {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1 + (ni * replicates + rep) as u64);
            let sds: Vec<f64> = scaled.eigenvalues().iter().map(|t| t.sqrt()).collect();
            let curves: Vec<Curve> = (0..n)
                .map(|_| {
                    let mut x = scaled.mean_curve().clone();
                    for (sd, phi) in sds.iter().zip(scaled.eigenfunctions()) {
                        let xi: f64 = rng.sample(StandardNormal);
                        x.axpy_in_place(sd * xi, phi);
                    }
                    x
                })
                .collect();
            let responses: Vec<f64> = curves
                .iter()
                .map(|c| {
                    let eps: f64 = rng.sample(StandardNormal);
                    inner_product(&b, c).expect("shared grid") + scaled.noise_sd() * eps
                })
                .collect();
            let data = Dataset::new(curves, responses)?;
            let seq = krylov_sequence(&data, j_max + 1)?;
            let diag = crate::apls::build_h_hat(&seq)?;
            for j in 1..=j_max {
                let diff = seq.power(j).sub(&truth_terms[j - 1])?;
                err_by_nj[ni][j - 1].push(diff.l2_norm());
                let mut worst: f64 = 0.0;
                for jj in 0..j {
                    for kk in 0..j {
                        worst = worst
                            .max((diag.h_matrix[(jj, kk)] - truth_h[(jj, kk)]).abs());
                    }
                }
                h_by_nj[ni][j - 1].push(worst);
            }
        }
    }

    let mut rows = Vec::new();
    for j in 1..=j_max {
        let medians: Vec<f64> = (0..n_values.len())
            .map(|ni| median(&err_by_nj[ni][j - 1]))
            .collect();
        let slope = log_log_slope(n_values, &medians);
        for (ni, &n) in n_values.iter().enumerate() {
            rows.push(RateRow {
                n,
                j,
                median_err: medians[ni],
                h_err: median(&h_by_nj[ni][j - 1]),
                slope,
            });
        }
    }
    // rows ordered by (n, j)
    rows.sort_by_key(|r| (r.n, r.j));
    Ok(rows)
}

/// Skewness and excess kurtosis of the scaled fluctuation
/// `sqrt(n) * (h_11_hat - h_11)` over independent replicates.
pub fn h11_normality_check(
    model: &SpectralModel,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let truth = population_h_matrix(model, 1)[(0, 0)];
    let b = model.slope_curve();
    let mut samples = Vec::with_capacity(replicates);
    for rep in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(rep as u64 + 1);
        let sds: Vec<f64> = model.eigenvalues().iter().map(|t| t.sqrt()).collect();
        let curves: Vec<Curve> = (0..n)
            .map(|_| {
                let mut x = model.mean_curve().clone();
                for (sd, phi) in sds.iter().zip(model.eigenfunctions()) {
                    let xi: f64 = rng.sample(StandardNormal);
                    x.axpy_in_place(sd * xi, phi);
                }
                x
            })
            .collect();
        let responses: Vec<f64> = curves
            .iter()
            .map(|c| {
                let eps: f64 = rng.sample(StandardNormal);
                inner_product(&b, c).expect("shared grid") + model.noise_sd() * eps
            })
            .collect();
        let data = Dataset::new(curves, responses)?;
        let seq = krylov_sequence(&data, 2)?;
        let h11 = inner_product(seq.power(2), seq.power(1))?;
        samples.push((n as f64).sqrt() * (h11 - truth));
    }
    Ok(skewness_excess_kurtosis(&samples))
}
