//! Population-truth computations for finite-rank spectral models.
//!
//! A [`SpectralModel`] fixes a covariance kernel by its eigenpairs and a
//! slope function by its coefficients in that eigenbasis. Every quantity
//! the empirical estimators target (covariance powers applied to the
//! cross-covariance, the moment matrix and its solution, the constrained
//! orthonormal basis, the truncated predictor) then has a closed form,
//! exact up to round-off, which the test suites use as ground truth.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gram::{modified_gram_schmidt, QuadratureProduct};
use crate::metrics::tol;
use crate::space::{
    apply_kernel, assemble_slope, check_same_grid, inner_product, k_bilinear, k_norm, Curve, Grid,
    Kernel,
};

/// Orthonormality tolerance demanded of a model's eigenfunctions under the
/// grid quadrature.
const BASIS_ORTHONORMALITY_TOL: f64 = 1e-10;

/// A finite-rank population: eigenvalues, orthonormal eigenfunctions, the
/// slope function's coefficients in that basis, the noise standard
/// deviation, and the process mean.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    grid: Arc<Grid>,
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Curve>,
    slope_coefficients: Vec<f64>,
    noise_sd: f64,
    mean_curve: Curve,
}

impl SpectralModel {
    pub fn new(
        eigenvalues: Vec<f64>,
        eigenfunctions: Vec<Curve>,
        slope_coefficients: Vec<f64>,
        noise_sd: f64,
        mean_curve: Curve,
    ) -> Result<SpectralModel> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidInput("model rank must be at least 1".into()));
        }
        if eigenvalues.len() != eigenfunctions.len()
            || eigenvalues.len() != slope_coefficients.len()
        {
            return Err(Error::InvalidInput(format!(
                "{} eigenvalues, {} eigenfunctions, {} slope coefficients",
                eigenvalues.len(),
                eigenfunctions.len(),
                slope_coefficients.len()
            )));
        }
        if !(noise_sd >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "noise sd must be nonnegative, got {noise_sd}"
            )));
        }
        for pair in eigenvalues.windows(2) {
            if !(pair[1] <= pair[0]) {
                return Err(Error::InvalidInput(
                    "eigenvalues must be nonincreasing".into(),
                ));
            }
        }
        if !(eigenvalues[eigenvalues.len() - 1] > 0.0) {
            return Err(Error::InvalidInput(
                "eigenvalues must be strictly positive".into(),
            ));
        }
        let grid = eigenfunctions[0].grid().clone();
        for f in &eigenfunctions {
            check_same_grid(&grid, f.grid())?;
        }
        check_same_grid(&grid, mean_curve.grid())?;
        for (i, fi) in eigenfunctions.iter().enumerate() {
            for (j, fj) in eigenfunctions.iter().enumerate().skip(i) {
                let target = if i == j { 1.0 } else { 0.0 };
                let dot = inner_product(fi, fj)?;
                if (dot - target).abs() > BASIS_ORTHONORMALITY_TOL {
                    return Err(Error::InvalidInput(format!(
                        "eigenfunctions {i} and {j} are not orthonormal: inner product {dot}"
                    )));
                }
            }
        }
        Ok(SpectralModel {
            grid,
            eigenvalues,
            eigenfunctions,
            slope_coefficients,
            noise_sd,
            mean_curve,
        })
    }

    /// Builds a model whose eigenfunctions come from orthonormalizing the
    /// cosine family `cos(k pi u)` on the grid (u the normalized abscissa),
    /// so they are orthonormal under the grid quadrature to round-off.
    pub fn with_cosine_basis(
        grid: Arc<Grid>,
        eigenvalues: Vec<f64>,
        slope_coefficients: Vec<f64>,
        noise_sd: f64,
    ) -> Result<SpectralModel> {
        let r = eigenvalues.len();
        if r > grid.len() {
            return Err(Error::InvalidInput(format!(
                "rank {r} exceeds the grid size {}",
                grid.len()
            )));
        }
        let (lo, hi) = grid.interval();
        let seeds: Vec<Curve> = (0..r)
            .map(|k| {
                Curve::from_fn(grid.clone(), |t| {
                    let u = (t - lo) / (hi - lo);
                    (k as f64 * std::f64::consts::PI * u).cos()
                })
            })
            .collect();
        let (basis, _) = modified_gram_schmidt(&seeds, &QuadratureProduct)?;
        let mean = Curve::zero(grid);
        SpectralModel::new(eigenvalues, basis, slope_coefficients, noise_sd, mean)
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Curve] {
        &self.eigenfunctions
    }

    pub fn slope_coefficients(&self) -> &[f64] {
        &self.slope_coefficients
    }

    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn mean_curve(&self) -> &Curve {
        &self.mean_curve
    }

    /// The slope function `b = sum_k beta_k phi_k`.
    pub fn slope_curve(&self) -> Curve {
        assemble_slope(&self.eigenfunctions, &self.slope_coefficients).expect("consistent model")
    }

    /// Hilbert–Schmidt norm of the covariance kernel, `sqrt(sum theta_k^2)`.
    pub fn kernel_hs_norm(&self) -> f64 {
        self.eigenvalues.iter().map(|t| t * t).sum::<f64>().sqrt()
    }

    /// Variance of the signal `integral of b X`: `sum_k theta_k beta_k^2`.
    pub fn signal_variance(&self) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.slope_coefficients)
            .map(|(t, b)| t * b * b)
            .sum()
    }

    /// Same model with every eigenvalue multiplied by `factor`.
    pub fn with_scaled_eigenvalues(&self, factor: f64) -> Result<SpectralModel> {
        SpectralModel::new(
            self.eigenvalues.iter().map(|t| t * factor).collect(),
            self.eigenfunctions.clone(),
            self.slope_coefficients.clone(),
            self.noise_sd,
            self.mean_curve.clone(),
        )
    }

    /// Same model with the slope coefficients replaced.
    pub fn with_slope_coefficients(&self, slope_coefficients: Vec<f64>) -> Result<SpectralModel> {
        SpectralModel::new(
            self.eigenvalues.clone(),
            self.eigenfunctions.clone(),
            slope_coefficients,
            self.noise_sd,
            self.mean_curve.clone(),
        )
    }

    /// Same model with the noise standard deviation replaced.
    pub fn with_noise_sd(&self, noise_sd: f64) -> Result<SpectralModel> {
        SpectralModel::new(
            self.eigenvalues.clone(),
            self.eigenfunctions.clone(),
            self.slope_coefficients.clone(),
            noise_sd,
            self.mean_curve.clone(),
        )
    }
}

/// On-disk JSON form of a spectral model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralModelDoc {
    pub grid: Grid,
    pub eigenvalues: Vec<f64>,
    pub eigenfunction_values: Vec<Vec<f64>>,
    pub slope_coefficients: Vec<f64>,
    pub noise_sd: f64,
    #[serde(default)]
    pub mean_curve_values: Option<Vec<f64>>,
}

impl SpectralModelDoc {
    pub fn from_model(model: &SpectralModel) -> SpectralModelDoc {
        SpectralModelDoc {
            grid: model.grid().as_ref().clone(),
            eigenvalues: model.eigenvalues().to_vec(),
            eigenfunction_values: model
                .eigenfunctions()
                .iter()
                .map(|c| c.values().to_vec())
                .collect(),
            slope_coefficients: model.slope_coefficients().to_vec(),
            noise_sd: model.noise_sd(),
            mean_curve_values: Some(model.mean_curve().values().to_vec()),
        }
    }

    pub fn into_model(self) -> Result<SpectralModel> {
        let grid = Grid::new(
            self.grid.points().to_vec(),
            self.grid.weights().to_vec(),
            self.grid.interval(),
        )?;
        let eigenfunctions = self
            .eigenfunction_values
            .into_iter()
            .map(|v| Curve::new(grid.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        let mean = match self.mean_curve_values {
            Some(v) => Curve::new(grid.clone(), v)?,
            None => Curve::zero(grid.clone()),
        };
        SpectralModel::new(
            self.eigenvalues,
            eigenfunctions,
            self.slope_coefficients,
            self.noise_sd,
            mean,
        )
    }
}

/// Everything the population solves for at order `p`.
#[derive(Debug, Clone)]
pub struct OracleReport {
    /// Moment matrix `H[(j,k)] = sum_r beta_r^2 theta_r^(j+k+1)`; constant
    /// along anti-diagonals and symmetric by construction.
    pub h_matrix: DMatrix<f64>,
    /// `alpha[j] = sum_r beta_r^2 theta_r^(j+1)`.
    pub alpha: DVector<f64>,
    /// Solution of `H gamma = alpha`.
    pub gamma: DVector<f64>,
    /// Smallest eigenvalue of `H`.
    pub lambda_p: f64,
    /// Residual objective at `gamma` (zero at full rank).
    pub tp_value: f64,
    /// The constrained orthonormal basis of the same span.
    pub psi_basis: Vec<Curve>,
    /// Truncated slope `sum_j gamma_j K^j(b)`.
    pub bp: Curve,
    /// The population slope `b` itself.
    pub slope: Curve,
}

/// The covariance kernel `sum_k theta_k phi_k(s) phi_k(t)` as a grid kernel.
pub fn population_kernel(model: &SpectralModel) -> Kernel {
    let m = model.grid().len();
    let mut values = DMatrix::zeros(m, m);
    for (theta, phi) in model.eigenvalues().iter().zip(model.eigenfunctions()) {
        for i in 0..m {
            let ti = theta * phi.values()[i];
            if ti == 0.0 {
                continue;
            }
            for j in i..m {
                values[(i, j)] += ti * phi.values()[j];
            }
        }
    }
    for i in 0..m {
        for j in 0..i {
            values[(i, j)] = values[(j, i)];
        }
    }
    Kernel::new(model.grid().clone(), values).expect("kernel matches grid")
}

/// The exact covariance powers applied to the cross-covariance:
/// term `j` (one-based) is `sum_k theta_k^j beta_k phi_k`.
pub fn population_krylov(model: &SpectralModel, p: usize) -> Result<Vec<Curve>> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let mut terms = Vec::with_capacity(p);
    for j in 1..=p {
        let mut term = Curve::zero(model.grid().clone());
        for ((theta, beta), phi) in model
            .eigenvalues()
            .iter()
            .zip(model.slope_coefficients())
            .zip(model.eigenfunctions())
        {
            term.axpy_in_place(theta.powi(j as i32) * beta, phi);
        }
        terms.push(term);
    }
    Ok(terms)
}

/// Raw moments `m_s = sum_r beta_r^2 theta_r^s`.
fn moment(model: &SpectralModel, s: usize) -> f64 {
    model
        .eigenvalues()
        .iter()
        .zip(model.slope_coefficients())
        .map(|(t, b)| b * b * t.powi(s as i32))
        .sum()
}

/// The population system matrix alone: `H[(j,k)] = m_{j+k+3}` in raw
/// moments, for any order (no solve, so the rank restriction of
/// [`population_h_gamma`] does not apply).
pub fn population_h_matrix(model: &SpectralModel, p: usize) -> DMatrix<f64> {
    let moments: Vec<f64> = (0..=2 * p + 1).map(|s| moment(model, s)).collect();
    DMatrix::from_fn(p, p, |j, k| moments[j + k + 3])
}

/// The residual objective at weights `w`:
/// `sum_k theta_k beta_k^2 (1 - sum_j w_j theta_k^j)^2`.
pub fn t_p(model: &SpectralModel, weights: &[f64]) -> f64 {
    model
        .eigenvalues()
        .iter()
        .zip(model.slope_coefficients())
        .map(|(&theta, &beta)| {
            let mut factor = 1.0;
            let mut power = 1.0;
            for w in weights {
                power *= theta;
                factor -= w * power;
            }
            theta * beta * beta * factor * factor
        })
        .sum()
}

/// Assembles the moment matrix, solves for the expansion weights, and
/// constructs the basis and truncated slope, all in closed form.
///
/// Beyond the model rank the moment matrix is singular by construction,
/// so `p` must not exceed it.
pub fn population_h_gamma(model: &SpectralModel, p: usize) -> Result<OracleReport> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    if p > model.rank() {
        return Err(Error::RankExceeded {
            requested: p,
            available: model.rank(),
        });
    }
    // Fill from precomputed moments: entries with equal j+k are the same
    // float, so the matrix is Hankel and symmetric exactly.
    let moments: Vec<f64> = (0..=2 * p + 1).map(|s| moment(model, s)).collect();
    let h_matrix = DMatrix::from_fn(p, p, |j, k| moments[j + k + 3]);
    let alpha = DVector::from_fn(p, |j, _| moments[j + 2]);
    let lu = h_matrix.clone().lu();
    let gamma = lu
        .solve(&alpha)
        .ok_or_else(|| Error::RankExceeded {
            requested: p,
            available: model.rank(),
        })?;
    let lambda_p = h_matrix
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .min();
    let tp_value = t_p(model, gamma.as_slice());
    let psi_basis = population_pls_basis(model, p)?;
    let krylov = population_krylov(model, p)?;
    let bp = assemble_slope(&krylov, gamma.as_slice())?;
    Ok(OracleReport {
        h_matrix,
        alpha,
        gamma,
        lambda_p,
        tp_value,
        psi_basis,
        bp,
        slope: model.slope_curve(),
    })
}

/// The constrained-maximization basis: each new function is the kernel
/// applied to the unexplained part of the slope, corrected inside the
/// previous span to restore kernel-orthogonality, then normalized to unit
/// kernel norm. Signs follow the largest-entry-positive convention.
pub fn population_pls_basis(model: &SpectralModel, p: usize) -> Result<Vec<Curve>> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    if p > model.rank() {
        return Err(Error::RankExceeded {
            requested: p,
            available: model.rank(),
        });
    }
    let kernel = population_kernel(model);
    let b = model.slope_curve();
    let scale = k_norm(&apply_kernel(&kernel, &b)?, &kernel)?;
    let mut basis: Vec<Curve> = Vec::with_capacity(p);
    for step in 0..p {
        let mut unexplained = b.clone();
        for psi in &basis {
            unexplained.axpy_in_place(-inner_product(&b, psi)?, psi);
        }
        let mut candidate = apply_kernel(&kernel, &unexplained)?;
        if step > 0 {
            // Correction coefficients from the kernel-orthogonality
            // constraints against every previous basis function, solved as
            // a dense (step x step) system.
            let gram = DMatrix::from_fn(step, step, |j, k| {
                k_bilinear(&basis[j], &basis[k], &kernel).expect("same grid")
            });
            let rhs = DVector::from_fn(step, |j, _| {
                -k_bilinear(&basis[j], &candidate, &kernel).expect("same grid")
            });
            let coeffs = gram.lu().solve(&rhs).ok_or(Error::RankDeficient {
                column: step,
                residual: 0.0,
            })?;
            for (c, psi) in coeffs.iter().zip(&basis) {
                candidate.axpy_in_place(*c, psi);
            }
        }
        let norm = k_norm(&candidate, &kernel)?;
        if norm <= tol::RANK_PIVOT_REL * scale {
            return Err(Error::RankDeficient {
                column: step,
                residual: norm,
            });
        }
        candidate.scale_in_place(1.0 / norm);
        // One cleanup pass scrubs the round-off left by the correction
        // solve; the constraint residuals otherwise cap how close the
        // function gets to the constrained maximum.
        for psi in &basis {
            let c = k_bilinear(&candidate, psi, &kernel)?;
            candidate.axpy_in_place(-c, psi);
        }
        let norm = k_norm(&candidate, &kernel)?;
        candidate.scale_in_place(1.0 / norm);
        basis.push(candidate.fix_sign());
    }
    Ok(basis)
}

/// Evaluates the order-`p` population predictor at a curve `x`.
pub fn population_predictor(model: &SpectralModel, p: usize, x: &Curve) -> Result<f64> {
    check_same_grid(model.grid(), x.grid())?;
    let report = population_h_gamma(model, p)?;
    let krylov = population_krylov(model, p)?;
    let b = model.slope_curve();
    let mean_y = inner_product(&b, model.mean_curve())?;
    let deviation = x.sub(model.mean_curve())?;
    let mut g = mean_y;
    for (gamma_j, term) in report.gamma.iter().zip(&krylov) {
        g += gamma_j * inner_product(&deviation, term)?;
    }
    Ok(g)
}
