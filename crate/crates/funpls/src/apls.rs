//! The three PLS fitters built on the explicit covariance-power basis
//! (the sequence obtained by repeatedly applying the empirical covariance
//! kernel to the empirical cross-covariance), plus their shared prediction
//! rule.
//!
//! The raw fitter solves the normal equations of the empirical least
//! squares directly; its system matrix drifts toward singularity as the
//! order grows, which surfaces as a typed ill-conditioning error. The two
//! stabilized fitters orthogonalize first — one the n-by-p score matrix
//! under the Euclidean dot product, the other the basis curves themselves
//! under the covariance-weighted bilinear form. In exact arithmetic all
//! three produce the same predictions; `OrthoBasis` is the recommended
//! default for prediction.

use nalgebra::{DMatrix, DVector};

use crate::cov::{krylov_sequence, KrylovSequence};
use crate::error::{Error, Result};
use crate::gram::{modified_gram_schmidt, EuclideanProduct, KernelProduct};
use crate::metrics::{cond_estimate, tol};
use crate::space::{
    assemble_slope, center, check_same_grid, inner_product, Curve, Dataset, Kernel,
};

/// Which algorithm produced a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AplsVariant {
    /// Direct normal-equation solve.
    Raw,
    /// Score-matrix orthogonalization and triangular back-substitution.
    QrStabilized,
    /// Basis curves orthonormalized under the covariance form.
    OrthoBasis,
}

impl AplsVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            AplsVariant::Raw => "apls_raw",
            AplsVariant::QrStabilized => "apls_qr",
            AplsVariant::OrthoBasis => "apls_ortho",
        }
    }
}

/// A fitted model: centering information, the basis curves, their
/// coefficients, and the assembled slope.
#[derive(Debug, Clone)]
pub struct AplsModel {
    variant: AplsVariant,
    p: usize,
    mean_curve: Curve,
    mean_y: f64,
    basis: Vec<Curve>,
    coefficients: Vec<f64>,
    slope: Curve,
    /// The fitted covariance kernel, kept so the orthonormality constraint
    /// of the `OrthoBasis` variant can be audited. Not serialized.
    kernel: Option<Kernel>,
}

impl AplsModel {
    pub fn variant(&self) -> AplsVariant {
        self.variant
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mean_curve(&self) -> &Curve {
        &self.mean_curve
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn basis(&self) -> &[Curve] {
        &self.basis
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn slope(&self) -> &Curve {
        &self.slope
    }

    pub fn kernel(&self) -> Option<&Kernel> {
        self.kernel.as_ref()
    }
}

/// The assembled normal-equation system and its spectral summary.
#[derive(Debug, Clone)]
pub struct AplsDiagnostics {
    /// `h[(j,k)] = <terms[j+1], terms[k]>` (zero-based over orders 1..=p).
    pub h_matrix: DMatrix<f64>,
    /// `alpha[j] = <terms[0], terms[j]>`.
    pub alpha: DVector<f64>,
    /// Smallest eigenvalue of the symmetrized system matrix.
    pub smallest_eigenvalue: f64,
    /// Ratio of extreme singular values of the symmetrized system matrix.
    pub condition_estimate: f64,
}

/// Assembles the order-p normal-equation system from a sequence holding
/// p+1 terms: `h[(j,k)] = <power(j+2), power(k+1)>` in one-based powers,
/// `alpha[j] = <power(1), power(j+1)>`.
pub fn build_h_hat(seq: &KrylovSequence) -> Result<AplsDiagnostics> {
    if seq.len() < 2 {
        return Err(Error::InsufficientTerms {
            needed: 2,
            available: seq.len(),
        });
    }
    let p = seq.len() - 1;
    let h_matrix = DMatrix::from_fn(p, p, |j, k| {
        inner_product(seq.power(j + 2), seq.power(k + 1)).expect("shared grid")
    });
    let alpha = DVector::from_fn(p, |j, _| {
        inner_product(seq.power(1), seq.power(j + 1)).expect("shared grid")
    });
    let sym = (&h_matrix + h_matrix.transpose()) * 0.5;
    let smallest_eigenvalue = sym.symmetric_eigen().eigenvalues.min();
    let condition_estimate = cond_estimate(&h_matrix);
    Ok(AplsDiagnostics {
        h_matrix,
        alpha,
        smallest_eigenvalue,
        condition_estimate,
    })
}

/// The symmetric alternative system matrix built from higher powers:
/// entry `(j,k)` is `<power(j+k+2), power(1)>` (zero-based), so it depends
/// on `j+k` only and is Hankel and symmetric exactly.
///
/// Requires the sequence to extend to `2p` terms.
pub fn build_h_tilde(seq: &KrylovSequence, p: usize) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    if seq.len() < 2 * p {
        return Err(Error::InsufficientTerms {
            needed: 2 * p,
            available: seq.len(),
        });
    }
    // One inner product per anti-diagonal; equal j+k entries share a float.
    let moments: Vec<f64> = (2..=2 * p)
        .map(|s| inner_product(seq.power(s), seq.power(1)).expect("shared grid"))
        .collect();
    Ok(DMatrix::from_fn(p, p, |j, k| moments[j + k]))
}

/// Fits by solving the normal equations directly. Returns the model and
/// the system diagnostics; fails with a typed error carrying those
/// diagnostics when the condition estimate exceeds
/// `tol::H_CONDITION_LIMIT`.
pub fn fit_apls_raw(data: &Dataset, p: usize) -> Result<(AplsModel, AplsDiagnostics)> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let (mean_curve, mean_y, _) = center(data);
    let seq = krylov_sequence(data, p + 1)?;
    let diagnostics = build_h_hat(&seq)?;
    // An identically zero system (no cross-covariance at all, e.g. constant
    // responses) is consistent: the zero solution reproduces the response
    // mean.
    if diagnostics.alpha.iter().all(|&a| a == 0.0)
        && diagnostics.h_matrix.iter().all(|&h| h == 0.0)
    {
        let basis: Vec<Curve> = seq.terms()[..p].to_vec();
        let coefficients = vec![0.0; p];
        let slope = assemble_slope(&basis, &coefficients)?;
        let model = AplsModel {
            variant: AplsVariant::Raw,
            p,
            mean_curve,
            mean_y,
            basis,
            coefficients,
            slope,
            kernel: Some(seq.kernel().clone()),
        };
        return Ok((model, diagnostics));
    }
    if !diagnostics.condition_estimate.is_finite()
        || diagnostics.condition_estimate > tol::H_CONDITION_LIMIT
    {
        return Err(Error::IllConditioned {
            condition: diagnostics.condition_estimate,
            limit: tol::H_CONDITION_LIMIT,
            diagnostics: Box::new(diagnostics),
        });
    }
    let gamma = diagnostics
        .h_matrix
        .clone()
        .lu()
        .solve(&diagnostics.alpha)
        .ok_or_else(|| Error::IllConditioned {
            condition: diagnostics.condition_estimate,
            limit: tol::H_CONDITION_LIMIT,
            diagnostics: Box::new(diagnostics.clone()),
        })?;
    let basis: Vec<Curve> = seq.terms()[..p].to_vec();
    let coefficients: Vec<f64> = gamma.iter().copied().collect();
    let slope = assemble_slope(&basis, &coefficients)?;
    let model = AplsModel {
        variant: AplsVariant::Raw,
        p,
        mean_curve,
        mean_y,
        basis,
        coefficients,
        slope,
        kernel: Some(seq.kernel().clone()),
    };
    Ok((model, diagnostics))
}

/// Score matrix `s[(i,j)] = <centered X_i, power(j+1)>`.
fn score_matrix(centered: &Dataset, terms: &[Curve]) -> DMatrix<f64> {
    DMatrix::from_fn(centered.len(), terms.len(), |i, j| {
        inner_product(&centered.curves()[i], &terms[j]).expect("shared grid")
    })
}

/// Fits by orthonormalizing the n-by-p score columns (Euclidean dot
/// product) and back-substituting the triangular system, leaving the
/// covariance-power curves themselves as the model basis.
pub fn fit_apls_qr(data: &Dataset, p: usize) -> Result<AplsModel> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let (mean_curve, mean_y, centered) = center(data);
    let seq = krylov_sequence(data, p)?;
    let scores = score_matrix(&centered, seq.terms());
    let columns: Vec<DVector<f64>> = (0..p).map(|j| scores.column(j).into_owned()).collect();
    let (q, r) = modified_gram_schmidt(&columns, &EuclideanProduct)?;
    let yc = DVector::from_fn(data.len(), |i, _| centered.responses()[i]);
    // rhs[j] = u_j . yc, then back-substitute the upper triangular R
    let rhs: Vec<f64> = q.iter().map(|u| u.dot(&yc)).collect();
    let mut gamma = vec![0.0; p];
    for j in (0..p).rev() {
        let mut acc = rhs[j];
        for k in j + 1..p {
            acc -= r[(j, k)] * gamma[k];
        }
        gamma[j] = acc / r[(j, j)];
    }
    let basis: Vec<Curve> = seq.terms().to_vec();
    let slope = assemble_slope(&basis, &gamma)?;
    Ok(AplsModel {
        variant: AplsVariant::QrStabilized,
        p,
        mean_curve,
        mean_y,
        basis,
        coefficients: gamma,
        slope,
        kernel: Some(seq.kernel().clone()),
    })
}

/// Fits by transforming the covariance-power curves into an orthonormal
/// basis under the covariance-weighted bilinear form, then regressing the
/// centered responses on the resulting scores.
pub fn fit_apls_ortho(data: &Dataset, p: usize) -> Result<AplsModel> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let (mean_curve, mean_y, centered) = center(data);
    let seq = krylov_sequence(data, p)?;
    let kernel = seq.kernel().clone();
    let (raw_basis, _) = modified_gram_schmidt(
        seq.terms(),
        &KernelProduct { kernel: &kernel },
    )?;
    let basis: Vec<Curve> = raw_basis.into_iter().map(Curve::fix_sign).collect();
    let scores = score_matrix(&centered, &basis);
    let yc = DVector::from_fn(data.len(), |i, _| centered.responses()[i]);
    let normal = scores.transpose() * &scores;
    let rhs = scores.transpose() * yc;
    let beta = normal.lu().solve(&rhs).ok_or(Error::RankDeficient {
        column: p - 1,
        residual: 0.0,
    })?;
    let coefficients: Vec<f64> = beta.iter().copied().collect();
    let slope = assemble_slope(&basis, &coefficients)?;
    Ok(AplsModel {
        variant: AplsVariant::OrthoBasis,
        p,
        mean_curve,
        mean_y,
        basis,
        coefficients,
        slope,
        kernel: Some(kernel),
    })
}

/// Evaluates a fitted model at a new curve.
pub fn predict(model: &AplsModel, x: &Curve) -> Result<f64> {
    check_same_grid(model.mean_curve.grid(), x.grid())?;
    let deviation = x.sub(&model.mean_curve)?;
    Ok(model.mean_y + inner_product(&deviation, &model.slope)?)
}
