//! Shared numerical-comparison utilities: relative norms, Gram defects,
//! condition estimates, and simple summary statistics used by the
//! benchmark harness and the test suites.

use nalgebra::DMatrix;

use crate::gram::ScalarProduct;
use crate::space::{Curve, Kernel};

/// The tolerance ledger. Every threshold the estimators and tests rely on
/// lives here so a change is a single edit.
pub mod tol {
    /// Shared pivot rule for all orthogonalizations: a column whose
    /// residual norm falls below this fraction of its own norm is treated
    /// as linearly dependent.
    pub const RANK_PIVOT_REL: f64 = 1e-12;

    /// Condition-estimate ceiling for the raw normal-equation solve.
    pub const H_CONDITION_LIMIT: f64 = 1e12;

    /// Eigenvalues below this fraction of the largest are clamped to zero.
    pub const EIGENVALUE_CLAMP_REL: f64 = 1e-14;

    /// Relative asymmetry above which a kernel is rejected for
    /// eigendecomposition.
    pub const KERNEL_ASYMMETRY_REL: f64 = 1e-10;
}

/// L2 distance between two curves relative to the norm of the reference
/// `g`. A zero reference with a nonzero observation reports as infinite
/// rather than an error. Not symmetric in its arguments.
pub fn rel_l2(f: &Curve, g: &Curve) -> f64 {
    let diff = f.sub(g).expect("curves share a grid");
    let denom = g.l2_norm();
    let num = diff.l2_norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// Kernel overload of [`rel_l2`] under the Hilbert–Schmidt style
/// double-quadrature norm.
pub fn rel_l2_kernel(f: &Kernel, g: &Kernel) -> f64 {
    let m = g.grid().len();
    let mut diff = f.values().clone();
    for i in 0..m {
        for j in 0..m {
            diff[(i, j)] -= g.values()[(i, j)];
        }
    }
    let diff = Kernel::new(f.grid().clone(), diff).expect("same grid");
    let denom = g.hs_norm();
    let num = diff.hs_norm();
    if denom == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / denom
    }
}

/// Largest deviation of the family's Gram matrix from the identity.
pub fn gram_defect<S: ScalarProduct>(family: &[S::Vector], sp: &S) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in family.iter().enumerate() {
        for (j, b) in family.iter().enumerate().skip(i) {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((sp.dot(a, b) - target).abs());
        }
    }
    worst
}

/// Condition estimate: ratio of the extreme singular values of the
/// symmetrized matrix. Infinite when the smallest singular value is zero.
pub fn cond_estimate(matrix: &DMatrix<f64>) -> f64 {
    let sym = (matrix + matrix.transpose()) * 0.5;
    let svd = sym.svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if max == 0.0 {
        return f64::INFINITY;
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// One observed-vs-reference comparison with its verdict.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub quantity: String,
    pub observed: f64,
    pub reference: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn new(quantity: &str, observed: f64, reference: f64, tolerance: f64) -> Self {
        let relative_error = if reference == 0.0 {
            if observed == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (observed - reference).abs() / reference.abs()
        };
        ComparisonReport {
            quantity: quantity.to_string(),
            observed,
            reference,
            relative_error,
            tolerance,
            pass: relative_error <= tolerance,
        }
    }
}

impl std::fmt::Display for ComparisonReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}: observed {:e}, reference {:e}, rel err {:e} (tol {:e}) -> {}",
            self.quantity,
            self.observed,
            self.reference,
            self.relative_error,
            self.tolerance,
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

/// Median of a sample (averaging the two middle order statistics for even
/// lengths). Panics on an empty slice.
pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile (the common "type 7" rule).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    assert!(!xs.is_empty(), "quantile of empty sample");
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let h = (v.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[usize], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let lx: Vec<f64> = xs.iter().map(|&x| (x as f64).ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Sample skewness and excess kurtosis (moment estimators).
pub fn skewness_excess_kurtosis(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}
