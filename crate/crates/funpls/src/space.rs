//! Grids, curves and kernels: the discretized function space everything
//! else operates on.
//!
//! A function on a compact interval is represented by its values on a
//! strictly increasing grid, and every integral is the weighted sum of
//! values against the grid's quadrature weights. Trapezoid weights are
//! the default; any positive weights summing to the interval length are
//! accepted.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for the weight-sum consistency check at construction.
const WEIGHT_SUM_REL_TOL: f64 = 1e-10;

/// Quadrature nodes and weights on a compact interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    weights: Vec<f64>,
    interval: (f64, f64),
}

impl Grid {
    /// Builds a grid, validating that the points are strictly increasing
    /// inside the interval, the weights are positive, and the weights sum
    /// to the interval length.
    pub fn new(points: Vec<f64>, weights: Vec<f64>, interval: (f64, f64)) -> Result<Arc<Grid>> {
        let (lo, hi) = interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidGrid(format!(
                "interval ({lo}, {hi}) is not a finite nondegenerate interval"
            )));
        }
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        if points.len() != weights.len() {
            return Err(Error::InvalidGrid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        for pair in points.windows(2) {
            if !(pair[0] < pair[1]) {
                return Err(Error::InvalidGrid(format!(
                    "points not strictly increasing near {}",
                    pair[0]
                )));
            }
        }
        if points[0] < lo || *points.last().unwrap() > hi {
            return Err(Error::InvalidGrid(
                "points extend outside the interval".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::InvalidGrid("weights must all be positive".into()));
        }
        let sum: f64 = weights.iter().sum();
        let span = hi - lo;
        if (sum - span).abs() > WEIGHT_SUM_REL_TOL * span {
            return Err(Error::InvalidGrid(format!(
                "weights sum to {sum} but the interval length is {span}"
            )));
        }
        Ok(Arc::new(Grid {
            points,
            weights,
            interval,
        }))
    }

    /// Uniform grid of `m` points spanning `[lo, hi]` with trapezoid weights.
    pub fn uniform_trapezoid(lo: f64, hi: f64, m: usize) -> Result<Arc<Grid>> {
        if m < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 points, got {m}")));
        }
        let h = (hi - lo) / (m - 1) as f64;
        let points: Vec<f64> = (0..m).map(|i| lo + h * i as f64).collect();
        let mut weights = vec![h; m];
        weights[0] = h / 2.0;
        weights[m - 1] = h / 2.0;
        Grid::new(points, weights, (lo, hi))
    }

    /// Trapezoid weights on arbitrary strictly increasing points; the
    /// interval is taken to be `[points[0], points[m-1]]`.
    pub fn trapezoid_from_points(points: Vec<f64>) -> Result<Arc<Grid>> {
        if points.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {}",
                points.len()
            )));
        }
        let m = points.len();
        let mut weights = vec![0.0; m];
        weights[0] = (points[1] - points[0]) / 2.0;
        weights[m - 1] = (points[m - 1] - points[m - 2]) / 2.0;
        for i in 1..m - 1 {
            weights[i] = (points[i + 1] - points[i - 1]) / 2.0;
        }
        let interval = (points[0], points[m - 1]);
        Grid::new(points, weights, interval)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two points
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }
}

/// Returns an error unless the two grids are the same (by pointer or value).
pub fn check_same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "{} points on {:?} vs {} points on {:?}",
            a.len(),
            a.interval(),
            b.len(),
            b.interval()
        )))
    }
}

/// A function on the interval, stored as its values at the grid points.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Curve {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Curve> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "curve has {} values but the grid has {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Curve { grid, values })
    }

    pub fn zero(grid: Arc<Grid>) -> Curve {
        let values = vec![0.0; grid.len()];
        Curve { grid, values }
    }

    /// Samples `f` at the grid points.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Curve {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Curve { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Pointwise L2 norm under the grid quadrature.
    pub fn l2_norm(&self) -> f64 {
        inner_product(self, self).expect("same grid").max(0.0).sqrt()
    }

    pub fn scaled(&self, c: f64) -> Curve {
        Curve {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    /// self += c * other
    pub fn axpy_in_place(&mut self, c: f64, other: &Curve) {
        debug_assert_eq!(self.len(), other.len());
        for (v, o) in self.values.iter_mut().zip(&other.values) {
            *v += c * o;
        }
    }

    pub fn add(&self, other: &Curve) -> Result<Curve> {
        check_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }

    pub fn sub(&self, other: &Curve) -> Result<Curve> {
        check_same_grid(&self.grid, &other.grid)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Curve {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Flips the sign, if needed, so the entry of largest absolute value is
    /// positive. Ties resolve to the first such entry.
    pub fn fix_sign(mut self) -> Curve {
        let mut best = 0usize;
        for (i, v) in self.values.iter().enumerate() {
            if v.abs() > self.values[best].abs() {
                best = i;
            }
        }
        if self.values[best] < 0.0 {
            for v in &mut self.values {
                *v = -*v;
            }
        }
        self
    }
}

/// A bivariate function on the interval square, stored as the matrix
/// `values[(i, j)] = K(t_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: Arc<Grid>,
    values: DMatrix<f64>,
}

impl Kernel {
    pub fn new(grid: Arc<Grid>, values: DMatrix<f64>) -> Result<Kernel> {
        if values.nrows() != grid.len() || values.ncols() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "kernel is {}x{} but the grid has {} points",
                values.nrows(),
                values.ncols(),
                grid.len()
            )));
        }
        Ok(Kernel { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Kernel {
        let pts = grid.points();
        let m = pts.len();
        let values = DMatrix::from_fn(m, m, |i, j| f(pts[i], pts[j]));
        Kernel { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    /// Largest relative deviation from symmetry, `max |K_ij - K_ji| / max |K|`.
    pub fn asymmetry(&self) -> f64 {
        let m = self.grid.len();
        let mut max_dev: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for i in 0..m {
            for j in i..m {
                max_dev = max_dev.max((self.values[(i, j)] - self.values[(j, i)]).abs());
                max_abs = max_abs.max(self.values[(i, j)].abs());
            }
        }
        if max_abs == 0.0 {
            0.0
        } else {
            max_dev / max_abs
        }
    }

    /// Hilbert–Schmidt style norm: sqrt of the double quadrature of K².
    pub fn hs_norm(&self) -> f64 {
        let w = self.grid.weights();
        let m = self.grid.len();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                let v = self.values[(i, j)];
                acc += w[i] * w[j] * v * v;
            }
        }
        acc.max(0.0).sqrt()
    }

    /// Trace integral along the diagonal.
    pub fn trace(&self) -> f64 {
        let w = self.grid.weights();
        (0..self.grid.len()).map(|i| w[i] * self.values[(i, i)]).sum()
    }
}

/// A sample of curves with scalar responses, all on one grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    grid: Arc<Grid>,
    curves: Vec<Curve>,
    responses: Vec<f64>,
}

impl Dataset {
    pub fn new(curves: Vec<Curve>, responses: Vec<f64>) -> Result<Dataset> {
        if curves.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {}",
                curves.len()
            )));
        }
        if curves.len() != responses.len() {
            return Err(Error::InvalidInput(format!(
                "{} curves but {} responses",
                curves.len(),
                responses.len()
            )));
        }
        let grid = curves[0].grid().clone();
        for c in &curves[1..] {
            check_same_grid(&grid, c.grid())?;
        }
        Ok(Dataset {
            grid,
            curves,
            responses,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn curves(&self) -> &[Curve] {
        &self.curves
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }
}

/// Quadrature inner product of two curves on the same grid.
pub fn inner_product(f: &Curve, g: &Curve) -> Result<f64> {
    check_same_grid(f.grid(), g.grid())?;
    let w = f.grid().weights();
    let mut acc = 0.0;
    for i in 0..w.len() {
        acc += w[i] * f.values()[i] * g.values()[i];
    }
    Ok(acc)
}

/// Applies the integral operator with kernel `K` to `f`:
/// `result[j] = sum_i w_i f_i K[(i, j)]`.
pub fn apply_kernel(kernel: &Kernel, f: &Curve) -> Result<Curve> {
    check_same_grid(kernel.grid(), f.grid())?;
    let w = f.grid().weights();
    let m = w.len();
    let mut out = vec![0.0; m];
    let kv = kernel.values();
    for i in 0..m {
        let wf = w[i] * f.values()[i];
        if wf == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += wf * kv[(i, j)];
        }
    }
    Curve::new(f.grid().clone(), out)
}

/// Double integral of `f(s) g(t) K(s, t)`.
pub fn k_bilinear(f: &Curve, g: &Curve, kernel: &Kernel) -> Result<f64> {
    let kg = apply_kernel(kernel, g)?;
    inner_product(f, &kg)
}

/// Seminorm induced by a positive semidefinite kernel: sqrt of the
/// quadratic form, clamped at zero against round-off.
///
/// A quadratic form that is substantially negative (beyond round-off of
/// the operand scale) signals a non-PSD kernel and is reported as an error.
pub fn k_norm(f: &Curve, kernel: &Kernel) -> Result<f64> {
    let q = k_bilinear(f, f, kernel)?;
    let scale = f.l2_norm().powi(2) * kernel.hs_norm();
    let threshold = 1e-8 * scale.max(f64::MIN_POSITIVE);
    if q < -threshold {
        return Err(Error::NotPositiveSemidefinite {
            value: q,
            threshold,
        });
    }
    Ok(q.max(0.0).sqrt())
}

/// Centers a dataset: returns the mean curve, the mean response and the
/// dataset of deviations.
pub fn center(data: &Dataset) -> (Curve, f64, Dataset) {
    let n = data.len();
    let m = data.grid().len();
    let mut mean = vec![0.0; m];
    for c in data.curves() {
        for (s, v) in mean.iter_mut().zip(c.values()) {
            *s += v;
        }
    }
    for s in &mut mean {
        *s /= n as f64;
    }
    let mean_curve = Curve::new(data.grid().clone(), mean).expect("grid length");
    let mean_y = data.responses().iter().sum::<f64>() / n as f64;
    let curves = data
        .curves()
        .iter()
        .map(|c| c.sub(&mean_curve).expect("same grid"))
        .collect();
    let responses = data.responses().iter().map(|y| y - mean_y).collect();
    let centered = Dataset {
        grid: data.grid().clone(),
        curves,
        responses,
    };
    (mean_curve, mean_y, centered)
}

/// Builds the slope curve `sum_j coefficients[j] * basis[j]`.
///
/// Every fitted model assembles its slope through this one function so
/// that a model reloaded from disk reproduces predictions bit for bit.
pub fn assemble_slope(basis: &[Curve], coefficients: &[f64]) -> Result<Curve> {
    if basis.is_empty() || basis.len() != coefficients.len() {
        return Err(Error::InvalidInput(format!(
            "{} basis curves but {} coefficients",
            basis.len(),
            coefficients.len()
        )));
    }
    let mut slope = Curve::zero(basis[0].grid().clone());
    for (c, b) in coefficients.iter().zip(basis) {
        check_same_grid(slope.grid(), b.grid())?;
        slope.axpy_in_place(*c, b);
    }
    Ok(slope)
}
