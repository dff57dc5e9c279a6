//! Principal-component basis regression: eigendecomposition of the
//! covariance kernel under the quadrature inner product, and least squares
//! on the leading component scores. This is the comparison method in every
//! benchmark.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::tol;
use crate::space::{
    center, check_same_grid, inner_product, Curve, Dataset, Kernel,
};

/// Leading eigenpairs of a symmetric kernel, orthonormal under the grid
/// quadrature.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Vec<f64>,
    eigenfunctions: Vec<Curve>,
}

impl EigenSystem {
    /// Nonincreasing, nonnegative.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenfunctions(&self) -> &[Curve] {
        &self.eigenfunctions
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Solves the weighted eigenproblem for the integral operator represented
/// by `kernel`.
///
/// With `W` the diagonal weight matrix, the symmetric matrix
/// `W^(1/2) K W^(1/2)` is decomposed and the eigenvectors back-transformed,
/// so that the returned eigenfunctions are orthonormal under the quadrature
/// inner product and satisfy the operator eigenrelation. Eigenvalues below
/// `tol::EIGENVALUE_CLAMP_REL` of the largest (or negative) are clamped to
/// zero. Signs follow the largest-entry-positive convention.
pub fn eigendecompose(kernel: &Kernel, r: usize) -> Result<EigenSystem> {
    let m = kernel.grid().len();
    if r == 0 || r > m {
        return Err(Error::InvalidInput(format!(
            "requested {r} eigenpairs on a grid of {m} points"
        )));
    }
    let asym = kernel.asymmetry();
    if asym > tol::KERNEL_ASYMMETRY_REL {
        return Err(Error::AsymmetricKernel(asym));
    }
    let sqrt_w: Vec<f64> = kernel.grid().weights().iter().map(|w| w.sqrt()).collect();
    let mut sym = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = sqrt_w[i] * kernel.values()[(i, j)] * sqrt_w[j];
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]].max(0.0);
    let clamp = tol::EIGENVALUE_CLAMP_REL * top;
    let mut eigenvalues = Vec::with_capacity(r);
    let mut eigenfunctions = Vec::with_capacity(r);
    for &idx in order.iter().take(r) {
        let lambda = eig.eigenvalues[idx];
        eigenvalues.push(if lambda < clamp { 0.0 } else { lambda });
        let col = eig.eigenvectors.column(idx);
        let values: Vec<f64> = (0..m).map(|i| col[i] / sqrt_w[i]).collect();
        let phi = Curve::new(kernel.grid().clone(), values)?.fix_sign();
        eigenfunctions.push(phi);
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenfunctions,
    })
}

/// A fitted principal-component regression.
#[derive(Debug, Clone)]
pub struct PcaModel {
    p: usize,
    mean_curve: Curve,
    mean_y: f64,
    eigensystem: EigenSystem,
    coefficients: Vec<f64>,
    slope: Curve,
}

impl PcaModel {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mean_curve(&self) -> &Curve {
        &self.mean_curve
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn eigensystem(&self) -> &EigenSystem {
        &self.eigensystem
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn slope(&self) -> &Curve {
        &self.slope
    }
}

/// Least squares of the centered responses on the leading `p` component
/// scores.
pub fn fit_pca(data: &Dataset, p: usize) -> Result<PcaModel> {
    if p == 0 {
        return Err(Error::InvalidInput("component count must be at least 1".into()));
    }
    let (mean_curve, mean_y, centered) = center(data);
    let kernel = crate::cov::empirical_covariance(data);
    let capped = p.min(data.grid().len());
    let eigensystem = eigendecompose(&kernel, capped)?;
    let usable = eigensystem
        .eigenvalues()
        .iter()
        .take_while(|&&v| v > 0.0)
        .count();
    if p > usable {
        return Err(Error::RankExceeded {
            requested: p,
            available: usable,
        });
    }
    let n = data.len();
    let scores = DMatrix::from_fn(n, p, |i, j| {
        inner_product(&centered.curves()[i], &eigensystem.eigenfunctions()[j])
            .expect("shared grid")
    });
    let yc = DVector::from_fn(n, |i, _| centered.responses()[i]);
    let normal = scores.transpose() * &scores;
    let rhs = scores.transpose() * yc;
    let coeffs = normal
        .lu()
        .solve(&rhs)
        .ok_or(Error::RankExceeded {
            requested: p,
            available: usable,
        })?;
    let coefficients: Vec<f64> = coeffs.iter().copied().collect();
    let slope = crate::space::assemble_slope(
        &eigensystem.eigenfunctions()[..p],
        &coefficients,
    )?;
    Ok(PcaModel {
        p,
        mean_curve,
        mean_y,
        eigensystem,
        coefficients,
        slope,
    })
}

/// Evaluates the fitted regression at a new curve.
pub fn predict_pca(model: &PcaModel, x: &Curve) -> Result<f64> {
    check_same_grid(model.mean_curve.grid(), x.grid())?;
    let deviation = x.sub(&model.mean_curve)?;
    Ok(model.mean_y + inner_product(&deviation, &model.slope)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::{population_kernel, SpectralModel};
    use crate::space::{apply_kernel, Grid};
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn unit_grid(m: usize) -> Arc<Grid> {
        Grid::uniform_trapezoid(0.0, 1.0, m).unwrap()
    }

    fn random_dataset(n: usize, m: usize, seed: u64) -> Dataset {
        let g = unit_grid(m);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curves: Vec<Curve> = (0..n)
            .map(|_| {
                Curve::new(g.clone(), (0..m).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .unwrap()
            })
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        Dataset::new(curves, ys).unwrap()
    }

    #[test]
    fn rank_one_kernel_has_a_single_pair() {
        let g = unit_grid(32);
        let raw = Curve::from_fn(g.clone(), |t| 1.0 + (2.0 * t).sin());
        let phi = raw.scaled(1.0 / raw.l2_norm());
        let theta = 0.8;
        let m = g.len();
        let mut kv = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                kv[(i, j)] = theta * phi.values()[i] * phi.values()[j];
            }
        }
        let kernel = Kernel::new(g, kv).unwrap();
        let eig = eigendecompose(&kernel, 3).unwrap();
        assert!((eig.eigenvalues()[0] - theta).abs() < 1e-10);
        assert_eq!(eig.eigenvalues()[1], 0.0);
        assert_eq!(eig.eigenvalues()[2], 0.0);
        let dot = inner_product(&eig.eigenfunctions()[0], &phi).unwrap();
        assert!((dot.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn asymmetric_kernel_is_rejected() {
        let g = unit_grid(8);
        let kernel = Kernel::from_fn(g, |s, t| s - t);
        assert!(matches!(
            eigendecompose(&kernel, 2),
            Err(Error::AsymmetricKernel(_))
        ));
    }

    #[test]
    fn eigen_residuals_small_on_empirical_kernels() {
        let data = random_dataset(12, 20, 31);
        let kernel = crate::cov::empirical_covariance(&data);
        let eig = eigendecompose(&kernel, 8).unwrap();
        let top = eig.eigenvalues()[0];
        for k in 0..eig.len() {
            let lhs = apply_kernel(&kernel, &eig.eigenfunctions()[k]).unwrap();
            let mut resid = lhs.clone();
            resid.axpy_in_place(-eig.eigenvalues()[k], &eig.eigenfunctions()[k]);
            assert!(
                resid.l2_norm() <= 1e-8 * top,
                "residual {} at pair {k}",
                resid.l2_norm()
            );
        }
        // orthonormality
        for i in 0..eig.len() {
            for j in i..eig.len() {
                let target = if i == j { 1.0 } else { 0.0 };
                let dot =
                    inner_product(&eig.eigenfunctions()[i], &eig.eigenfunctions()[j]).unwrap();
                assert!((dot - target).abs() < 1e-8);
            }
        }
        // ordering
        for pair in eig.eigenvalues().windows(2) {
            assert!(pair[0] >= pair[1]);
        }
    }

    #[test]
    fn eigenvalue_sum_matches_kernel_trace() {
        let data = random_dataset(10, 16, 32);
        let kernel = crate::cov::empirical_covariance(&data);
        let eig = eigendecompose(&kernel, 16).unwrap();
        let sum: f64 = eig.eigenvalues().iter().sum();
        let trace = kernel.trace();
        assert!((sum - trace).abs() <= 1e-8 * trace.abs().max(1e-300));
    }

    #[test]
    fn noiseless_single_component_signal_fits_exactly() {
        let g = unit_grid(24);
        let model =
            SpectralModel::with_cosine_basis(g.clone(), vec![1.0], vec![2.0], 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let curves: Vec<Curve> = (0..20)
            .map(|_| model.eigenfunctions()[0].scaled(rng.random_range(-1.0..1.0)))
            .collect();
        let b = model.slope_curve();
        let ys: Vec<f64> = curves.iter().map(|c| inner_product(&b, c).unwrap()).collect();
        let data = Dataset::new(curves, ys).unwrap();
        let fitted = fit_pca(&data, 1).unwrap();
        let mut rss = 0.0;
        let mut scale = 0.0;
        for (c, y) in data.curves().iter().zip(data.responses()) {
            let e = predict_pca(&fitted, c).unwrap() - y;
            rss += e * e;
            scale += y * y;
        }
        assert!(rss <= 1e-12 * scale.max(1e-300));
    }

    #[test]
    fn constant_responses_give_zero_coefficients() {
        let g = unit_grid(12);
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let curves: Vec<Curve> = (0..8)
            .map(|_| {
                Curve::new(g.clone(), (0..12).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .unwrap()
            })
            .collect();
        let data = Dataset::new(curves, vec![5.0; 8]).unwrap();
        let fitted = fit_pca(&data, 3).unwrap();
        for c in fitted.coefficients() {
            assert!(c.abs() < 1e-12);
        }
        let x = Curve::from_fn(g, |t| t);
        assert!((predict_pca(&fitted, &x).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_normal_equations_oracle() {
        let data = random_dataset(40, 16, 35);
        let p = 5;
        let fitted = fit_pca(&data, p).unwrap();
        // oracle: explicit normal equations on the same scores
        let (_, _, centered) = center(&data);
        let scores = DMatrix::from_fn(40, p, |i, j| {
            inner_product(
                &centered.curves()[i],
                &fitted.eigensystem().eigenfunctions()[j],
            )
            .unwrap()
        });
        let yc = DVector::from_fn(40, |i, _| centered.responses()[i]);
        let sol = (scores.transpose() * &scores)
            .try_inverse()
            .unwrap()
            * (scores.transpose() * yc);
        for (a, b) in fitted.coefficients().iter().zip(sol.iter()) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
    }

    #[test]
    fn prediction_is_affine_and_matches_score_oracle() {
        let data = random_dataset(24, 12, 36);
        let fitted = fit_pca(&data, 3).unwrap();
        // x = mean gives mean_y
        assert!(
            (predict_pca(&fitted, fitted.mean_curve()).unwrap() - fitted.mean_y()).abs() == 0.0
        );
        // linearity in x
        let g = data.grid().clone();
        let f = Curve::from_fn(g.clone(), |t| (3.0 * t).sin());
        let x1 = fitted.mean_curve().add(&f).unwrap();
        let x2 = fitted.mean_curve().add(&f.scaled(2.0)).unwrap();
        let d1 = predict_pca(&fitted, &x1).unwrap() - fitted.mean_y();
        let d2 = predict_pca(&fitted, &x2).unwrap() - fitted.mean_y();
        assert!((d2 - 2.0 * d1).abs() <= 1e-12 * d1.abs().max(1.0));
        // score-space oracle
        let x = Curve::from_fn(g, |t| t * t - 0.3);
        let dev = x.sub(fitted.mean_curve()).unwrap();
        let mut expect = fitted.mean_y();
        for (c, phi) in fitted
            .coefficients()
            .iter()
            .zip(fitted.eigensystem().eigenfunctions())
        {
            expect += c * inner_product(&dev, phi).unwrap();
        }
        assert!((predict_pca(&fitted, &x).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn score_columns_nearly_uncorrelated() {
        let data = random_dataset(60, 20, 37);
        let p = 4;
        let fitted = fit_pca(&data, p).unwrap();
        let (_, _, centered) = center(&data);
        let n = data.len();
        let top = fitted.eigensystem().eigenvalues()[0];
        for j in 0..p {
            for k in 0..p {
                let mut acc = 0.0;
                for c in centered.curves() {
                    acc += inner_product(c, &fitted.eigensystem().eigenfunctions()[j]).unwrap()
                        * inner_product(c, &fitted.eigensystem().eigenfunctions()[k]).unwrap();
                }
                let target = if j == k {
                    n as f64 * fitted.eigensystem().eigenvalues()[j]
                } else {
                    0.0
                };
                assert!(
                    (acc - target).abs() <= 1e-6 * n as f64 * top,
                    "scores ({j},{k}): {acc} vs {target}"
                );
            }
        }
    }

    #[test]
    fn sign_flip_leaves_predictions_unchanged() {
        let data = random_dataset(20, 10, 38);
        let fitted = fit_pca(&data, 2).unwrap();
        // flip the second eigenfunction and its coefficient by hand
        let flipped_basis = vec![
            fitted.eigensystem().eigenfunctions()[0].clone(),
            fitted.eigensystem().eigenfunctions()[1].scaled(-1.0),
        ];
        let flipped_coeffs = vec![fitted.coefficients()[0], -fitted.coefficients()[1]];
        let slope = crate::space::assemble_slope(&flipped_basis, &flipped_coeffs).unwrap();
        let x = Curve::from_fn(data.grid().clone(), |t| 1.0 - t);
        let dev = x.sub(fitted.mean_curve()).unwrap();
        let direct = fitted.mean_y() + inner_product(&dev, &slope).unwrap();
        let original = predict_pca(&fitted, &x).unwrap();
        // slope values agree bit for bit: c*phi == (-c)*(-phi) in IEEE 754
        assert_eq!(slope.values(), fitted.slope().values());
        assert_eq!(direct, original);
    }

    #[test]
    fn tied_eigenvalues_recover_the_invariant_subspace() {
        // with a tied leading pair, individual eigenfunctions are
        // arbitrary within the plane; the spanned subspace is not
        let g = unit_grid(32);
        let model = SpectralModel::with_cosine_basis(
            g.clone(),
            vec![0.8, 0.8, 0.2],
            vec![0.0, 0.0, 0.0],
            0.0,
        )
        .unwrap();
        let kernel = population_kernel(&model);
        let eig = eigendecompose(&kernel, 2).unwrap();
        assert!((eig.eigenvalues()[0] - 0.8).abs() < 1e-10);
        assert!((eig.eigenvalues()[1] - 0.8).abs() < 1e-10);
        // projector onto the recovered pair equals the model's
        let w = g.weights();
        let m = g.len();
        let projector = |family: &[Curve]| {
            let mut proj = DMatrix::<f64>::zeros(m, m);
            for u in family {
                for i in 0..m {
                    for j in 0..m {
                        proj[(i, j)] += u.values()[i] * u.values()[j] * w[j];
                    }
                }
            }
            proj
        };
        let diff = projector(&eig.eigenfunctions()[..2])
            - projector(&model.eigenfunctions()[..2]);
        let op_norm = diff.svd(false, false).singular_values.max();
        assert!(op_norm < 1e-8, "subspace distance {op_norm}");
    }

    #[test]
    fn p_beyond_usable_rank_is_an_error() {
        // two curves span one centered dimension
        let g = unit_grid(10);
        let c1 = Curve::from_fn(g.clone(), |t| t);
        let c2 = Curve::from_fn(g.clone(), |t| 2.0 * t);
        let data = Dataset::new(vec![c1, c2], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            fit_pca(&data, 3),
            Err(Error::RankExceeded { .. })
        ));
    }
}
