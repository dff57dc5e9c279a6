//! The conventional iterative PLS algorithm with deflation, kept as an
//! independent cross-check of the explicit-basis fitters.
//!
//! Each step extracts a unit-norm weight curve proportional to the
//! current cross-covariance, regresses the responses and the curves on
//! the resulting score by simple least squares, and deflates both before
//! the next step. The slope is assembled at the end through the inverse
//! of the weight/loading coupling matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::tol;
use crate::space::{
    assemble_slope, center, check_same_grid, inner_product, Curve, Dataset,
};

/// A fitted deflation-PLS model.
#[derive(Debug, Clone)]
pub struct ClassicPlsModel {
    p: usize,
    mean_curve: Curve,
    mean_y: f64,
    /// Unit-L2-norm weight curves extracted at each step.
    weight_curves: Vec<Curve>,
    /// Response regression coefficient per step.
    beta: Vec<f64>,
    /// Curve loading per step.
    delta: Vec<Curve>,
    /// The coupling matrix with entries `<delta_j, weight_k>`; unit upper
    /// triangular in exact arithmetic. Its inverse assembles the slope.
    m_inverse: DMatrix<f64>,
    slope: Curve,
}

impl ClassicPlsModel {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mean_curve(&self) -> &Curve {
        &self.mean_curve
    }

    pub fn mean_y(&self) -> f64 {
        self.mean_y
    }

    pub fn weight_curves(&self) -> &[Curve] {
        &self.weight_curves
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn delta(&self) -> &[Curve] {
        &self.delta
    }

    pub fn m_inverse(&self) -> &DMatrix<f64> {
        &self.m_inverse
    }

    pub fn slope(&self) -> &Curve {
        &self.slope
    }

    /// Coefficients of the slope in the weight-curve basis (the columns of
    /// the inverse coupling matrix applied to beta).
    pub fn slope_coefficients(&self) -> Vec<f64> {
        let m = self
            .m_inverse
            .clone()
            .try_inverse()
            .expect("coupling matrix is unit triangular");
        (0..self.p)
            .map(|j| (0..self.p).map(|k| self.beta[k] * m[(j, k)]).sum())
            .collect()
    }
}

/// Runs the deflation recursion for `p` steps.
pub fn fit_classic(data: &Dataset, p: usize) -> Result<ClassicPlsModel> {
    if p == 0 {
        return Err(Error::InvalidInput("order must be at least 1".into()));
    }
    let (mean_curve, mean_y, centered) = center(data);
    let n = data.len();
    let mut xs: Vec<Curve> = centered.curves().to_vec();
    let mut ys: Vec<f64> = centered.responses().to_vec();

    let mut weight_curves: Vec<Curve> = Vec::with_capacity(p);
    let mut beta = Vec::with_capacity(p);
    let mut delta: Vec<Curve> = Vec::with_capacity(p);

    for step in 0..p {
        // weight = normalized sum of X^[j] Y^[j]
        let mut weight = Curve::zero(data.grid().clone());
        for (x, y) in xs.iter().zip(&ys) {
            weight.axpy_in_place(*y, x);
        }
        let wnorm = weight.l2_norm();
        // Cauchy-Schwarz bound on the weight's norm
        let wscale: f64 = xs.iter().map(|x| x.l2_norm().powi(2)).sum::<f64>().sqrt()
            * ys.iter().map(|y| y * y).sum::<f64>().sqrt();
        if wnorm <= tol::RANK_PIVOT_REL * wscale.max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient {
                column: step,
                residual: wnorm,
            });
        }
        weight.scale_in_place(1.0 / wnorm);

        // scores against the new weight
        let scores: Vec<f64> = xs
            .iter()
            .map(|x| inner_product(x, &weight).expect("shared grid"))
            .collect();
        let score_ss: f64 = scores.iter().map(|s| s * s).sum();
        let score_scale: f64 = xs.iter().map(|x| x.l2_norm().powi(2)).sum();
        if score_ss <= tol::RANK_PIVOT_REL * score_scale {
            return Err(Error::RankDeficient {
                column: step,
                residual: score_ss.sqrt(),
            });
        }

        // simple least squares of responses and curves on the score
        let b_j: f64 = scores.iter().zip(&ys).map(|(s, y)| s * y).sum::<f64>() / score_ss;
        let mut d_j = Curve::zero(data.grid().clone());
        for (x, s) in xs.iter().zip(&scores) {
            d_j.axpy_in_place(*s, x);
        }
        d_j.scale_in_place(1.0 / score_ss);

        // deflate
        for i in 0..n {
            xs[i].axpy_in_place(-scores[i], &d_j);
            ys[i] -= b_j * scores[i];
        }

        weight_curves.push(weight);
        beta.push(b_j);
        delta.push(d_j);
    }

    let m_inverse = DMatrix::from_fn(p, p, |j, k| {
        inner_product(&delta[j], &weight_curves[k]).expect("shared grid")
    });
    let m = m_inverse
        .clone()
        .try_inverse()
        .ok_or(Error::RankDeficient {
            column: p - 1,
            residual: 0.0,
        })?;
    // slope = sum_{j,k} beta_k M[(j,k)] weight_j
    let coefficients: Vec<f64> = (0..p)
        .map(|j| (0..p).map(|k| beta[k] * m[(j, k)]).sum())
        .collect();
    let slope = assemble_slope(&weight_curves, &coefficients)?;

    Ok(ClassicPlsModel {
        p,
        mean_curve,
        mean_y,
        weight_curves,
        beta,
        delta,
        m_inverse,
        slope,
    })
}

/// Evaluates a fitted model at a new curve.
pub fn predict_classic(model: &ClassicPlsModel, x: &Curve) -> Result<f64> {
    check_same_grid(model.mean_curve.grid(), x.grid())?;
    let deviation = x.sub(&model.mean_curve)?;
    Ok(model.mean_y + inner_product(&deviation, &model.slope)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apls::{fit_apls_ortho, predict};
    use crate::cov::empirical_cross_covariance;
    use crate::population::SpectralModel;
    use crate::space::Grid;
    use nalgebra::DVector;
    use std::sync::Arc;

    fn unit_grid(m: usize) -> Arc<Grid> {
        Grid::uniform_trapezoid(0.0, 1.0, m).unwrap()
    }

    fn synthetic_dataset(n: usize, m: usize, noise_sd: f64, seed: u64) -> (SpectralModel, Dataset) {
        let g = unit_grid(m);
        let model = SpectralModel::with_cosine_basis(
            g,
            vec![1.0, 0.8, 0.62, 0.5, 0.4, 0.3, 0.24, 0.2],
            vec![0.9, -0.7, 0.8, -0.5, 0.6, -0.4, 0.3, -0.2],
            noise_sd,
        )
        .unwrap();
        let curves = crate::sim::simulate_curves(&model, n, seed);
        let data = crate::sim::generate_responses(&curves, &model, seed ^ 0xc1a551c).unwrap();
        (model, data)
    }

    #[test]
    fn first_weight_is_the_normalized_cross_covariance() {
        let (_, data) = synthetic_dataset(20, 16, 0.2, 41);
        let model = fit_classic(&data, 1).unwrap();
        let kb = empirical_cross_covariance(&data);
        let expected = kb.scaled(1.0 / kb.l2_norm());
        // same direction up to sign (the weight is not sign-normalized:
        // it is exactly the normalized cross-covariance sum, which equals
        // n * kb / ||n * kb||)
        let dot = inner_product(&model.weight_curves()[0], &expected).unwrap();
        assert!((dot - 1.0).abs() < 1e-12, "dot {dot}");
        assert!((model.weight_curves()[0].l2_norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weights_are_unit_norm_and_coupling_matrix_rebuilds() {
        let (_, data) = synthetic_dataset(25, 18, 0.3, 42);
        let p = 4;
        let model = fit_classic(&data, p).unwrap();
        for w in model.weight_curves() {
            assert!((w.l2_norm() - 1.0).abs() < 1e-10);
        }
        // rebuild the coupling matrix from the stored curves
        for j in 0..p {
            for k in 0..p {
                let direct =
                    inner_product(&model.delta()[j], &model.weight_curves()[k]).unwrap();
                assert!((model.m_inverse()[(j, k)] - direct).abs() < 1e-10);
            }
        }
        // unit upper triangular structure up to round-off
        let scale = model
            .m_inverse()
            .iter()
            .fold(0.0f64, |a, &v| a.max(v.abs()));
        for j in 0..p {
            assert!((model.m_inverse()[(j, j)] - 1.0).abs() < 1e-8 * scale.max(1.0));
            for k in 0..j {
                assert!(
                    model.m_inverse()[(j, k)].abs() < 1e-8 * scale.max(1.0),
                    "below-diagonal ({j},{k}) = {}",
                    model.m_inverse()[(j, k)]
                );
            }
        }
    }

    #[test]
    fn deflated_curves_orthogonal_to_extracted_weights() {
        let (_, data) = synthetic_dataset(20, 16, 0.25, 43);
        let p = 3;
        // re-run the recursion to inspect the deflated state
        let model = fit_classic(&data, p).unwrap();
        let (_, _, centered) = center(&data);
        let mut xs: Vec<Curve> = centered.curves().to_vec();
        let mut ys: Vec<f64> = centered.responses().to_vec();
        for step in 0..p {
            let w = &model.weight_curves()[step];
            let scores: Vec<f64> = xs.iter().map(|x| inner_product(x, w).unwrap()).collect();
            // residual orthogonality of the response regression
            let d = &model.delta()[step];
            let b = model.beta()[step];
            for i in 0..xs.len() {
                xs[i].axpy_in_place(-scores[i], d);
                ys[i] -= b * scores[i];
            }
            let y_dot_s: f64 = ys.iter().zip(&scores).map(|(y, s)| y * s).sum();
            let scale: f64 = scores.iter().map(|s| s * s).sum::<f64>().sqrt()
                * ys.iter().map(|y| y * y).sum::<f64>().sqrt();
            assert!(y_dot_s.abs() <= 1e-10 * scale.max(1e-300));
        }
        // after all steps the curves are orthogonal to every weight
        let xscale: f64 = centered.curves().iter().map(|c| c.l2_norm().powi(2)).sum();
        for w in model.weight_curves() {
            for x in &xs {
                let s = inner_product(x, w).unwrap();
                assert!(s.abs() <= 1e-8 * xscale.sqrt());
            }
        }
    }

    #[test]
    fn agrees_with_ortho_basis_fitter() {
        let (gen_model, data) = synthetic_dataset(60, 24, 0.3, 44);
        let test_curves = crate::sim::simulate_curves(&gen_model, 20, 4242);
        let y_scale = {
            let ys = data.responses();
            let mean = ys.iter().sum::<f64>() / ys.len() as f64;
            (ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / ys.len() as f64).sqrt()
        };
        for p in 1..=6 {
            let classic = fit_classic(&data, p).unwrap();
            let ortho = fit_apls_ortho(&data, p).unwrap();
            for x in &test_curves {
                let a = predict_classic(&classic, x).unwrap();
                let b = predict(&ortho, x).unwrap();
                assert!(
                    (a - b).abs() <= 1e-6 * y_scale,
                    "p={p}: classic {a} vs ortho {b}"
                );
            }
        }
    }

    #[test]
    fn training_fit_matches_dense_least_squares_on_weight_scores() {
        let (_, data) = synthetic_dataset(40, 18, 0.3, 45);
        let p = 3;
        let model = fit_classic(&data, p).unwrap();
        let (_, _, centered) = center(&data);
        // dense least squares of the centered responses on the weight scores
        let scores = DMatrix::from_fn(40, p, |i, j| {
            inner_product(&centered.curves()[i], &model.weight_curves()[j]).unwrap()
        });
        let yc = DVector::from_fn(40, |i, _| centered.responses()[i]);
        let sol = (scores.transpose() * &scores)
            .try_inverse()
            .unwrap()
            * (scores.transpose() * &yc);
        let oracle_fit = &scores * sol;
        let mut max_diff: f64 = 0.0;
        for i in 0..40 {
            let fitted = predict_classic(&model, &data.curves()[i]).unwrap() - model.mean_y();
            max_diff = max_diff.max((fitted - oracle_fit[i]).abs());
        }
        let scale = yc.norm();
        assert!(max_diff <= 1e-8 * scale, "max diff {max_diff}");
    }

    #[test]
    fn prediction_identities() {
        let (_, data) = synthetic_dataset(20, 14, 0.2, 46);
        let model = fit_classic(&data, 2).unwrap();
        assert_eq!(
            predict_classic(&model, model.mean_curve()).unwrap(),
            model.mean_y()
        );
        let f = Curve::from_fn(data.grid().clone(), |t| t * t);
        let x1 = model.mean_curve().add(&f).unwrap();
        let x2 = model.mean_curve().add(&f.scaled(3.0)).unwrap();
        let d1 = predict_classic(&model, &x1).unwrap() - model.mean_y();
        let d2 = predict_classic(&model, &x2).unwrap() - model.mean_y();
        assert!((d2 - 3.0 * d1).abs() <= 1e-12 * d1.abs().max(1.0));
        let other = Curve::zero(unit_grid(15));
        assert!(matches!(
            predict_classic(&model, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn degenerate_step_is_a_typed_error() {
        // all responses equal: the very first weight direction vanishes
        let g = unit_grid(10);
        let c1 = Curve::from_fn(g.clone(), |t| t);
        let c2 = Curve::from_fn(g.clone(), |t| 1.0 - t);
        let c3 = Curve::from_fn(g, |t| t * t);
        let data = Dataset::new(vec![c1, c2, c3], vec![4.0, 4.0, 4.0]).unwrap();
        match fit_classic(&data, 1) {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 0),
            other => panic!("expected rank error, got {other:?}"),
        }
    }
}
