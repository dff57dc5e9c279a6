//! Seeded simulation of curves and responses from a spectral model.
//!
//! All randomness flows through a counter-based generator seeded
//! explicitly, so every draw is reproducible bit for bit. The benchmark
//! harness derives one independent stream per replicate from a master
//! seed (see [`crate::bench`]).

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::population::SpectralModel;
use crate::space::{check_same_grid, inner_product, Curve, Dataset};

/// Draws `n` curves `mean + sum_k sqrt(theta_k) xi_k phi_k` with standard
/// normal coordinates. Curve `i` consumes its coordinates in eigenvalue
/// order before curve `i+1` starts, so output is deterministic in `seed`.
pub fn simulate_curves(model: &SpectralModel, n: usize, seed: u64) -> Vec<Curve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sds: Vec<f64> = model.eigenvalues().iter().map(|t| t.sqrt()).collect();
    (0..n)
        .map(|_| {
            let mut x = model.mean_curve().clone();
            for (sd, phi) in sds.iter().zip(model.eigenfunctions()) {
                let xi: f64 = rng.sample(StandardNormal);
                x.axpy_in_place(sd * xi, phi);
            }
            x
        })
        .collect()
}

/// Attaches responses `Y_i = <b, X_i> + eps_i` with independent
/// `N(0, noise_sd^2)` errors; one normal draw per curve, in order.
pub fn generate_responses(curves: &[Curve], model: &SpectralModel, seed: u64) -> Result<Dataset> {
    let b = model.slope_curve();
    for c in curves {
        check_same_grid(model.grid(), c.grid())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let responses: Vec<f64> = curves
        .iter()
        .map(|c| {
            let signal = inner_product(&b, c).expect("checked above");
            let eps: f64 = rng.sample(StandardNormal);
            signal + model.noise_sd() * eps
        })
        .collect();
    Dataset::new(curves.to_vec(), responses)
}

/// Noise level from the one-fifth rule: `sigma^2` is one fifth of the
/// sample variance (divisor n-1) of the signals `<b, X_i>`.
pub fn sigma_from_signal(curves: &[Curve], b: &Curve) -> Result<f64> {
    let signals: Vec<f64> = curves
        .iter()
        .map(|c| inner_product(b, c))
        .collect::<Result<_>>()?;
    let n = signals.len();
    if n < 2 {
        return Err(crate::error::Error::InvalidInput(format!(
            "need at least 2 curves, got {n}"
        )));
    }
    let mean = signals.iter().sum::<f64>() / n as f64;
    let var = signals.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((var / 5.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::rel_l2_kernel;
    use crate::population::population_kernel;
    use crate::space::Grid;
    use std::sync::Arc;

    fn unit_grid(m: usize) -> Arc<Grid> {
        Grid::uniform_trapezoid(0.0, 1.0, m).unwrap()
    }

    fn model_r2() -> SpectralModel {
        SpectralModel::with_cosine_basis(
            unit_grid(24),
            vec![1.0, 0.4],
            vec![1.0, -0.6],
            0.3,
        )
        .unwrap()
    }

    #[test]
    fn rank_one_curves_stay_on_the_line() {
        let g = unit_grid(16);
        let model = SpectralModel::with_cosine_basis(g, vec![0.8], vec![1.0], 0.0).unwrap();
        let curves = simulate_curves(&model, 10, 5);
        let phi = &model.eigenfunctions()[0];
        for c in &curves {
            // c = xi * phi for some scalar xi
            let xi = inner_product(c, phi).unwrap();
            let mut resid = c.clone();
            resid.axpy_in_place(-xi, phi);
            assert!(resid.l2_norm() < 1e-12);
        }
    }

    #[test]
    fn simulation_is_deterministic_in_the_seed() {
        let model = model_r2();
        let a = simulate_curves(&model, 7, 99);
        let b = simulate_curves(&model, 7, 99);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.values(), y.values());
        }
        let da = generate_responses(&a, &model, 7).unwrap();
        let db = generate_responses(&b, &model, 7).unwrap();
        assert_eq!(da.responses(), db.responses());
        let c = simulate_curves(&model, 7, 100);
        assert_ne!(a[0].values(), c[0].values());
    }

    #[test]
    fn noiseless_responses_equal_the_signal() {
        let model = model_r2().with_noise_sd(0.0).unwrap();
        let curves = simulate_curves(&model, 12, 3);
        let data = generate_responses(&curves, &model, 4).unwrap();
        let b = model.slope_curve();
        for (c, y) in data.curves().iter().zip(data.responses()) {
            assert_eq!(*y, inner_product(&b, c).unwrap());
        }
    }

    #[test]
    fn zero_slope_gives_pure_noise_with_the_right_variance() {
        let g = unit_grid(16);
        let sigma = 0.7;
        let model =
            SpectralModel::with_cosine_basis(g, vec![1.0, 0.5], vec![0.0, 0.0], sigma).unwrap();
        let curves = simulate_curves(&model, 1000, 11);
        let data = generate_responses(&curves, &model, 12).unwrap();
        let n = data.len() as f64;
        let mean = data.responses().iter().sum::<f64>() / n;
        let var = data
            .responses()
            .iter()
            .map(|y| (y - mean) * (y - mean))
            .sum::<f64>()
            / (n - 1.0);
        // variance of the sample variance of N(0, s^2) is 2 s^4 / (n-1)
        let se = (2.0 * sigma.powi(4) / (n - 1.0)).sqrt();
        assert!(
            (var - sigma * sigma).abs() < 3.0 * se,
            "sample variance {var} vs {}",
            sigma * sigma
        );
    }

    #[test]
    fn empirical_covariance_converges_to_the_population_kernel() {
        let model = model_r2();
        let curves = simulate_curves(&model, 2000, 21);
        let ys = vec![0.0; 2000];
        let data = Dataset::new(curves, ys).unwrap();
        let khat = crate::cov::empirical_covariance(&data);
        let ktrue = population_kernel(&model);
        assert!(rel_l2_kernel(&khat, &ktrue) < 0.1);
    }

    #[test]
    fn sigma_rule_examples() {
        let g = unit_grid(16);
        let phi = Curve::from_fn(g.clone(), |t| t);
        // identical signals: zero sigma
        let same = vec![phi.clone(), phi.clone(), phi.clone()];
        let b = Curve::from_fn(g.clone(), |_| 1.0);
        assert_eq!(sigma_from_signal(&same, &b).unwrap(), 0.0);
        // scaling b scales sigma linearly
        let curves: Vec<Curve> = (0..100)
            .map(|i| phi.scaled(1.0 + (i as f64 * 0.37).sin()))
            .collect();
        let s1 = sigma_from_signal(&curves, &b).unwrap();
        let s2 = sigma_from_signal(&curves, &b.scaled(-3.0)).unwrap();
        assert!((s2 - 3.0 * s1).abs() <= 1e-12 * s1);
        // against a direct summation oracle
        let signals: Vec<f64> = curves
            .iter()
            .map(|c| inner_product(&b, c).unwrap())
            .collect();
        let mean = signals.iter().sum::<f64>() / 100.0;
        let var = signals.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / 99.0;
        assert!((s1 - (var / 5.0).sqrt()).abs() < 1e-12);
    }
}
