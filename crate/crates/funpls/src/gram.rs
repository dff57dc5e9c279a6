//! Modified Gram–Schmidt orthonormalization over a pluggable scalar
//! product.
//!
//! The same loop serves two different vector families in this crate:
//! length-n score vectors under the Euclidean dot product, and curves
//! under the covariance-weighted bilinear form. Both are expressed
//! through the [`ScalarProduct`] trait.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::metrics::tol;
use crate::space::{k_bilinear, Curve, Kernel};

/// A symmetric positive semidefinite bilinear form over some vector family,
/// together with the linear operations Gram–Schmidt needs.
pub trait ScalarProduct {
    type Vector: Clone;

    fn dot(&self, a: &Self::Vector, b: &Self::Vector) -> f64;

    /// y += c * x
    fn axpy(&self, y: &mut Self::Vector, c: f64, x: &Self::Vector);

    fn scale(&self, y: &mut Self::Vector, c: f64);

    fn norm(&self, a: &Self::Vector) -> f64 {
        self.dot(a, a).max(0.0).sqrt()
    }
}

/// Euclidean dot product on dense vectors.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanProduct;

impl ScalarProduct for EuclideanProduct {
    type Vector = DVector<f64>;

    fn dot(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.dot(b)
    }

    fn axpy(&self, y: &mut DVector<f64>, c: f64, x: &DVector<f64>) {
        y.axpy(c, x, 1.0);
    }

    fn scale(&self, y: &mut DVector<f64>, c: f64) {
        *y *= c;
    }
}

/// Quadrature L2 inner product on curves.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureProduct;

impl ScalarProduct for QuadratureProduct {
    type Vector = Curve;

    fn dot(&self, a: &Curve, b: &Curve) -> f64 {
        crate::space::inner_product(a, b).expect("curves share a grid")
    }

    fn axpy(&self, y: &mut Curve, c: f64, x: &Curve) {
        y.axpy_in_place(c, x);
    }

    fn scale(&self, y: &mut Curve, c: f64) {
        y.scale_in_place(c);
    }
}

/// The kernel-weighted bilinear form on curves (double integral against a
/// fixed covariance kernel). Positive semidefinite for covariance kernels;
/// degeneracy surfaces as a rank error in the orthogonalization, never as
/// a NaN.
#[derive(Debug, Clone, Copy)]
pub struct KernelProduct<'a> {
    pub kernel: &'a Kernel,
}

impl ScalarProduct for KernelProduct<'_> {
    type Vector = Curve;

    fn dot(&self, a: &Curve, b: &Curve) -> f64 {
        k_bilinear(a, b, self.kernel).expect("curves share the kernel grid")
    }

    fn axpy(&self, y: &mut Curve, c: f64, x: &Curve) {
        y.axpy_in_place(c, x);
    }

    fn scale(&self, y: &mut Curve, c: f64) {
        y.scale_in_place(c);
    }
}

/// Orthonormalizes `vectors` in order with the modified Gram–Schmidt loop.
///
/// Returns the orthonormal family and the upper triangular coefficient
/// matrix `R` with `v_j = sum_{i<=j} R[(i,j)] u_i`.
///
/// Column `j` whose residual norm falls below `tol::RANK_PIVOT_REL`
/// relative to its own norm is reported as a rank error naming `j`
/// (zero-based).
pub fn modified_gram_schmidt<S: ScalarProduct>(
    vectors: &[S::Vector],
    sp: &S,
) -> Result<(Vec<S::Vector>, DMatrix<f64>)> {
    let p = vectors.len();
    if p == 0 {
        return Err(Error::InvalidInput("no vectors to orthonormalize".into()));
    }
    let mut basis: Vec<S::Vector> = Vec::with_capacity(p);
    let mut r = DMatrix::zeros(p, p);
    for j in 0..p {
        let mut u = vectors[j].clone();
        let original_norm = sp.norm(&u);
        for (i, q) in basis.iter().enumerate() {
            let rij = sp.dot(&u, q);
            r[(i, j)] = rij;
            sp.axpy(&mut u, -rij, q);
        }
        let residual = sp.norm(&u);
        if residual <= tol::RANK_PIVOT_REL * original_norm || residual == 0.0 {
            return Err(Error::RankDeficient {
                column: j,
                residual,
            });
        }
        r[(j, j)] = residual;
        sp.scale(&mut u, 1.0 / residual);
        basis.push(u);
    }
    Ok((basis, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::gram_defect;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn dv(vals: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(vals)
    }

    /// Classical Gram–Schmidt, used only as a comparison oracle.
    fn classical_gram_schmidt(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut basis: Vec<DVector<f64>> = Vec::new();
        for v in vectors {
            let mut u = v.clone();
            for q in &basis {
                u -= q * v.dot(q);
            }
            let n = u.norm();
            basis.push(u / n);
        }
        basis
    }

    #[test]
    fn orthonormal_input_passes_through() {
        let vs = vec![dv(&[1.0, 0.0, 0.0]), dv(&[0.0, 1.0, 0.0]), dv(&[0.0, 0.0, 1.0])];
        let (q, r) = modified_gram_schmidt(&vs, &EuclideanProduct).unwrap();
        for (u, v) in q.iter().zip(&vs) {
            assert!((u - v).norm() < 1e-15);
        }
        assert!((r - DMatrix::identity(3, 3)).norm() < 1e-15);
    }

    #[test]
    fn exact_projection_of_orthogonal_parts() {
        // v and v + w with <v, w> = 0
        let v = dv(&[2.0, 0.0, 0.0]);
        let w = dv(&[0.0, 0.0, 3.0]);
        let vs = vec![v.clone(), &v + &w];
        let (q, _) = modified_gram_schmidt(&vs, &EuclideanProduct).unwrap();
        assert!((&q[0] - dv(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        assert!((&q[1] - dv(&[0.0, 0.0, 1.0])).norm() < 1e-15);
    }

    #[test]
    fn random_family_orthonormal_and_matches_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 12;
        let vs: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let (q, r) = modified_gram_schmidt(&vs, &EuclideanProduct).unwrap();
        assert!(gram_defect(&q, &EuclideanProduct) < 1e-12);
        let classical = classical_gram_schmidt(&vs);
        for (a, b) in q.iter().zip(&classical) {
            assert!((a - b).norm() < 1e-8);
        }
        // reconstruction: v_j = sum_i R[(i,j)] u_i
        for j in 0..vs.len() {
            let mut rebuilt = DVector::zeros(n);
            for i in 0..=j {
                rebuilt += &q[i] * r[(i, j)];
            }
            assert!((rebuilt - &vs[j]).norm() <= 1e-8 * vs[j].norm());
        }
    }

    #[test]
    fn span_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let n = 10;
        let vs: Vec<DVector<f64>> = (0..4)
            .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
            .collect();
        let (q, _) = modified_gram_schmidt(&vs, &EuclideanProduct).unwrap();
        // projecting v_j onto span{u_1..u_j} reproduces it
        for j in 0..vs.len() {
            let mut proj = DVector::zeros(n);
            for u in q.iter().take(j + 1) {
                proj += u * vs[j].dot(u);
            }
            assert!((proj - &vs[j]).norm() <= 1e-8 * vs[j].norm());
        }
    }

    #[test]
    fn dependent_column_is_a_rank_error() {
        let v = dv(&[1.0, 2.0, 3.0]);
        let vs = vec![v.clone(), v.scale(-0.5)];
        match modified_gram_schmidt(&vs, &EuclideanProduct) {
            Err(Error::RankDeficient { column, .. }) => assert_eq!(column, 1),
            other => panic!("expected rank error, got {other:?}"),
        }
        let zero = vec![DVector::zeros(3)];
        assert!(matches!(
            modified_gram_schmidt(&zero, &EuclideanProduct),
            Err(Error::RankDeficient { column: 0, .. })
        ));
    }

    #[test]
    fn modified_beats_classical_on_ill_conditioned_family() {
        // Lauchli-style family: near-identical columns, Gram condition ~1e10.
        let n = 8;
        let p = 5;
        let eps = 1e-5;
        let vs: Vec<DVector<f64>> = (0..p)
            .map(|j| {
                DVector::from_fn(n, |i, _| {
                    if i == 0 {
                        1.0
                    } else if i == j + 1 {
                        eps
                    } else {
                        0.0
                    }
                })
            })
            .collect();
        let gram = DMatrix::from_fn(p, p, |i, j| vs[i].dot(&vs[j]));
        let cond = crate::metrics::cond_estimate(&gram);
        assert!(cond > 1e9, "test family not ill-conditioned enough: {cond:e}");

        let (q_mod, _) = modified_gram_schmidt(&vs, &EuclideanProduct).unwrap();
        let q_cls = classical_gram_schmidt(&vs);
        let defect_mod = gram_defect(&q_mod, &EuclideanProduct);
        let defect_cls = gram_defect(&q_cls, &EuclideanProduct);
        assert!(
            defect_cls >= 10.0 * defect_mod,
            "classical defect {defect_cls:e} not 10x worse than modified {defect_mod:e}"
        );
    }
}
