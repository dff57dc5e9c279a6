//! Empirical covariance kernel, empirical cross-covariance, and the
//! sequence of iterated covariance-operator applications that the PLS
//! fitters are built on.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::space::{apply_kernel, center, Curve, Dataset, Kernel};

/// Sample covariance kernel `(1/n) sum_i (X_i - mean)(s) (X_i - mean)(t)`.
///
/// The matrix is filled on the upper triangle and mirrored, so the result
/// is exactly symmetric.
pub fn empirical_covariance(data: &Dataset) -> Kernel {
    let (_, _, centered) = center(data);
    let n = data.len();
    let m = data.grid().len();
    let mut values = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let mut acc = 0.0;
            for c in centered.curves() {
                acc += c.values()[i] * c.values()[j];
            }
            let v = acc / n as f64;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Kernel::new(data.grid().clone(), values).expect("dimensions match the grid")
}

/// Sample cross-covariance curve `(1/n) sum_i (X_i - mean)(t) (Y_i - mean_y)`.
pub fn empirical_cross_covariance(data: &Dataset) -> Curve {
    let (_, _, centered) = center(data);
    let n = data.len();
    let m = data.grid().len();
    let mut values = vec![0.0; m];
    for (c, y) in centered.curves().iter().zip(centered.responses()) {
        for (v, x) in values.iter_mut().zip(c.values()) {
            *v += x * y;
        }
    }
    for v in &mut values {
        *v /= n as f64;
    }
    Curve::new(data.grid().clone(), values).expect("length matches the grid")
}

/// The curves obtained by repeatedly applying a covariance kernel to a
/// seed curve: `terms[0]` is the seed, `terms[j]` is the kernel applied
/// `j` times to it.
#[derive(Debug, Clone)]
pub struct KrylovSequence {
    terms: Vec<Curve>,
    kernel: Kernel,
}

impl KrylovSequence {
    /// Iterates `kernel` on `seed` to produce `p` terms. The kernel is
    /// assembled once by the caller and reused across all powers.
    pub fn from_seed(kernel: Kernel, seed: Curve, p: usize) -> Result<KrylovSequence> {
        if p == 0 {
            return Err(Error::InvalidInput("need at least one term".into()));
        }
        crate::space::check_same_grid(kernel.grid(), seed.grid())?;
        let mut terms = Vec::with_capacity(p);
        terms.push(seed);
        for _ in 1..p {
            let next = apply_kernel(&kernel, terms.last().unwrap())?;
            terms.push(next);
        }
        Ok(KrylovSequence { terms, kernel })
    }

    /// Number of terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// All terms; `terms()[j]` holds the (j+1)-th power.
    pub fn terms(&self) -> &[Curve] {
        &self.terms
    }

    /// One-based accessor: `power(j)` is the kernel applied `j` times to
    /// the seed.
    pub fn power(&self, j: usize) -> &Curve {
        assert!(j >= 1 && j <= self.terms.len(), "power index out of range");
        &self.terms[j - 1]
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }
}

/// Builds the empirical sequence for a dataset: the seed is the empirical
/// cross-covariance, and each further term applies the empirical
/// covariance kernel once more.
pub fn krylov_sequence(data: &Dataset, p: usize) -> Result<KrylovSequence> {
    let kernel = empirical_covariance(data);
    let seed = empirical_cross_covariance(data);
    KrylovSequence::from_seed(kernel, seed, p)
}
