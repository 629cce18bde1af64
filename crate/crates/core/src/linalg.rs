//! Dense complex linear algebra helpers on top of `nalgebra`.
//!
//! Everything in the crate works with `DMatrix<Complex64>`. The helpers here
//! cover the Hermitian operations shared across modules: sorted
//! eigendecomposition, PSD square roots, Cholesky-based inverses and circular
//! complex Gaussian draws.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

#[inline]
pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn diagonal(values: &[f64]) -> CMatrix {
    let mut m = CMatrix::zeros(values.len(), values.len());
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c(v);
    }
    m
}

/// `(M + Mᴴ) / 2`.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Real part of `Tr(Aᴴ B)`, the Frobenius inner product of Hermitian matrices.
pub fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

pub fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn is_finite_vec(v: &CVector) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Largest entrywise deviation `|M(i,j) − conj(M(j,i))|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        let eig = hermitian_part(m).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        // stable sort: equal eigenvalues keep the solver's index order
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            vectors.set_column(dst, &eig.eigenvectors.column(src));
        }
        Self { values, vectors }
    }

    pub fn max(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    /// `V diag(f(λ)) Vᴴ`.
    pub fn reassemble(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        let n = self.vectors.nrows();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            let s = f(v);
            for i in 0..n {
                scaled[(i, j)] *= s;
            }
        }
        hermitian_part(&(scaled * self.vectors.adjoint()))
    }
}

pub fn max_eigenvalue(m: &CMatrix) -> f64 {
    HermitianEigen::new(m).max()
}

/// PSD square root `V diag(√max(λ,0)) Vᴴ`; valid for rank-deficient input.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    HermitianEigen::new(m).reassemble(|v| v.max(0.0).sqrt())
}

/// Cholesky factorisation of the Hermitian part of `m`.
///
/// nalgebra's complex Cholesky takes complex square roots of the pivots and so
/// never fails on indefinite input; the pivots are checked here instead.
pub fn cholesky(m: &CMatrix) -> Option<Cholesky<Complex64, Dyn>> {
    let chol = hermitian_part(m).cholesky()?;
    let l = chol.l_dirty();
    let ok = (0..l.nrows()).all(|i| {
        let d = l[(i, i)];
        d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-12 * d.re
    });
    ok.then_some(chol)
}

pub fn is_positive_definite(m: &CMatrix) -> bool {
    cholesky(m).is_some()
}

/// Inverse of a Hermitian positive definite matrix via Cholesky.
pub fn inverse_pd(m: &CMatrix, name: &'static str) -> Result<CMatrix> {
    let chol = cholesky(m).ok_or(Error::NotPositiveDefinite(name))?;
    Ok(hermitian_part(&chol.inverse()))
}

/// Solve `M Z = R` for Hermitian positive definite `M`.
pub fn solve_pd(m: &CMatrix, rhs: &CMatrix, name: &'static str) -> Result<CMatrix> {
    let chol = cholesky(m).ok_or(Error::NotPositiveDefinite(name))?;
    Ok(chol.solve(rhs))
}

/// One draw of a standard circular complex Gaussian vector: real and imaginary
/// parts are independent `N(0, 1/2)`.
pub fn standard_cn<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CVector {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// One draw of `CN(0, Σ)` given `Σ^{1/2}` (see [`psd_sqrt`]).
pub fn sample_cn<R: Rng + ?Sized>(cov_sqrt: &CMatrix, rng: &mut R) -> CVector {
    cov_sqrt * standard_cn(cov_sqrt.ncols(), rng)
}
