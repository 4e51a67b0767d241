//! Complex matrix helpers shared by the channel, feature and receiver code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

pub fn complex_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize, var: f64) -> CVector {
    CVector::from_fn(len, |_, _| complex_gaussian(rng, var))
}

/// Replace `m` by (m + mᴴ)/2.
pub fn hermitize(m: &mut CMatrix) {
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)] = C64::new(m[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let avg = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
}

/// Largest |m - mᴴ| entry relative to the largest entry of `m`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return 0.0;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst / scale
}

pub fn trace_re(m: &CMatrix) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Cholesky factorisation of a Hermitian positive-definite matrix. When the
/// plain factorisation fails and `ridge_on_failure` is set, a ridge of
/// 1e-12·trace/n is added once and the attempt repeated.
pub fn hpd_cholesky(
    m: CMatrix,
    ridge_on_failure: bool,
    what: &str,
) -> crate::Result<Cholesky<C64, Dyn>> {
    let n = m.nrows();
    match Cholesky::new(m.clone()) {
        Some(c) => Ok(c),
        None if ridge_on_failure => {
            let ridge = 1e-12 * trace_re(&m).max(f64::MIN_POSITIVE) / n as f64;
            log::warn!("{what}: matrix not positive definite, adding ridge {ridge:e}");
            let mut r = m;
            for i in 0..n {
                r[(i, i)] += C64::new(ridge, 0.0);
            }
            Cholesky::new(r).ok_or_else(|| {
                crate::Error::Numerical(format!("{what}: singular even after ridge {ridge:e}"))
            })
        }
        None => Err(crate::Error::Numerical(format!(
            "{what}: matrix is not positive definite"
        ))),
    }
}

/// Block-diagonal assembly of square blocks.
pub fn block_diagonal(blocks: &[CMatrix]) -> CMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((off, off), (k, k)).copy_from(b);
        off += k;
    }
    out
}
