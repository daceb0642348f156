//! Small dense complex helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const LN2: f64 = std::f64::consts::LN_2;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn fro_norm_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// `a^H b` for column vectors.
pub fn inner(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn chol(m: &CMat) -> Result<Cholesky<Complex64, Dyn>> {
    let not_pd = || Error::Domain("matrix is not positive definite".into());
    let ch = Cholesky::new(hermitian_part(m)).ok_or_else(not_pd)?;
    // complex square roots never fail, so check the factor's diagonal
    let l = ch.l_dirty();
    if (0..m.nrows()).all(|i| l[(i, i)].re > 0.0 && l[(i, i)].im.abs() <= 1e-12 * l[(i, i)].re) {
        Ok(ch)
    } else {
        Err(not_pd())
    }
}

/// `log2 det(M)` for Hermitian positive definite `M`.
pub fn log2_det_pd(m: &CMat) -> Result<f64> {
    let l = chol(m)?;
    let l = l.l_dirty();
    let ln: f64 = (0..m.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() * 2.0;
    Ok(ln / LN2)
}

/// `M^{-1} B` for Hermitian positive definite `M`.
pub fn solve_pd(m: &CMat, b: &CMat) -> Result<CMat> {
    Ok(chol(m)?.solve(b))
}

pub fn inverse_pd(m: &CMat) -> Result<CMat> {
    Ok(chol(m)?.inverse())
}

/// Lower Cholesky factor `L` with `M = L L^H`.
pub fn cholesky_factor(m: &CMat) -> Result<CMat> {
    Ok(chol(m)?.unpack())
}
