//! Complex dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Kronecker product of two real vectors, first index slowest.
pub fn kron_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        out.extend(b.iter().map(|&y| x * y));
    }
    out
}

/// `D · diag(gamma) · D^H`, assembled densely.
pub fn weighted_gram(dict: &CMatrix, gamma: &[f64]) -> CMatrix {
    assert_eq!(dict.ncols(), gamma.len());
    let mut scaled = dict.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= C64::new(gamma[j], 0.0);
    }
    &scaled * dict.adjoint()
}

/// Largest deviation of any entry from the first entry of its diagonal.
/// Zero for an exactly Toeplitz matrix.
pub fn toeplitz_deviation(m: &CMatrix) -> f64 {
    let (rows, cols) = m.shape();
    let mut worst = 0.0f64;
    for i in 0..rows {
        for j in 0..cols {
            let (i0, j0) = if i >= j { (i - j, 0) } else { (0, j - i) };
            worst = worst.max((m[(i, j)] - m[(i0, j0)]).norm());
        }
    }
    worst
}

/// Deviation from block-Toeplitz structure with Toeplitz blocks of size
/// `block`: blocks must depend only on the block offset and every block must
/// itself be Toeplitz.
pub fn block_toeplitz_deviation(m: &CMatrix, block: usize) -> f64 {
    assert!(block > 0 && m.nrows().is_multiple_of(block) && m.ncols().is_multiple_of(block));
    let nb_r = m.nrows() / block;
    let nb_c = m.ncols() / block;
    let view = |a: usize, b: usize| m.view((a * block, b * block), (block, block)).into_owned();
    let mut worst = 0.0f64;
    for a in 0..nb_r {
        for b in 0..nb_c {
            let blk = view(a, b);
            worst = worst.max(toeplitz_deviation(&blk));
            let (a0, b0) = if a >= b { (a - b, 0) } else { (0, b - a) };
            if (a0, b0) != (a, b) {
                let reference = view(a0, b0);
                worst = worst.max(max_abs(&(blk - reference)));
            }
        }
    }
    worst
}

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

/// Lower Cholesky factor of a Hermitian positive definite matrix.
pub fn cholesky_lower(m: CMatrix) -> Result<CMatrix> {
    // The complex square root never fails, so a negative pivot shows up as a
    // diagonal entry that is not real and positive instead of an error.
    nalgebra::Cholesky::new(m)
        .map(|c| c.unpack())
        .filter(|l| l.diagonal().iter().all(|d| d.re > 0.0 && d.re.is_finite() && d.im.abs() <= 1e-8 * d.re))
        .ok_or_else(|| Error::Numeric("Cholesky factorization failed: matrix not positive definite".into()))
}

/// One draw from the circularly symmetric standard complex normal:
/// real and imaginary parts each have variance 1/2.
pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn squared_norm(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}
