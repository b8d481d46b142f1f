//! Closed-form Gaussian posterior of the sparse vector given one observation.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, squared_norm, CMatrix, CVector, C64};
use crate::scenario::Measurement;

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMoments {
    pub mean: CVector,
    /// Diagonal of the posterior covariance, clamped to `[0, γ]`.
    pub cov_diag: Vec<f64>,
    pub cov: Option<CMatrix>,
    /// `log N_C(y; 0, C_y)`.
    pub log_marginal: f64,
}

/// `B = A · D`.
pub fn effective_dictionary(a: &Measurement, d: &CMatrix) -> Result<CMatrix> {
    if a.cols() != d.nrows() {
        return Err(Error::invalid(format!(
            "measurement has {} columns but the dictionary has {} rows",
            a.cols(),
            d.nrows()
        )));
    }
    Ok(a.select_rows(d))
}

fn check_gamma(gamma: &[f64], b: &CMatrix, sigma2: f64) -> Result<()> {
    if gamma.len() != b.ncols() {
        return Err(Error::invalid(format!(
            "variance vector has length {} but the dictionary has {} columns",
            gamma.len(),
            b.ncols()
        )));
    }
    if gamma.iter().any(|&g| !(g >= 0.0 && g.is_finite())) {
        return Err(Error::invalid("variances must be finite and nonnegative"));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid("noise variance must be positive"));
    }
    Ok(())
}

/// `C_y = B diag(γ) B^H + σ² I` for `B = A D`.
pub fn marginal_cov(gamma: &[f64], b: &CMatrix, sigma2: f64) -> CMatrix {
    let mut c = crate::linalg::weighted_gram(b, gamma);
    for i in 0..c.nrows() {
        c[(i, i)] += C64::new(sigma2, 0.0);
    }
    c
}

/// Lower Cholesky factor of `C_y = A D diag(γ) D^H A^H + σ² I`.
pub fn marginal_cov_factor(gamma: &[f64], a: &Measurement, d: &CMatrix, sigma2: f64) -> Result<CMatrix> {
    let b = effective_dictionary(a, d)?;
    check_gamma(gamma, &b, sigma2)?;
    cholesky_lower(marginal_cov(gamma, &b, sigma2))
}

/// Posterior mean and covariance of `s` given `y = A D s + n`.
pub fn posterior_moments(
    gamma: &[f64],
    y: &CVector,
    a: &Measurement,
    d: &CMatrix,
    sigma2: f64,
    want_full_cov: bool,
) -> Result<PosteriorMoments> {
    let b = effective_dictionary(a, d)?;
    posterior_moments_with(gamma, y, &b, sigma2, want_full_cov)
}

/// [`posterior_moments`] with a precomputed `B = A D`.
pub fn posterior_moments_with(
    gamma: &[f64],
    y: &CVector,
    b: &CMatrix,
    sigma2: f64,
    want_full_cov: bool,
) -> Result<PosteriorMoments> {
    check_gamma(gamma, b, sigma2)?;
    let m = b.nrows();
    if y.len() != m {
        return Err(Error::invalid(format!("observation has length {} but expected {m}", y.len())));
    }
    let l = cholesky_lower(marginal_cov(gamma, b, sigma2))?;
    let v = l
        .solve_lower_triangular(b)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let w = l
        .solve_lower_triangular(y)
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;

    // μ = Γ V^H w, cdiag_j = γ_j − γ_j² ‖v_j‖²
    let vhw = v.ad_mul(&w);
    let mean = CVector::from_fn(gamma.len(), |j, _| vhw[j] * gamma[j]);
    let cov_diag = gamma
        .iter()
        .enumerate()
        .map(|(j, &g)| {
            let vv: f64 = v.column(j).iter().map(|z| z.norm_sqr()).sum();
            (g - g * g * vv).clamp(0.0, g)
        })
        .collect();
    let cov = want_full_cov.then(|| {
        let vhv = v.ad_mul(&v);
        CMatrix::from_fn(gamma.len(), gamma.len(), |i, j| {
            let prior = if i == j { C64::new(gamma[i], 0.0) } else { C64::new(0.0, 0.0) };
            prior - vhv[(i, j)] * (gamma[i] * gamma[j])
        })
    });
    let log_det: f64 = 2.0 * (0..m).map(|i| l[(i, i)].re.ln()).sum::<f64>();
    let log_marginal = -(m as f64) * PI.ln() - log_det - squared_norm(&w);
    Ok(PosteriorMoments {
        mean,
        cov_diag,
        cov,
        log_marginal,
    })
}
