//! Closed-form ELBO terms of the compressive sparse VAE for given prior
//! variances and encoder moments.

use std::f64::consts::PI;

use super::posterior::{effective_dictionary, marginal_cov, posterior_moments_with};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, squared_norm, CMatrix, CVector};
use crate::scenario::Measurement;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboBreakdown {
    /// `E_q[log p(y | s)]` under the posterior of `s`.
    pub reconstruction: f64,
    /// `KL(q(z | y) || N(0, I))`.
    pub encoder_kl: f64,
    /// `KL(p(s | y, z) || p(s | z))`.
    pub posterior_kl: f64,
    /// `reconstruction − posterior_kl` after cancellation.
    pub combined: f64,
}

fn log_det_from_factor(l: &CMatrix) -> f64 {
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>()
}

#[allow(clippy::too_many_arguments)]
pub fn csvae_elbo_terms(
    gamma: &[f64],
    y: &CVector,
    a: &Measurement,
    d: &CMatrix,
    sigma2: f64,
    enc_mean: &[f64],
    enc_var: &[f64],
) -> Result<ElboBreakdown> {
    if enc_mean.len() != enc_var.len() {
        return Err(Error::invalid("encoder mean and variance lengths differ"));
    }
    if enc_var.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::invalid("encoder variances must be positive"));
    }
    if gamma.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::invalid("prior variances must be positive"));
    }
    let b = effective_dictionary(a, d)?;
    let m = b.nrows() as f64;
    let s = gamma.len() as f64;

    let encoder_kl = 0.5
        * enc_mean
            .iter()
            .zip(enc_var)
            .map(|(mu, v)| mu * mu + v - 1.0 - v.ln())
            .sum::<f64>();

    let post = posterior_moments_with(gamma, y, &b, sigma2, true)?;
    let cov = post.cov.expect("full covariance requested");
    let mu = &post.mean;
    let residual = squared_norm(&(y - &b * mu));

    // tr(B C B^H)
    let bc = &b * &cov;
    let trace_bcb: f64 = bc.component_mul(&b.conjugate()).iter().map(|z| z.re).sum();
    let reconstruction = -(m * (PI * sigma2).ln() + (residual + trace_bcb) / sigma2);

    let log_det_gamma: f64 = gamma.iter().map(|g| g.ln()).sum();
    let mut cov_h = cov.clone();
    for i in 0..cov_h.nrows() {
        for j in 0..i {
            let avg = (cov_h[(i, j)] + cov_h[(j, i)].conj()) * 0.5;
            cov_h[(i, j)] = avg;
            cov_h[(j, i)] = avg.conj();
        }
    }
    let log_det_cov = log_det_from_factor(&cholesky_lower(cov_h)?);
    let trace_term: f64 = (0..gamma.len()).map(|j| cov[(j, j)].re / gamma[j]).sum();
    let mahal: f64 = mu.iter().zip(gamma).map(|(z, g)| z.norm_sqr() / g).sum();
    let posterior_kl = log_det_gamma - log_det_cov - s + trace_term + mahal;

    let log_det_cy = log_det_from_factor(&cholesky_lower(marginal_cov(gamma, &b, sigma2))?);
    let combined = -(m * (PI * sigma2).ln() + residual / sigma2) - (-m * sigma2.ln() + log_det_cy + mahal);

    Ok(ElboBreakdown {
        reconstruction,
        encoder_kl,
        posterior_kl,
        combined,
    })
}
