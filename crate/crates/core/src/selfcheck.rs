//! Invariant checks on micro instances, runnable from the CLI.

use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng as _;

use crate::dictionary::{AngleGrid, DelayDopplerGrid, Dictionary, Grid, SystemConfig};
use crate::error::Result;
use crate::linalg::{squared_norm, standard_complex_normal, CMatrix, CVector};
use crate::random::stream_rng;
use crate::sbgm::{
    csgmm_fit, csvae_elbo_terms, effective_dictionary, kronecker_m_step, kronecker_objective, marginal_cov,
    posterior_moments_with, FitOptions, SufficientStats, VarianceForm,
};
use crate::scenario::{make_observations, Measurement, ObservationSet, SnrConvention};

type Check = (&'static str, fn() -> Result<bool>);

const CHECKS: &[Check] = &[
    ("dictionary column norms", dictionary_norms),
    ("posterior mean against explicit inverse", posterior_oracle),
    ("EM log-likelihood monotone", em_monotone),
    ("Kronecker M-step objective non-decreasing", kronecker_monotone),
    ("ELBO decomposition identity", elbo_identity),
];

fn dictionary_norms() -> Result<bool> {
    let d = Dictionary::build(Grid::Angle(AngleGrid::new(16)?), SystemConfig::simo(4))?;
    Ok(d.matrix().column_iter().all(|c| (c.norm_squared() - 4.0).abs() < 1e-12))
}

fn random_gamma(s: usize, stream: u64) -> Vec<f64> {
    let mut rng = stream_rng(7, stream);
    (0..s).map(|_| rng.random_range(0.1..2.0)).collect()
}

fn posterior_oracle() -> Result<bool> {
    let d = Dictionary::build(Grid::Angle(AngleGrid::new(12)?), SystemConfig::simo(4))?;
    let gamma = random_gamma(12, 1);
    let mut rng = stream_rng(7, 2);
    let y = CVector::from_fn(4, |_, _| standard_complex_normal(&mut rng));
    let sigma2 = 0.3;
    let post = posterior_moments_with(&gamma, &y, d.matrix(), sigma2, false)?;
    let cy = marginal_cov(&gamma, d.matrix(), sigma2);
    let Some(inv) = cy.try_inverse() else { return Ok(false) };
    let g = CMatrix::from_diagonal(&DVector::from_iterator(12, gamma.iter().map(|&x| Complex64::new(x, 0.0))));
    let expected = &g * d.matrix().adjoint() * inv * &y;
    Ok((&post.mean - expected).norm() < 1e-10 * (1.0 + post.mean.norm()))
}

fn micro_observations(dict: &Dictionary, n: usize) -> Result<ObservationSet> {
    let mut rng = stream_rng(11, 0);
    let s = dict.cols();
    let channels: Vec<CVector> = (0..n)
        .map(|i| {
            let active = if i % 2 == 0 { 0..s / 3 } else { s / 2..s };
            let coeffs = CVector::from_fn(s, |j, _| {
                if active.contains(&j) {
                    standard_complex_normal(&mut rng)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            });
            dict.matrix() * coeffs
        })
        .collect();
    make_observations(
        &channels,
        &Measurement::identity(dict.rows()),
        (10.0, 20.0),
        SnrConvention::Observed,
        None,
        &mut rng,
    )
}

fn em_monotone() -> Result<bool> {
    let d = Dictionary::build(Grid::Angle(AngleGrid::new(16)?), SystemConfig::simo(6))?;
    let obs = micro_observations(&d, 60)?;
    let opts = FitOptions { max_iters: 40, seed: 3, ..FitOptions::default() };
    let (_, trace) = csgmm_fit(&obs, &d, 3, &opts)?;
    Ok(trace.is_monotone(1e-10))
}

fn kronecker_monotone() -> Result<bool> {
    let grid = DelayDopplerGrid::new(4, 4, 250.0, 6e-6)?;
    let config = SystemConfig::ofdm(5, 4, 15e3, 1.0 / 14e3);
    let d = Dictionary::build(Grid::DelayDoppler(grid), config)?;
    let obs = micro_observations(&d, 30)?;
    let opts = FitOptions {
        max_iters: 1,
        seed: 5,
        variance_form: VarianceForm::Kronecker,
        ..FitOptions::default()
    };
    let (model, _) = csgmm_fit(&obs, &d, 2, &opts)?;
    let e = crate::sbgm::csgmm_e_step(&model, &obs, &d)?;
    let stats: &SufficientStats = &e.stats;
    let before = kronecker_objective(stats, &model)?;
    let (time, freq) = match model.variances() {
        crate::sbgm::Variances::Kronecker { time, freq } => (time.clone(), freq.clone()),
        _ => return Ok(false),
    };
    let next = kronecker_m_step(stats, 4, 4, 3, model.floor(), Some((&time, &freq)))?;
    let after = kronecker_objective(stats, &next.model)?;
    Ok(after >= before - 1e-9 * before.abs())
}

fn elbo_identity() -> Result<bool> {
    let d = Dictionary::build(Grid::Angle(AngleGrid::new(10)?), SystemConfig::simo(5))?;
    let a = Measurement::selection(vec![0, 2, 4], 5)?;
    let gamma = random_gamma(10, 4);
    let mut rng = stream_rng(7, 5);
    let y = CVector::from_fn(3, |_, _| standard_complex_normal(&mut rng));
    let terms = csvae_elbo_terms(&gamma, &y, &a, d.matrix(), 0.2, &[0.1, -0.3], &[0.5, 1.2])?;
    let lhs = terms.reconstruction - terms.posterior_kl;
    let b = effective_dictionary(&a, d.matrix())?;
    let scale = 1.0 + squared_norm(&y) / 0.2 + b.nrows() as f64;
    Ok((lhs - terms.combined).abs() < 1e-8 * scale)
}

/// Runs every check, printing one line each. Returns the number of failures.
pub fn run_all(out: &mut impl Write) -> usize {
    let mut failures = 0;
    for (name, check) in CHECKS {
        let status = match check() {
            Ok(true) => "ok".to_string(),
            Ok(false) => {
                failures += 1;
                "FAILED".to_string()
            }
            Err(e) => {
                failures += 1;
                format!("ERROR ({e})")
            }
        };
        let _ = writeln!(out, "{name:<45} {status}");
    }
    failures
}
