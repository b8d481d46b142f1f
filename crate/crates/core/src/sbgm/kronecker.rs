//! M-step under the constraint `γ_k = γ_k^(t) ⊗ γ_k^(f)`, solved by
//! alternating closed-form updates of the two factors.
//!
//! Statistics are indexed `q·S_f + p` (Doppler index `q` slowest).

use std::f64::consts::PI;

use super::em::{normalized_weights, MStep, SufficientStats};
use super::model::{SbgmModel, Variances};
use crate::error::{Error, Result};

/// Coordinate sweeps per M-step.
pub const KRONECKER_SWEEPS: usize = 3;

/// `γ^(t)_q = Σ_p T[q,p] / γ^(f)_p / (S_f R)`, clipped at `floor`.
pub fn update_time_factor(t: &[f64], r: f64, freq: &[f64], floor: f64) -> Vec<f64> {
    let sf = freq.len();
    t.chunks_exact(sf)
        .map(|row| {
            let acc: f64 = row.iter().zip(freq).map(|(v, g)| v / g).sum();
            (acc / (sf as f64 * r)).max(floor)
        })
        .collect()
}

/// `γ^(f)_p = Σ_q T[q,p] / γ^(t)_q / (S_t R)`, clipped at `floor`.
pub fn update_freq_factor(t: &[f64], r: f64, time: &[f64], floor: f64) -> Vec<f64> {
    let st = time.len();
    let sf = t.len() / st;
    let mut acc = vec![0.0; sf];
    for (row, g) in t.chunks_exact(sf).zip(time) {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v / g;
        }
    }
    acc.into_iter().map(|a| (a / (st as f64 * r)).max(floor)).collect()
}

/// Expected complete-data log-likelihood of one component,
/// `R(log ρ − S log π) − Σ_{q,p} [R log(γ^(t)_q γ^(f)_p) + T[q,p] / (γ^(t)_q γ^(f)_p)]`.
pub fn component_objective(t: &[f64], r: f64, weight: f64, time: &[f64], freq: &[f64]) -> f64 {
    let s = t.len() as f64;
    let sf = freq.len();
    let mut value = if r > 0.0 { r * (weight.ln() - s * PI.ln()) } else { 0.0 };
    for (q, row) in t.chunks_exact(sf).enumerate() {
        for (p, v) in row.iter().enumerate() {
            let g = time[q] * freq[p];
            value -= r * g.ln() + v / g;
        }
    }
    value
}

/// Objective summed over the components of a Kronecker-form model.
pub fn kronecker_objective(stats: &SufficientStats, model: &SbgmModel) -> Result<f64> {
    let Variances::Kronecker { time, freq } = model.variances() else {
        return Err(Error::invalid("model is not in Kronecker form"));
    };
    if stats.resp_sums.len() != model.components() {
        return Err(Error::invalid("statistics and model have different component counts"));
    }
    Ok((0..model.components())
        .map(|k| component_objective(&stats.weighted[k], stats.resp_sums[k], model.weights()[k], &time[k], &freq[k]))
        .sum())
}

/// Per-component Doppler and delay factors.
pub type FactorPair<'a> = (&'a Vec<Vec<f64>>, &'a Vec<Vec<f64>>);

/// Kronecker-constrained M-step: `sweeps` alternations of the Doppler and
/// delay factor updates per component, starting from `init` (all ones when
/// absent). Weights follow the unconstrained update.
pub fn kronecker_m_step(
    stats: &SufficientStats,
    s_t: usize,
    s_f: usize,
    sweeps: usize,
    floor: f64,
    init: Option<FactorPair>,
) -> Result<MStep> {
    let k = stats.resp_sums.len();
    if s_t == 0 || s_f == 0 || stats.weighted.iter().any(|t| t.len() != s_t * s_f) {
        return Err(Error::invalid("statistics length must equal S_t·S_f"));
    }
    if let Some((t0, f0)) = init {
        if t0.len() != k || f0.len() != k || t0.iter().any(|t| t.len() != s_t) || f0.iter().any(|f| f.len() != s_f) {
            return Err(Error::invalid("initial factors have the wrong shape"));
        }
    }
    let mut dead = Vec::new();
    let mut time = Vec::with_capacity(k);
    let mut freq = Vec::with_capacity(k);
    for c in 0..k {
        let r = stats.resp_sums[c];
        let (mut gt, mut gf) = match init {
            Some((t0, f0)) => (t0[c].clone(), f0[c].clone()),
            None => (vec![1.0; s_t], vec![1.0; s_f]),
        };
        if r < 1e-300 {
            dead.push(c);
            time.push(vec![floor; s_t]);
            freq.push(vec![floor; s_f]);
            continue;
        }
        let t = &stats.weighted[c];
        for _ in 0..sweeps {
            gt = update_time_factor(t, r, &gf, floor);
            gf = update_freq_factor(t, r, &gt, floor);
        }
        time.push(gt);
        freq.push(gf);
    }
    let weights = normalized_weights(&stats.resp_sums, stats.n_samples as f64, &dead);
    Ok(MStep {
        model: SbgmModel::kronecker(weights, time, freq, floor)?,
        dead,
    })
}
