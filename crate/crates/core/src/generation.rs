//! Sampling sparse parameter vectors from a fitted model and mapping them to
//! channels under any dictionary over the training grid.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dictionary::{Dictionary, Grid};
use crate::error::{Error, Result};
use crate::linalg::{standard_complex_normal, weighted_gram, CMatrix, CVector, C64};
use crate::random::{stream_rng, streams};
use crate::sbgm::SbgmModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the model's weights and variances.
    pub model_id: String,
    /// SHA-256 of the dictionary used for rendering, if any.
    pub dictionary_id: Option<String>,
    pub seed: u64,
    pub p_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedBatch {
    pub params: Vec<CVector>,
    pub labels: Vec<usize>,
    pub channels: Option<Vec<CVector>>,
    pub provenance: Provenance,
}

impl GeneratedBatch {
    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }
}

fn hash_floats(hasher: &mut Sha256, values: &[f64]) {
    for v in values {
        hasher.update(v.to_le_bytes());
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn model_id(model: &SbgmModel) -> String {
    let mut h = Sha256::new();
    h.update((model.components() as u64).to_le_bytes());
    hash_floats(&mut h, model.weights());
    match model.variances() {
        crate::sbgm::Variances::Full(g) => {
            h.update(b"full");
            g.iter().for_each(|v| hash_floats(&mut h, v));
        }
        crate::sbgm::Variances::Kronecker { time, freq } => {
            h.update(b"kronecker");
            time.iter().chain(freq).for_each(|v| hash_floats(&mut h, v));
        }
    }
    hex(&h.finalize())
}

pub fn dictionary_id(dict: &Dictionary) -> String {
    let mut h = Sha256::new();
    h.update((dict.rows() as u64).to_le_bytes());
    h.update((dict.cols() as u64).to_le_bytes());
    for z in dict.matrix().iter() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    hex(&h.finalize())
}

/// Draws `k_i ~ ρ`, then `s_i ~ N_C(0, diag(γ_{k_i}))`. Sample `i` uses its own
/// random stream, so the batch does not depend on the thread count.
pub fn sample_parameters(model: &SbgmModel, n: usize, seed: u64) -> GeneratedBatch {
    let gammas = model.gammas();
    let stds: Vec<Vec<f64>> = gammas.iter().map(|g| g.iter().map(|v| v.sqrt()).collect()).collect();
    let weights = model.weights();
    let draws: Vec<(usize, CVector)> = (0..n)
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            let mut rng = stream_rng(seed, streams::GENERATE + i as u64);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut k = weights.len() - 1;
            for (c, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc && *w > 0.0 {
                    k = c;
                    break;
                }
            }
            while weights[k] == 0.0 && k > 0 {
                k -= 1;
            }
            let s = CVector::from_iterator(stds[k].len(), stds[k].iter().map(|&sd| standard_complex_normal(&mut rng) * sd));
            (k, s)
        })
        .collect();
    let (labels, params) = draws.into_iter().unzip();
    GeneratedBatch {
        params,
        labels,
        channels: None,
        provenance: Provenance {
            model_id: model_id(model),
            dictionary_id: None,
            seed,
            p_max: None,
        },
    }
}

/// `h_i = D s_i`.
pub fn render_channels(mut batch: GeneratedBatch, dict: &Dictionary) -> Result<GeneratedBatch> {
    let s = dict.cols();
    if batch.params.iter().any(|p| p.len() != s) {
        return Err(Error::DomainMismatch(format!(
            "dictionary has {s} columns but the batch parameters have a different length"
        )));
    }
    let d = dict.matrix();
    let channels = batch.params.par_iter().map(|p| d * p).collect();
    batch.channels = Some(channels);
    batch.provenance.dictionary_id = Some(dictionary_id(dict));
    Ok(batch)
}

/// Keeps the `p_max` entries of largest magnitude; ties go to the lower index.
pub fn limit_paths(s: &CVector, p_max: usize) -> Result<CVector> {
    if p_max == 0 {
        return Err(Error::invalid("p_max must be ≥ 1"));
    }
    let mut order: Vec<usize> = (0..s.len()).filter(|&j| s[j].norm_sqr() > 0.0).collect();
    if order.len() <= p_max {
        return Ok(s.clone());
    }
    order.sort_by(|&a, &b| s[b].norm_sqr().total_cmp(&s[a].norm_sqr()).then(a.cmp(&b)));
    let mut out = CVector::zeros(s.len());
    for &j in &order[..p_max] {
        out[j] = s[j];
    }
    Ok(out)
}

pub fn limit_batch(mut batch: GeneratedBatch, p_max: usize) -> Result<GeneratedBatch> {
    batch.params = batch.params.iter().map(|s| limit_paths(s, p_max)).collect::<Result<_>>()?;
    batch.channels = None;
    batch.provenance.dictionary_id = None;
    batch.provenance.p_max = Some(p_max);
    Ok(batch)
}

/// `E[h h^H | k] = D diag(γ_k) D^H`.
pub fn conditional_cov(model: &SbgmModel, k: usize, dict: &Dictionary) -> Result<CMatrix> {
    if k >= model.components() {
        return Err(Error::invalid(format!("component {k} out of range")));
    }
    if model.sparse_dim() != dict.cols() {
        return Err(Error::DomainMismatch("model and dictionary grid sizes differ".into()));
    }
    Ok(weighted_gram(dict.matrix(), &model.gamma(k)))
}

/// Per-factor covariances `(D_t diag(γ^(t)) D_t^H, D_f diag(γ^(f)) D_f^H)` of a
/// Kronecker-form model over an OFDM dictionary.
pub fn kronecker_conditional_covs(model: &SbgmModel, k: usize, dict: &Dictionary) -> Result<(CMatrix, CMatrix)> {
    let (crate::sbgm::Variances::Kronecker { time, freq }, Some(f), Grid::DelayDoppler(_)) =
        (model.variances(), dict.factors(), dict.grid())
    else {
        return Err(Error::DomainMismatch("needs a Kronecker model and an OFDM dictionary".into()));
    };
    if k >= model.components() {
        return Err(Error::invalid(format!("component {k} out of range")));
    }
    if time[k].len() != f.time.ncols() || freq[k].len() != f.freq.ncols() {
        return Err(Error::DomainMismatch("factor sizes differ from the dictionary grid".into()));
    }
    Ok((weighted_gram(&f.time, &time[k]), weighted_gram(&f.freq, &freq[k])))
}

/// Sample mean and covariance of a set of vectors.
pub fn sample_moments(vectors: &[CVector]) -> (CVector, CMatrix) {
    let n = vectors.len().max(1) as f64;
    let dim = vectors.first().map_or(0, |v| v.len());
    let mut mean = CVector::zeros(dim);
    let mut cov = CMatrix::zeros(dim, dim);
    for v in vectors {
        mean += v;
        cov += v * v.adjoint();
    }
    (mean / C64::new(n, 0.0), cov / C64::new(n, 0.0))
}
