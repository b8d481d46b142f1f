//! Expectation-maximization for the compressive sparse Bayesian GMM.
//!
//! The E-step factors the noise-free part `G_k = B diag(γ_k) B^H = U Λ U^H`
//! once per component and iteration. Each sample then only needs `U^H y` and
//! the diagonal `(Λ + σ_i² I)^{-1}`, which keeps per-sample noise variances
//! cheap.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng as _;
use rayon::prelude::*;

use super::kronecker::{kronecker_m_step, KRONECKER_SWEEPS};
use super::model::{SbgmModel, VarianceForm, Variances, DEFAULT_FLOOR};
use super::posterior::effective_dictionary;
use crate::dictionary::{Dictionary, Grid};
use crate::error::{Error, Result};
use crate::linalg::{weighted_gram, CMatrix, CVector};
use crate::random::{stream_rng, streams};
use crate::scenario::ObservationSet;

/// Samples per parallel work item; partial sums are reduced in chunk order.
const CHUNK: usize = 32;

/// Components whose total responsibility falls below this are reinitialized.
const DEAD: f64 = 1e-300;

/// Responsibility-weighted second moments feeding the M-step.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub n_samples: usize,
    /// `R_k = Σ_i r_ik`.
    pub resp_sums: Vec<f64>,
    /// `T_k[j] = Σ_i r_ik (|μ_ik[j]|² + C_ik[j,j])`.
    pub weighted: Vec<Vec<f64>>,
}

impl SufficientStats {
    /// Aggregates per-sample moments `moments[i][k][j] = |μ|² + cdiag`.
    pub fn from_per_sample(responsibilities: &DMatrix<f64>, moments: &[Vec<Vec<f64>>]) -> Result<Self> {
        let (n, k) = responsibilities.shape();
        if moments.len() != n || moments.iter().any(|m| m.len() != k) {
            return Err(Error::invalid("moment array does not match the responsibilities"));
        }
        let s = moments.first().and_then(|m| m.first()).map_or(0, Vec::len);
        let mut resp_sums = vec![0.0; k];
        let mut weighted = vec![vec![0.0; s]; k];
        for (i, row) in moments.iter().enumerate() {
            for (c, m) in row.iter().enumerate() {
                let r = responsibilities[(i, c)];
                resp_sums[c] += r;
                for (acc, v) in weighted[c].iter_mut().zip(m) {
                    *acc += r * v;
                }
            }
        }
        Ok(Self {
            n_samples: n,
            resp_sums,
            weighted,
        })
    }
}

#[derive(Debug, Clone)]
pub struct EStep {
    /// `N_t × K`, rows sum to one.
    pub responsibilities: DMatrix<f64>,
    /// `Σ_i log Σ_k ρ_k N_C(y_i; 0, C_{y_i|k})`.
    pub log_likelihood: f64,
    pub stats: SufficientStats,
}

struct ComponentCache {
    log_weight: f64,
    gamma: Vec<f64>,
    eigvals: Vec<f64>,
    basis: CMatrix,
    /// `U^H B`.
    projected: CMatrix,
}

impl ComponentCache {
    fn new(b: &CMatrix, gamma: Vec<f64>, weight: f64) -> Self {
        let eig = weighted_gram(b, &gamma).symmetric_eigen();
        let eigvals = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let basis = eig.eigenvectors;
        let projected = basis.ad_mul(b);
        Self {
            log_weight: weight.ln(),
            gamma,
            eigvals,
            basis,
            projected,
        }
    }

    /// Writes `v = (Λ + σ²)^{-1} U^H y` and `inv = diag((Λ + σ²)^{-1})`,
    /// returns `log ρ_k N_C(y; 0, C_y)`.
    fn evaluate(&self, y: &CVector, sigma2: f64, v: &mut CVector, inv: &mut [f64]) -> f64 {
        self.basis.ad_mul_to(y, v);
        let mut log_det = 0.0;
        let mut det = 1.0;
        let mut quad = 0.0;
        for ((z, w), &l) in v.iter_mut().zip(inv.iter_mut()).zip(&self.eigvals) {
            let c = l + sigma2;
            det *= c;
            if !(1e-100..=1e100).contains(&det) {
                log_det += det.ln();
                det = 1.0;
            }
            quad += z.norm_sqr() / c;
            *w = 1.0 / c;
            *z *= *w;
        }
        log_det += det.ln();
        let m = y.len() as f64;
        self.log_weight - m * PI.ln() - log_det - quad
    }
}

fn build_caches(model: &SbgmModel, b: &CMatrix) -> Vec<ComponentCache> {
    let gammas = model.gammas();
    gammas
        .into_par_iter()
        .zip(model.weights().par_iter())
        .map(|(g, &w)| ComponentCache::new(b, g, w))
        .collect()
}

fn check_inputs(model: &SbgmModel, obs: &ObservationSet, b: &CMatrix) -> Result<()> {
    obs.validate()?;
    if obs.is_empty() {
        return Err(Error::invalid("observation set is empty"));
    }
    if model.sparse_dim() != b.ncols() {
        return Err(Error::DomainMismatch(format!(
            "model has {} variances per component but the dictionary has {} columns",
            model.sparse_dim(),
            b.ncols()
        )));
    }
    if obs.dim() != b.nrows() {
        return Err(Error::invalid("observation dimension does not match the dictionary"));
    }
    Ok(())
}

/// Per-chunk sums. `outer[k]` holds the lower triangle of
/// `Σ_i r_ik v_ik v_ik^H`.
struct Partial {
    log_likelihood: f64,
    resp: Vec<f64>,
    resp_sums: Vec<f64>,
    inv_sums: Vec<Vec<f64>>,
    outer: Vec<CMatrix>,
}

impl Partial {
    fn zeros(k: usize, m: usize, rows: usize) -> Self {
        Self {
            log_likelihood: 0.0,
            resp: Vec::with_capacity(rows * k),
            resp_sums: vec![0.0; k],
            inv_sums: vec![vec![0.0; m]; k],
            outer: vec![CMatrix::zeros(m, m); k],
        }
    }

    fn add(&mut self, other: &Partial) {
        self.log_likelihood += other.log_likelihood;
        add_into(&mut self.resp_sums, &other.resp_sums);
        for (a, b) in self.inv_sums.iter_mut().zip(&other.inv_sums) {
            add_into(a, b);
        }
        for (a, b) in self.outer.iter_mut().zip(&other.outer) {
            *a += b;
        }
    }
}

fn add_into(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// One pass over the samples. With `want_stats` false only the normalizers
/// and responsibilities are produced.
fn sweep(caches: &[ComponentCache], obs: &ObservationSet, want_stats: bool) -> Partial {
    let k = caches.len();
    let m = obs.dim();
    let n = obs.len();
    let partials: Vec<Partial> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let range = chunk * CHUNK..((chunk + 1) * CHUNK).min(n);
            let mut p = Partial::zeros(k, m, range.len());
            let mut vs = vec![CVector::zeros(m); k];
            let mut invs = vec![vec![0.0; m]; k];
            let mut ll = vec![0.0; k];
            for i in range {
                let (y, s2) = (&obs.samples[i], obs.noise_vars[i]);
                for c in 0..k {
                    ll[c] = caches[c].evaluate(y, s2, &mut vs[c], &mut invs[c]);
                }
                let max = ll.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + ll.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
                p.log_likelihood += lse;
                for c in 0..k {
                    let r = (ll[c] - lse).exp();
                    p.resp.push(r);
                    p.resp_sums[c] += r;
                    if !want_stats || r == 0.0 {
                        continue;
                    }
                    for (acc, w) in p.inv_sums[c].iter_mut().zip(&invs[c]) {
                        *acc += r * w;
                    }
                    let v = &vs[c];
                    let q = &mut p.outer[c];
                    for col in 0..m {
                        let vc = v[col].conj() * r;
                        for row in col..m {
                            q[(row, col)] += v[row] * vc;
                        }
                    }
                }
            }
            p
        })
        .collect();
    let mut total = Partial::zeros(k, m, n);
    for p in partials {
        total.resp.extend_from_slice(&p.resp);
        total.add(&p);
    }
    total
}

/// `Σ_i r_ik (|μ_ikj|² + cdiag_ikj)`
///   `= γ_j² w_j^H Q_k w_j + R_k γ_j − γ_j² Σ_m |W_mj|² Σ_i r_ik / (λ_m + σ_i²)`.
fn weighted_moments(cache: &ComponentCache, r_k: f64, inv_sum: &[f64], outer: &CMatrix) -> Vec<f64> {
    let q = {
        let mut q = outer.clone();
        q.fill_upper_triangle_with_lower_triangle();
        for i in 0..q.nrows() {
            for j in i + 1..q.ncols() {
                q[(i, j)] = q[(i, j)].conj();
            }
        }
        q
    };
    let qw = &q * &cache.projected;
    cache
        .projected
        .column_iter()
        .zip(qw.column_iter())
        .zip(&cache.gamma)
        .map(|((w, qw), &g)| {
            let mean_power = w.dotc(&qw).re.max(0.0);
            let shrink: f64 = w.iter().zip(inv_sum).map(|(x, a)| x.norm_sqr() * a).sum();
            g * g * mean_power + (r_k * g - g * g * shrink).clamp(0.0, r_k * g)
        })
        .collect()
}

/// E-step with a precomputed `B = A D`.
pub fn e_step_with(model: &SbgmModel, obs: &ObservationSet, b: &CMatrix) -> Result<EStep> {
    check_inputs(model, obs, b)?;
    let caches = build_caches(model, b);
    let total = sweep(&caches, obs, true);
    if !total.log_likelihood.is_finite() {
        return Err(Error::Numeric("log-likelihood is not finite".into()));
    }
    let weighted = caches
        .iter()
        .enumerate()
        .map(|(c, cache)| weighted_moments(cache, total.resp_sums[c], &total.inv_sums[c], &total.outer[c]))
        .collect();
    let k = caches.len();
    Ok(EStep {
        responsibilities: DMatrix::from_row_slice(obs.len(), k, &total.resp),
        log_likelihood: total.log_likelihood,
        stats: SufficientStats {
            n_samples: obs.len(),
            resp_sums: total.resp_sums,
            weighted,
        },
    })
}

pub fn csgmm_e_step(model: &SbgmModel, obs: &ObservationSet, dict: &Dictionary) -> Result<EStep> {
    let b = effective_dictionary(&obs.measurement, dict.matrix())?;
    e_step_with(model, obs, &b)
}

/// `Σ_i log Σ_k ρ_k N_C(y_i; 0, C_{y_i|k})`, computed exactly as the E-step
/// normalizer.
pub fn total_log_likelihood(model: &SbgmModel, obs: &ObservationSet, dict: &Dictionary) -> Result<f64> {
    let b = effective_dictionary(&obs.measurement, dict.matrix())?;
    check_inputs(model, obs, &b)?;
    let caches = build_caches(model, &b);
    Ok(sweep(&caches, obs, false).log_likelihood)
}

/// M-step output. Components listed in `dead` had no responsibility; they are
/// returned with weight 0 and variances at the floor.
#[derive(Debug, Clone, PartialEq)]
pub struct MStep {
    pub model: SbgmModel,
    pub dead: Vec<usize>,
}

/// `γ_k = T_k / R_k` clipped at `floor`, `ρ_k = R_k / N_t`.
pub fn csgmm_m_step(stats: &SufficientStats, floor: f64) -> Result<MStep> {
    let n = stats.n_samples as f64;
    let mut dead = Vec::new();
    let mut gammas = Vec::with_capacity(stats.resp_sums.len());
    for (k, (&r, t)) in stats.resp_sums.iter().zip(&stats.weighted).enumerate() {
        if r < DEAD {
            dead.push(k);
            gammas.push(vec![floor; t.len()]);
        } else {
            gammas.push(t.iter().map(|&v| (v / r).max(floor)).collect());
        }
    }
    let weights = normalized_weights(&stats.resp_sums, n, &dead);
    Ok(MStep {
        model: SbgmModel::full(weights, gammas, floor)?,
        dead,
    })
}

pub(crate) fn normalized_weights(resp_sums: &[f64], n: f64, dead: &[usize]) -> Vec<f64> {
    let mut w: Vec<f64> = resp_sums
        .iter()
        .enumerate()
        .map(|(k, &r)| if dead.contains(&k) { 0.0 } else { r / n })
        .collect();
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub seed: u64,
    pub variance_form: VarianceForm,
    pub kronecker_sweeps: usize,
    pub floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            rel_tol: 1e-6,
            seed: 0,
            variance_form: VarianceForm::Full,
            kronecker_sweeps: KRONECKER_SWEEPS,
            floor: DEFAULT_FLOOR,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmTrace {
    /// Log-likelihood of the initial model and after every M-step.
    pub log_likelihoods: Vec<f64>,
    /// Number of M-steps performed.
    pub iterations: usize,
    pub converged: bool,
    /// Trace indices whose model contains a reinitialized component.
    pub resets: Vec<usize>,
}

impl EmTrace {
    /// First index `u` with `L_u < L_{u-1} − slack·|L_{u-1}|`, ignoring
    /// indices right after a component reset.
    pub fn first_violation(&self, slack: f64) -> Option<usize> {
        (1..self.log_likelihoods.len()).find(|&u| {
            let (prev, cur) = (self.log_likelihoods[u - 1], self.log_likelihoods[u]);
            !self.resets.contains(&u) && cur < prev - slack * prev.abs()
        })
    }

    pub fn is_monotone(&self, slack: f64) -> bool {
        self.first_violation(slack).is_none()
    }
}

/// Seeded initial model: `γ_k` i.i.d. uniform on `[0.5, 1.5]·mean‖y‖²/M`,
/// equal weights. Kronecker factors each get the square root of that scale.
pub fn initial_model(obs: &ObservationSet, k: usize, form: VarianceForm, dims: (usize, usize), seed: u64, floor: f64) -> Result<SbgmModel> {
    if k == 0 {
        return Err(Error::invalid("K must be ≥ 1"));
    }
    let m = obs.dim() as f64;
    let energy = obs.samples.iter().map(crate::linalg::squared_norm).sum::<f64>() / obs.len() as f64;
    let scale = energy / m;
    if !(scale > 0.0) {
        return Err(Error::DegenerateInput("observations have zero energy".into()));
    }
    let mut rng = stream_rng(seed, streams::INIT);
    let mut draw = |len: usize, scale: f64| -> Vec<f64> {
        (0..len)
            .map(|_| ((0.5 + rng.random::<f64>()) * scale).max(floor))
            .collect()
    };
    let weights = vec![1.0 / k as f64; k];
    let weights = normalized_weights(&weights, 1.0, &[]);
    match form {
        VarianceForm::Full => {
            let s = dims.0 * dims.1;
            let gammas = (0..k).map(|_| draw(s, scale)).collect();
            SbgmModel::full(weights, gammas, floor)
        }
        VarianceForm::Kronecker => {
            let root = scale.sqrt();
            let mut time = Vec::with_capacity(k);
            let mut freq = Vec::with_capacity(k);
            for _ in 0..k {
                time.push(draw(dims.0, root));
                freq.push(draw(dims.1, root));
            }
            SbgmModel::kronecker(weights, time, freq, floor)
        }
    }
}

/// Matched-filter variance estimate `|b_j^H y|² / ‖b_j‖⁴` from the sample that
/// the current mixture explains worst.
fn reinit_gamma(resp: &DMatrix<f64>, obs: &ObservationSet, b: &CMatrix, floor: f64) -> Vec<f64> {
    let worst = (0..resp.nrows())
        .min_by(|&a, &c| resp.row(a).max().total_cmp(&resp.row(c).max()))
        .unwrap_or(0);
    let y = &obs.samples[worst];
    let proj = b.ad_mul(y);
    b.column_iter()
        .zip(proj.iter())
        .map(|(col, p)| {
            let energy: f64 = col.iter().map(|z| z.norm_sqr()).sum();
            if energy > 0.0 {
                (p.norm_sqr() / (energy * energy)).max(floor)
            } else {
                floor
            }
        })
        .collect()
}

fn revive(step: MStep, e: &EStep, obs: &ObservationSet, b: &CMatrix, opts: &FitOptions) -> Result<SbgmModel> {
    if step.dead.is_empty() {
        return Ok(step.model);
    }
    let gamma = reinit_gamma(&e.responsibilities, obs, b, opts.floor);
    let n = obs.len() as f64;
    let mut sums = e.stats.resp_sums.clone();
    for &k in &step.dead {
        sums[k] = 1.0;
    }
    let weights = normalized_weights(&sums, n, &[]);
    let floor = step.model.floor();
    match step.model.variances().clone() {
        Variances::Full(mut g) => {
            for &k in &step.dead {
                g[k] = gamma.clone();
            }
            SbgmModel::full(weights, g, floor)
        }
        Variances::Kronecker { mut time, mut freq } => {
            let (st, sf) = (time[0].len(), freq[0].len());
            let single = SufficientStats {
                n_samples: 1,
                resp_sums: vec![1.0],
                weighted: vec![gamma.clone()],
            };
            let fit = kronecker_m_step(&single, st, sf, opts.kronecker_sweeps.max(1), floor, None)?;
            let Variances::Kronecker { time: t, freq: f } = fit.model.variances() else {
                unreachable!()
            };
            for &k in &step.dead {
                time[k] = t[0].clone();
                freq[k] = f[0].clone();
            }
            SbgmModel::kronecker(weights, time, freq, floor)
        }
    }
}

fn kronecker_dims(dict: &Dictionary) -> Result<(usize, usize)> {
    match dict.grid() {
        Grid::DelayDoppler(g) => Ok((g.doppler_size(), g.delay_size())),
        Grid::Angle(_) => Err(Error::DomainMismatch("Kronecker variances need a delay-Doppler dictionary".into())),
    }
}

/// Fits a `K`-component model by EM. `K = 1` is M-SBL.
pub fn csgmm_fit(obs: &ObservationSet, dict: &Dictionary, k: usize, opts: &FitOptions) -> Result<(SbgmModel, EmTrace)> {
    if k == 0 {
        return Err(Error::invalid("K must be ≥ 1"));
    }
    if !(opts.rel_tol >= 0.0) {
        return Err(Error::invalid("relative tolerance must be nonnegative"));
    }
    let b = effective_dictionary(&obs.measurement, dict.matrix())?;
    let dims = match opts.variance_form {
        VarianceForm::Full => (1, dict.cols()),
        VarianceForm::Kronecker => kronecker_dims(dict)?,
    };
    obs.validate()?;
    if obs.is_empty() {
        return Err(Error::invalid("observation set is empty"));
    }
    let mut model = initial_model(obs, k, opts.variance_form, dims, opts.seed, opts.floor)?;
    let mut trace = EmTrace::default();
    let in_iteration = |iteration: usize| move |e: Error| Error::Iteration {
        iteration,
        source: Box::new(e),
    };

    for it in 0..=opts.max_iters {
        let e = e_step_with(&model, obs, &b).map_err(in_iteration(it))?;
        let ll = e.log_likelihood;
        if let Some(&prev) = trace.log_likelihoods.last() {
            trace.log_likelihoods.push(ll);
            if (ll - prev).abs() <= opts.rel_tol * prev.abs() {
                trace.converged = true;
                break;
            }
        } else {
            trace.log_likelihoods.push(ll);
        }
        if it == opts.max_iters {
            break;
        }
        let step = match &model.variances() {
            Variances::Full(_) => csgmm_m_step(&e.stats, opts.floor),
            Variances::Kronecker { time, freq } => kronecker_m_step(
                &e.stats,
                dims.0,
                dims.1,
                opts.kronecker_sweeps,
                opts.floor,
                Some((time, freq)),
            ),
        }
        .map_err(in_iteration(it))?;
        if !step.dead.is_empty() {
            trace.resets.push(it + 1);
        }
        model = revive(step, &e, obs, &b, opts).map_err(in_iteration(it))?;
        trace.iterations += 1;
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_simo_dictionary, AngleGrid, SystemConfig};
    use crate::linalg::standard_complex_normal;
    use crate::sbgm::posterior::posterior_moments_with;
    use crate::scenario::{random_selection_matrix, Measurement};

    fn toy_obs(seed: u64, n: usize, m_sel: usize) -> (ObservationSet, Dictionary) {
        let dict = build_simo_dictionary(AngleGrid::new(16).unwrap(), SystemConfig::simo(8)).unwrap();
        let mut rng = stream_rng(seed, 0);
        let a = if m_sel == 8 {
            Measurement::identity(8)
        } else {
            random_selection_matrix(m_sel, 8, &mut rng).unwrap()
        };
        let samples = (0..n)
            .map(|_| CVector::from_fn(m_sel, |_, _| standard_complex_normal(&mut rng) * 2.0))
            .collect();
        let noise_vars = (0..n).map(|i| 0.05 + 0.1 * (i % 7) as f64).collect();
        let obs = ObservationSet {
            samples,
            noise_vars,
            snr_db: vec![0.0; n],
            measurement: a,
        };
        (obs, dict)
    }

    fn random_model(seed: u64, k: usize, s: usize) -> SbgmModel {
        let mut rng = stream_rng(seed, 1);
        let gammas = (0..k).map(|_| (0..s).map(|_| 0.01 + rng.random::<f64>()).collect()).collect();
        let raw: Vec<f64> = (0..k).map(|_| 0.2 + rng.random::<f64>()).collect();
        let weights = normalized_weights(&raw, raw.iter().sum(), &[]);
        SbgmModel::full(weights, gammas, DEFAULT_FLOOR).unwrap()
    }

    #[test]
    fn single_component_responsibilities_are_one() {
        let (obs, dict) = toy_obs(1, 20, 5);
        let e = csgmm_e_step(&random_model(1, 1, 16), &obs, &dict).unwrap();
        assert!(e.responsibilities.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn identical_components_split_evenly() {
        let (obs, dict) = toy_obs(2, 20, 8);
        let g = vec![0.3; 16];
        let model = SbgmModel::full(vec![0.5, 0.5], vec![g.clone(), g], DEFAULT_FLOOR).unwrap();
        let e = csgmm_e_step(&model, &obs, &dict).unwrap();
        assert!(e.responsibilities.iter().all(|&r| (r - 0.5).abs() < 1e-12));
    }

    #[test]
    fn matches_cholesky_posterior_oracle() {
        let (obs, dict) = toy_obs(3, 40, 6);
        let model = random_model(3, 3, 16);
        let e = csgmm_e_step(&model, &obs, &dict).unwrap();
        let b = effective_dictionary(&obs.measurement, dict.matrix()).unwrap();

        let mut moments = Vec::new();
        let mut total = 0.0;
        for (i, (y, &s2)) in obs.samples.iter().zip(&obs.noise_vars).enumerate() {
            let per: Vec<_> = (0..3)
                .map(|k| posterior_moments_with(&model.gamma(k), y, &b, s2, false).unwrap())
                .collect();
            let dens: Vec<f64> = per
                .iter()
                .zip(model.weights())
                .map(|(p, w)| w * p.log_marginal.exp())
                .collect();
            let norm: f64 = dens.iter().sum();
            total += norm.ln();
            for (k, dk) in dens.iter().enumerate() {
                assert!((e.responsibilities[(i, k)] - dk / norm).abs() < 1e-10);
            }
            assert!((e.responsibilities.row(i).sum() - 1.0).abs() < 1e-12);
            moments.push(
                per.iter()
                    .map(|p| p.mean.iter().zip(&p.cov_diag).map(|(m, c)| m.norm_sqr() + c).collect())
                    .collect(),
            );
        }
        assert!((e.log_likelihood - total).abs() < 1e-9 * total.abs());
        let oracle = SufficientStats::from_per_sample(&e.responsibilities, &moments).unwrap();
        for k in 0..3 {
            assert!((oracle.resp_sums[k] - e.stats.resp_sums[k]).abs() < 1e-10);
            for j in 0..16 {
                let (a, b) = (oracle.weighted[k][j], e.stats.weighted[k][j]);
                assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
        let ll = total_log_likelihood(&model, &obs, &dict).unwrap();
        assert!((ll - e.log_likelihood).abs() <= 1e-10 * ll.abs());
    }

    #[test]
    fn log_likelihood_of_standard_normal_at_origin() {
        let dict = build_simo_dictionary(AngleGrid::new(2).unwrap(), SystemConfig::simo(1)).unwrap();
        let obs = ObservationSet {
            samples: vec![CVector::zeros(1)],
            noise_vars: vec![1.0],
            snr_db: vec![0.0],
            measurement: Measurement::identity(1),
        };
        let model = SbgmModel::full(vec![1.0], vec![vec![0.0, 0.0]], 0.0).unwrap();
        let ll = total_log_likelihood(&model, &obs, &dict).unwrap();
        assert!((ll - (1.0 / PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn m_step_examples() {
        let stats = SufficientStats {
            n_samples: 4,
            resp_sums: vec![1.0, 3.0],
            weighted: vec![vec![2.0, 1e-9], vec![3.0, 6.0]],
        };
        let step = csgmm_m_step(&stats, DEFAULT_FLOOR).unwrap();
        assert_eq!(step.model.gamma(0), vec![2.0, 1e-7]);
        assert_eq!(step.model.gamma(1), vec![1.0, 2.0]);
        assert_eq!(step.model.weights(), &[0.25, 0.75]);
        assert!(step.dead.is_empty());

        // one-hot responsibilities give per-cluster means
        let resp = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let moments = vec![
            vec![vec![1.0], vec![9.0]],
            vec![vec![9.0], vec![4.0]],
            vec![vec![3.0], vec![9.0]],
        ];
        let stats = SufficientStats::from_per_sample(&resp, &moments).unwrap();
        let step = csgmm_m_step(&stats, DEFAULT_FLOOR).unwrap();
        assert_eq!(step.model.gamma(0), vec![2.0]);
        assert_eq!(step.model.gamma(1), vec![4.0]);
    }

    #[test]
    fn dead_component_is_flagged() {
        let stats = SufficientStats {
            n_samples: 2,
            resp_sums: vec![2.0, 0.0],
            weighted: vec![vec![2.0], vec![0.0]],
        };
        let step = csgmm_m_step(&stats, DEFAULT_FLOOR).unwrap();
        assert_eq!(step.dead, vec![1]);
        assert_eq!(step.model.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn fit_is_monotone_and_deterministic() {
        let (obs, dict) = toy_obs(5, 60, 6);
        let opts = FitOptions {
            max_iters: 40,
            seed: 9,
            ..FitOptions::default()
        };
        let (m1, t1) = csgmm_fit(&obs, &dict, 3, &opts).unwrap();
        let (m2, t2) = csgmm_fit(&obs, &dict, 3, &opts).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(t1, t2);
        assert!(t1.is_monotone(1e-8), "{:?}", t1.log_likelihoods);
        assert_eq!(t1.log_likelihoods.len(), t1.iterations + 1);
    }

    #[test]
    fn m_sbl_is_single_component() {
        let (obs, dict) = toy_obs(6, 30, 8);
        let opts = FitOptions {
            max_iters: 20,
            ..FitOptions::default()
        };
        let (model, trace) = csgmm_fit(&obs, &dict, 1, &opts).unwrap();
        assert_eq!(model.weights(), &[1.0]);
        assert!(trace.is_monotone(1e-8));
    }

    #[test]
    fn recovers_two_cluster_weights() {
        // two disjoint supports with weights 0.3 / 0.7, noiseless-ish, A = I
        let dict = build_simo_dictionary(AngleGrid::new(16).unwrap(), SystemConfig::simo(8)).unwrap();
        let mut rng = stream_rng(7, 0);
        let n = 400;
        let mut samples = Vec::new();
        for i in 0..n {
            let mut s = CVector::zeros(16);
            let support = if i % 10 < 3 { [2, 3] } else { [11, 12] };
            for j in support {
                s[j] = standard_complex_normal(&mut rng);
            }
            samples.push(dict.apply(&s).unwrap());
        }
        let obs = ObservationSet {
            samples,
            noise_vars: vec![1e-3; n],
            snr_db: vec![30.0; n],
            measurement: Measurement::identity(8),
        };
        let opts = FitOptions {
            max_iters: 200,
            seed: 1,
            ..FitOptions::default()
        };
        let (model, trace) = csgmm_fit(&obs, &dict, 2, &opts).unwrap();
        assert!(trace.is_monotone(1e-8));
        let mut w = model.weights().to_vec();
        w.sort_by(f64::total_cmp);
        assert!((w[0] - 0.3).abs() < 0.05 && (w[1] - 0.7).abs() < 0.05, "{w:?}");
    }

    #[test]
    fn trace_violation_detection() {
        let t = EmTrace {
            log_likelihoods: vec![-10.0, -9.0, -9.5, -9.4],
            iterations: 3,
            converged: false,
            resets: vec![],
        };
        assert_eq!(t.first_violation(1e-8), Some(2));
        let t = EmTrace { resets: vec![2], ..t };
        assert!(t.is_monotone(1e-8));
    }
}
