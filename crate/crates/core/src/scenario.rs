//! Synthetic propagation scenarios and the noisy compressed observation model
//! `y = A h + n`.
//!
//! * SIMO: one main angle per user drawn from an [`AngleProfile`], the channel
//!   is `N_C(0, C_ω)` with `C_ω = ∫ g(θ; ω) a(θ) a(θ)^H dθ` and `g` a Laplacian
//!   local scattering density.
//! * OFDM: a parametric multipath generator (random path count, uniform delays
//!   and Dopplers, exponential power-delay profile, uniform phases).

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::{AngleGrid, SystemConfig};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, squared_norm, standard_complex_normal, CMatrix, CVector, C64};
use crate::quadrature::{composite_rule, PANEL_ORDER};

const DEG: f64 = PI / 180.0;

/// One truncated-Gaussian angular region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleComponent {
    /// Radians.
    pub center: f64,
    /// Radians; ignored when `half_width` is zero.
    pub std_dev: f64,
    /// Radians; the support is `[center - half_width, center + half_width]`.
    pub half_width: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleProfile {
    pub components: Vec<AngleComponent>,
}

impl Default for AngleProfile {
    /// Four equal-weight regions at ±20° and ±60°, 5° standard deviation,
    /// truncated at two standard deviations.
    fn default() -> Self {
        let components = [-60.0, -20.0, 20.0, 60.0]
            .iter()
            .map(|c| AngleComponent {
                center: c * DEG,
                std_dev: 5.0 * DEG,
                half_width: 10.0 * DEG,
                weight: 0.25,
            })
            .collect();
        Self { components }
    }
}

impl AngleProfile {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("angle profile needs at least one component"));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid("angle component weights must be nonnegative"));
            }
            if !(c.half_width >= 0.0 && c.std_dev >= 0.0) {
                return Err(Error::invalid("angle component widths must be nonnegative"));
            }
            if c.half_width > 0.0 && c.std_dev <= 0.0 {
                return Err(Error::invalid("a component with nonzero width needs a positive standard deviation"));
            }
            if c.center - c.half_width < -PI / 2.0 || c.center + c.half_width >= PI / 2.0 {
                return Err(Error::invalid("angle component support must lie within [-π/2, π/2)"));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("angle component weights sum to {total}, expected 1")));
        }
        Ok(())
    }

    /// Grid points within `n_std` standard deviations of any component center.
    pub fn support_mask(&self, grid: &AngleGrid, n_std: f64) -> Vec<bool> {
        grid.points()
            .iter()
            .map(|&t| {
                self.components
                    .iter()
                    .any(|c| (t - c.center).abs() <= n_std * c.std_dev)
            })
            .collect()
    }
}

/// Draws a main angle: component by weight, then a truncated normal offset.
pub fn sample_angle<R: Rng + ?Sized>(profile: &AngleProfile, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let last = profile.components.len() - 1;
    let comp = profile
        .components
        .iter()
        .enumerate()
        .find(|(i, c)| {
            acc += c.weight;
            u < acc || *i == last
        })
        .map(|(_, c)| c)
        .expect("profile has components");
    if comp.half_width == 0.0 {
        return comp.center;
    }
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let offset = z * comp.std_dev;
        if offset.abs() <= comp.half_width {
            return comp.center + offset;
        }
    }
}

/// `C = ∫ g(θ) a(θ) a(θ)^H dθ` for a Laplacian `g` centered at `center` with
/// standard deviation `std_dev`, integrated over `center ± 10·std_dev`
/// (intersected with `[-π, π]`).
///
/// The integrand has a kink at the center, so each side is integrated
/// separately with composite Gauss–Legendre panels; `quadrature_points` is the
/// total node count. The result is Toeplitz, so only its first column is
/// integrated.
pub fn laplacian_local_covariance(
    center: f64,
    std_dev: f64,
    n_antennas: usize,
    quadrature_points: usize,
) -> Result<CMatrix> {
    let lags = laplacian_covariance_lags(center, std_dev, n_antennas, quadrature_points)?;
    Ok(toeplitz_hermitian(&lags))
}

/// First column `c_k = ∫ g(θ) exp(-jπ k sin θ) dθ`, `k = 0 .. n-1`.
pub fn laplacian_covariance_lags(
    center: f64,
    std_dev: f64,
    n_antennas: usize,
    quadrature_points: usize,
) -> Result<Vec<C64>> {
    if !(std_dev > 0.0 && std_dev.is_finite() && center.is_finite()) {
        return Err(Error::invalid("Laplacian standard deviation must be positive and finite"));
    }
    if quadrature_points < 64 {
        return Err(Error::invalid("at least 64 quadrature points are required"));
    }
    if n_antennas == 0 {
        return Err(Error::invalid("antenna count must be ≥ 1"));
    }
    let scale = std_dev / std::f64::consts::SQRT_2;
    let panels = (quadrature_points / (2 * PANEL_ORDER)).max(1);
    let lo = (center - 10.0 * std_dev).max(-PI);
    let hi = (center + 10.0 * std_dev).min(PI);

    let mut lags = vec![C64::new(0.0, 0.0); n_antennas];
    for (a, b) in [(lo, center), (center, hi)] {
        if b <= a {
            continue;
        }
        let (nodes, weights) = composite_rule(a, b, panels);
        for (theta, w) in nodes.into_iter().zip(weights) {
            let density = (-(theta - center).abs() / scale).exp() / (2.0 * scale);
            let step = C64::cis(-PI * theta.sin());
            let mut phasor = C64::new(w * density, 0.0);
            for lag in lags.iter_mut() {
                *lag += phasor;
                phasor *= step;
            }
        }
    }
    Ok(lags)
}

fn toeplitz_hermitian(lags: &[C64]) -> CMatrix {
    let n = lags.len();
    CMatrix::from_fn(n, n, |i, j| if i >= j { lags[i - j] } else { lags[j - i].conj() })
}

/// Mass of a Laplacian (mean `center`, standard deviation `std_dev`) falling in
/// each grid cell `[θ_g - Δ/2, θ_g + Δ/2)`.
pub fn laplacian_cell_masses(center: f64, std_dev: f64, grid: &AngleGrid) -> Vec<f64> {
    let scale = std_dev / std::f64::consts::SQRT_2;
    let cdf = |x: f64| {
        let z = (x - center) / scale;
        if z < 0.0 {
            0.5 * z.exp()
        } else {
            1.0 - 0.5 * (-z).exp()
        }
    };
    let half = grid.spacing() / 2.0;
    grid.points().iter().map(|&t| cdf(t + half) - cdf(t - half)).collect()
}

/// Ground-truth coefficient vector for a channel with main angle `center`:
/// independent circular Gaussians whose powers are the per-cell Laplacian
/// masses, i.e. the on-grid equivalent of a continuum of subpaths with
/// uniform phases.
pub fn ground_truth_angular_parameters<R: Rng + ?Sized>(
    center: f64,
    std_dev: f64,
    grid: &AngleGrid,
    rng: &mut R,
) -> CVector {
    let masses = laplacian_cell_masses(center, std_dev, grid);
    CVector::from_iterator(
        masses.len(),
        masses.iter().map(|m| standard_complex_normal(rng) * m.sqrt()),
    )
}

/// `h ~ N_C(0, cov)` via a Cholesky factor. A singular PSD input gets one
/// retry with `1e-12·tr(cov)/N` added to the diagonal.
pub fn draw_simo_channel<R: Rng + ?Sized>(cov: &CMatrix, rng: &mut R) -> Result<CVector> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::invalid("covariance must be square"));
    }
    let trace: f64 = (0..n).map(|i| cov[(i, i)].re).sum();
    let z = CVector::from_fn(n, |_, _| standard_complex_normal(rng));
    if trace == 0.0 {
        return Ok(CVector::zeros(n));
    }
    let factor = match cholesky_lower(cov.clone()) {
        Ok(l) => l,
        Err(_) => {
            let jitter = 1e-12 * trace / n as f64;
            let mut reg = cov.clone();
            for i in 0..n {
                reg[(i, i)] += C64::new(jitter, 0.0);
            }
            cholesky_lower(reg).map_err(|_| Error::Numeric("channel covariance is not positive semidefinite".into()))?
        }
    };
    Ok(factor * z)
}

/// One propagation path of an OFDM channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmPath {
    pub gain: C64,
    /// Seconds.
    pub delay: f64,
    /// Hz.
    pub doppler: f64,
}

/// Parametric multipath environment for OFDM channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfdmScenario {
    pub max_paths: usize,
    /// `[lo, hi)` in seconds.
    pub delay_range: [f64; 2],
    /// `[lo, hi]` in Hz.
    pub doppler_range: [f64; 2],
    /// Exponential power decay per second of delay.
    pub power_decay: f64,
    pub config: SystemConfig,
}

impl Default for OfdmScenario {
    fn default() -> Self {
        Self {
            max_paths: 6,
            delay_range: [0.0, 5e-6],
            doppler_range: [-200.0, 200.0],
            power_decay: 5e5,
            config: SystemConfig::ofdm_5g(),
        }
    }
}

impl OfdmScenario {
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !matches!(self.config, SystemConfig::Ofdm { .. }) {
            return Err(Error::DomainMismatch("OFDM scenario needs an OFDM system configuration".into()));
        }
        if self.max_paths == 0 {
            return Err(Error::invalid("max_paths must be ≥ 1"));
        }
        let [dl, dh] = self.delay_range;
        let [nl, nh] = self.doppler_range;
        if !(dl.is_finite() && dh.is_finite() && 0.0 <= dl && dl <= dh) {
            return Err(Error::invalid("delay range must be finite and nonnegative"));
        }
        if !(nl.is_finite() && nh.is_finite() && nl <= nh) {
            return Err(Error::invalid("Doppler range must be finite and ordered"));
        }
        if !(self.power_decay >= 0.0 && self.power_decay.is_finite()) {
            return Err(Error::invalid("power decay must be nonnegative"));
        }
        Ok(())
    }
}

pub fn draw_ofdm_paths<R: Rng + ?Sized>(scn: &OfdmScenario, rng: &mut R) -> Vec<OfdmPath> {
    let count = rng.random_range(1..=scn.max_paths);
    (0..count)
        .map(|_| {
            let delay = uniform(rng, scn.delay_range);
            let doppler = uniform(rng, scn.doppler_range);
            let phase = rng.random::<f64>() * 2.0 * PI;
            let power = (-scn.power_decay * delay).exp() / count as f64;
            OfdmPath {
                gain: C64::from_polar(power.sqrt(), phase),
                delay,
                doppler,
            }
        })
        .collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, [lo, hi]: [f64; 2]) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `H = Σ ρ a_f(τ) a_t(ϑ)^T` as an `N_f × N_sym` matrix.
pub fn ofdm_channel_from_paths(paths: &[OfdmPath], config: &SystemConfig) -> Result<CMatrix> {
    config.validate()?;
    let SystemConfig::Ofdm {
        subcarriers,
        symbols,
        subcarrier_spacing,
        symbol_duration,
    } = *config
    else {
        return Err(Error::DomainMismatch("OFDM channel needs an OFDM configuration".into()));
    };
    let mut h = CMatrix::zeros(subcarriers, symbols);
    for path in paths {
        let af = crate::dictionary::delay_steering(path.delay, subcarriers, subcarrier_spacing);
        let at = crate::dictionary::doppler_steering(path.doppler, symbols, symbol_duration);
        h += (af * at.transpose()) * path.gain;
    }
    Ok(h)
}

pub fn draw_ofdm_channel<R: Rng + ?Sized>(scn: &OfdmScenario, rng: &mut R) -> Result<CMatrix> {
    let paths = draw_ofdm_paths(scn, rng);
    ofdm_channel_from_paths(&paths, &scn.config)
}

/// Measurement matrix `A`: identity or a row selection of the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Measurement {
    Identity { dim: usize },
    Selection { indices: Vec<usize>, dim: usize },
}

impl Measurement {
    pub fn identity(dim: usize) -> Self {
        Measurement::Identity { dim }
    }

    pub fn selection(indices: Vec<usize>, dim: usize) -> Result<Self> {
        let m = Measurement::Selection { indices, dim };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if let Measurement::Selection { indices, dim } = self {
            if indices.is_empty() || indices.len() > *dim {
                return Err(Error::invalid("selection needs between 1 and N rows"));
            }
            let mut seen = vec![false; *dim];
            for &i in indices {
                if i >= *dim || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid("selection rows must be distinct unit vectors"));
                }
            }
        }
        Ok(())
    }

    pub fn rows(&self) -> usize {
        match self {
            Measurement::Identity { dim } => *dim,
            Measurement::Selection { indices, .. } => indices.len(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Measurement::Identity { dim } | Measurement::Selection { dim, .. } => *dim,
        }
    }

    pub fn apply(&self, h: &CVector) -> CVector {
        match self {
            Measurement::Identity { .. } => h.clone(),
            Measurement::Selection { indices, .. } => CVector::from_iterator(indices.len(), indices.iter().map(|&i| h[i])),
        }
    }

    /// `A · D`.
    pub fn select_rows(&self, d: &CMatrix) -> CMatrix {
        match self {
            Measurement::Identity { .. } => d.clone(),
            Measurement::Selection { indices, .. } => d.select_rows(indices.iter()),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Measurement::Identity { dim } => DMatrix::identity(*dim, *dim),
            Measurement::Selection { indices, dim } => {
                let mut a = DMatrix::zeros(indices.len(), *dim);
                for (r, &c) in indices.iter().enumerate() {
                    a[(r, c)] = 1.0;
                }
                a
            }
        }
    }

    /// Parses a dense 0/1 matrix back into a measurement.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        let (m, n) = a.shape();
        let mut indices = Vec::with_capacity(m);
        for r in 0..m {
            let ones: Vec<usize> = (0..n).filter(|&c| a[(r, c)] != 0.0).collect();
            if ones.len() != 1 || a[(r, ones[0])] != 1.0 {
                return Err(Error::Format("measurement rows must be unit vectors".into()));
            }
            indices.push(ones[0]);
        }
        if m == n && indices.iter().enumerate().all(|(r, &c)| r == c) {
            return Ok(Measurement::identity(n));
        }
        Measurement::selection(indices, n)
    }
}

/// Uniformly random selection of `m` out of `n` entries, without replacement.
pub fn random_selection_matrix<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Measurement> {
    if m == 0 || m > n {
        return Err(Error::invalid(format!("cannot select {m} of {n} entries")));
    }
    let indices = index::sample(rng, n, m).into_vec();
    Measurement::selection(indices, n)
}

/// How per-sample SNR maps to noise variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrConvention {
    /// `σ² = E‖A h‖² / (M · 10^{SNR/10})`.
    Observed,
    /// `σ² = E‖h‖² / (N · 10^{SNR/10})`.
    Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub samples: Vec<CVector>,
    pub noise_vars: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub measurement: Measurement,
}

impl ObservationSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.measurement.rows()
    }

    pub fn validate(&self) -> Result<()> {
        self.measurement.validate()?;
        if self.samples.len() != self.noise_vars.len() {
            return Err(Error::invalid("sample and noise-variance counts differ"));
        }
        let m = self.dim();
        if self.samples.iter().any(|y| y.len() != m) {
            return Err(Error::invalid("observation length does not match the measurement"));
        }
        if self.noise_vars.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::invalid("noise variances must be positive"));
        }
        Ok(())
    }
}

/// Draws `y_i = A h_i + n_i` with a per-sample SNR uniform on `snr_range_db`.
///
/// `signal_energy` is `E‖A h‖²` (or `E‖h‖²` under [`SnrConvention::Channel`]);
/// when `None` it is estimated from `channels`.
pub fn make_observations<R: Rng + ?Sized>(
    channels: &[CVector],
    measurement: &Measurement,
    snr_range_db: (f64, f64),
    convention: SnrConvention,
    signal_energy: Option<f64>,
    rng: &mut R,
) -> Result<ObservationSet> {
    measurement.validate()?;
    if channels.is_empty() {
        return Err(Error::invalid("no channels to observe"));
    }
    let (lo, hi) = snr_range_db;
    if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::invalid("SNR range must be finite and ordered"));
    }
    if channels.iter().any(|h| h.len() != measurement.cols()) {
        return Err(Error::invalid("channel length does not match the measurement"));
    }
    let observed: Vec<CVector> = channels.iter().map(|h| measurement.apply(h)).collect();
    let (energy, dim) = match convention {
        SnrConvention::Observed => (
            signal_energy.unwrap_or_else(|| mean(observed.iter().map(squared_norm))),
            measurement.rows(),
        ),
        SnrConvention::Channel => (
            signal_energy.unwrap_or_else(|| mean(channels.iter().map(squared_norm))),
            measurement.cols(),
        ),
    };
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(Error::DegenerateInput("channel set has zero signal energy".into()));
    }
    let per_entry = energy / dim as f64;

    let mut samples = Vec::with_capacity(channels.len());
    let mut noise_vars = Vec::with_capacity(channels.len());
    let mut snr_db = Vec::with_capacity(channels.len());
    for clean in observed {
        let snr = lo + (hi - lo) * rng.random::<f64>();
        let sigma2 = per_entry / 10f64.powf(0.1 * snr);
        let std = sigma2.sqrt();
        let y = clean.map(|z| z + standard_complex_normal(rng) * std);
        samples.push(y);
        noise_vars.push(sigma2);
        snr_db.push(snr);
    }
    Ok(ObservationSet {
        samples,
        noise_vars,
        snr_db,
        measurement: measurement.clone(),
    })
}

/// SNR in dB implied by `noise_var` under the given per-entry signal energy.
pub fn implied_snr_db(per_entry_energy: f64, noise_var: f64) -> f64 {
    10.0 * (per_entry_energy / noise_var).log10()
}

/// Scales the dataset so that the mean squared norm equals the channel
/// dimension. Returns the scaled channels and the applied amplitude factor.
pub fn normalize_dataset(channels: &[CVector]) -> Result<(Vec<CVector>, f64)> {
    if channels.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let dim = channels[0].len();
    if channels.iter().any(|h| h.len() != dim) {
        return Err(Error::invalid("channels have differing dimensions"));
    }
    let energy = mean(channels.iter().map(squared_norm));
    if !(energy > 0.0) {
        return Err(Error::DegenerateInput("all-zero dataset cannot be normalized".into()));
    }
    let scale = (dim as f64 / energy).sqrt();
    let scaled = channels.iter().map(|h| h * C64::new(scale, 0.0)).collect();
    Ok((scaled, scale))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_ofdm_dictionary, steering_vector_ula, vectorize_ofdm, DelayDopplerGrid};
    use crate::linalg::{hermitian_deviation, max_abs};
    use crate::random::stream_rng;

    #[test]
    fn default_profile_has_four_regions() {
        let p = AngleProfile::default();
        assert_eq!(p.components.len(), 4);
        p.validate().unwrap();
    }

    #[test]
    fn degenerate_component_always_returns_center() {
        let p = AngleProfile {
            components: vec![AngleComponent {
                center: 0.0,
                std_dev: 0.0,
                half_width: 0.0,
                weight: 1.0,
            }],
        };
        p.validate().unwrap();
        let mut rng = stream_rng(1, 0);
        assert!((0..100).all(|_| sample_angle(&p, &mut rng) == 0.0));
    }

    #[test]
    fn component_frequencies_follow_weights() {
        // 3σ of a binomial(1e5, 1/4) proportion is ≈ 0.0041, well inside 0.02
        let p = AngleProfile::default();
        let mut rng = stream_rng(7, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let a = sample_angle(&p, &mut rng);
            let k = p
                .components
                .iter()
                .position(|c| (a - c.center).abs() <= c.half_width)
                .expect("inside a support");
            counts[k] += 1;
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 0.02);
        }
    }

    #[test]
    fn rejects_bad_profiles() {
        let mut p = AngleProfile::default();
        p.components[0].weight = 0.3;
        assert!(p.validate().is_err());
        let mut p = AngleProfile::default();
        p.components[3].center = 85.0 * DEG;
        assert!(p.validate().is_err());
    }

    #[test]
    fn laplacian_covariance_properties() {
        let std = 2.0 * DEG;
        let c = laplacian_local_covariance(0.0, std, 16, 2048).unwrap();
        assert!(hermitian_deviation(&c) <= 1e-12);
        let eig = c.clone().symmetric_eigenvalues();
        assert!(eig.iter().all(|&l| l >= -1e-10));
        let mass = 1.0 - (-10.0 * std::f64::consts::SQRT_2).exp();
        for i in 0..16 {
            assert!((c[(i, i)].re - mass).abs() < 1e-12);
        }
        let trace: f64 = (0..16).map(|i| c[(i, i)].re).sum();
        assert!((trace - 16.0 * mass).abs() < 1e-10);
    }

    #[test]
    fn laplacian_quadrature_refinement() {
        let coarse = laplacian_local_covariance(0.3, 2.0 * DEG, 16, 2048).unwrap();
        let fine = laplacian_local_covariance(0.3, 2.0 * DEG, 16, 4096).unwrap();
        assert!((coarse - fine).norm() < 1e-8);
    }

    #[test]
    fn laplacian_narrow_limit_is_rank_one() {
        let c = laplacian_local_covariance(0.4, 1e-7, 8, 256).unwrap();
        let a = steering_vector_ula(0.4, 8).unwrap();
        let outer = &a * a.adjoint();
        assert!(max_abs(&(c - outer)) < 1e-5);
    }

    #[test]
    fn laplacian_argument_checks() {
        assert!(laplacian_local_covariance(0.0, 0.0, 4, 2048).is_err());
        assert!(laplacian_local_covariance(0.0, 0.1, 4, 32).is_err());
    }

    #[test]
    fn zero_covariance_gives_zero_channel() {
        let mut rng = stream_rng(3, 0);
        let h = draw_simo_channel(&CMatrix::zeros(4, 4), &mut rng).unwrap();
        assert!(h.iter().all(|z| *z == C64::new(0.0, 0.0)));
    }

    #[test]
    fn identity_covariance_moments() {
        // per-entry E|h|² = 1; 3σ of the mean of 1e5 Exp(1) draws ≈ 0.0095
        let mut rng = stream_rng(11, 0);
        let cov = CMatrix::identity(2, 2);
        let n = 100_000;
        let mut power = [0.0; 2];
        let mut pseudo = C64::new(0.0, 0.0);
        let (mut re2, mut im2) = (0.0, 0.0);
        for _ in 0..n {
            let h = draw_simo_channel(&cov, &mut rng).unwrap();
            for i in 0..2 {
                power[i] += h[i].norm_sqr();
            }
            pseudo += h[0] * h[0];
            re2 += h[0].re * h[0].re;
            im2 += h[0].im * h[0].im;
        }
        for p in power {
            assert!((p / n as f64 - 1.0).abs() < 0.02);
        }
        assert!(pseudo.norm() / (n as f64) < 0.02);
        assert!((re2 - im2).abs() / (n as f64) < 0.02);
    }

    #[test]
    fn rank_one_covariance_draws_are_collinear() {
        let a = steering_vector_ula(0.7, 6).unwrap();
        let cov = &a * a.adjoint();
        let mut rng = stream_rng(5, 0);
        for _ in 0..20 {
            let h = draw_simo_channel(&cov, &mut rng).unwrap();
            let coef = (a.adjoint() * &h)[0] / 6.0;
            let resid = &h - &a * coef;
            assert!(resid.norm() <= 1e-5 * h.norm().max(1e-300));
        }
    }

    #[test]
    fn indefinite_covariance_is_a_numeric_error() {
        let mut cov = CMatrix::identity(3, 3);
        cov[(2, 2)] = C64::new(-1.0, 0.0);
        let mut rng = stream_rng(5, 0);
        assert!(matches!(draw_simo_channel(&cov, &mut rng), Err(Error::Numeric(_))));
    }

    fn single_path(gain: f64, delay: f64, doppler: f64) -> Vec<OfdmPath> {
        vec![OfdmPath {
            gain: C64::new(gain, 0.0),
            delay,
            doppler,
        }]
    }

    #[test]
    fn ofdm_trivial_paths() {
        let cfg = SystemConfig::ofdm(12, 7, 15e3, 1e-3 / 14.0);
        let h = ofdm_channel_from_paths(&single_path(1.0, 0.0, 0.0), &cfg).unwrap();
        assert!(h.iter().all(|z| (*z - C64::new(1.0, 0.0)).norm() < 1e-15));

        // τ = 1/(N_f Δf): frequency column is the first DFT column
        let h = ofdm_channel_from_paths(&single_path(1.0, 1.0 / (12.0 * 15e3), 0.0), &cfg).unwrap();
        for t in 0..7 {
            for f in 0..12 {
                let dft = C64::cis(-2.0 * PI * f as f64 / 12.0);
                assert!((h[(f, t)] - dft).norm() < 1e-12);
            }
        }
        let sv = h.clone().singular_values();
        assert!(sv[1] < 1e-10 * sv[0]);
    }

    #[test]
    fn ofdm_random_draw_is_low_rank() {
        let scn = OfdmScenario {
            max_paths: 3,
            ..OfdmScenario::default()
        };
        let mut rng = stream_rng(9, 0);
        for _ in 0..10 {
            let h = draw_ofdm_channel(&scn, &mut rng).unwrap();
            let sv = h.singular_values();
            assert!(sv[3] < 1e-10 * sv[0]);
        }
    }

    #[test]
    fn on_grid_paths_match_dictionary() {
        let grid = DelayDopplerGrid::new(8, 6, 400.0, 6e-6).unwrap();
        let cfg = SystemConfig::ofdm(10, 5, 15e3, 1e-3 / 14.0);
        let dict = build_ofdm_dictionary(grid, cfg).unwrap();
        let picks = [(1, 0, C64::new(0.5, -1.0)), (6, 4, C64::new(-0.2, 0.3)), (3, 5, C64::new(1.0, 0.0))];
        let mut s = CVector::zeros(grid.size());
        let mut paths = Vec::new();
        for (q, p, g) in picks {
            s[grid.flat_index(q, p)] = g;
            paths.push(OfdmPath {
                gain: g,
                delay: grid.delay_point(p),
                doppler: grid.doppler_point(q),
            });
        }
        let h = vectorize_ofdm(&ofdm_channel_from_paths(&paths, &cfg).unwrap());
        let hd = dict.apply(&s).unwrap();
        assert!((h - hd).camax() < 1e-10);
    }

    #[test]
    fn selection_examples() {
        let mut rng = stream_rng(2, 0);
        let a = random_selection_matrix(5, 5, &mut rng).unwrap();
        let dense = a.to_dense();
        assert_eq!(dense.row_sum().iter().copied().collect::<Vec<_>>(), vec![1.0; 5]);
        assert_eq!(dense.column_sum().iter().copied().collect::<Vec<_>>(), vec![1.0; 5]);

        let a = random_selection_matrix(30, 336, &mut rng).unwrap();
        let Measurement::Selection { indices, .. } = &a else { panic!() };
        let mut sorted = indices.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 30);
        assert_eq!(Measurement::from_dense(&a.to_dense()).unwrap(), a);

        assert!(random_selection_matrix(3, 2, &mut rng).is_err());
    }

    #[test]
    fn selection_is_uniform() {
        // 3σ of a binomial(1e4, 1/2) proportion is 0.015
        let mut rng = stream_rng(4, 0);
        let n = 10_000;
        let zeros = (0..n)
            .filter(|_| {
                let Measurement::Selection { indices, .. } = random_selection_matrix(1, 2, &mut rng).unwrap() else {
                    unreachable!()
                };
                indices[0] == 0
            })
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.02);
    }

    #[test]
    fn noiseless_limit() {
        let mut rng = stream_rng(6, 0);
        let channels: Vec<CVector> = (0..5)
            .map(|_| CVector::from_fn(4, |_, _| standard_complex_normal(&mut rng)))
            .collect();
        let a = Measurement::identity(4);
        let obs = make_observations(&channels, &a, (300.0, 300.0), SnrConvention::Observed, None, &mut rng).unwrap();
        for (y, h) in obs.samples.iter().zip(&channels) {
            assert!((y - h).norm() <= 1e-10 * h.norm());
        }
    }

    #[test]
    fn noise_variance_formula() {
        let mut rng = stream_rng(6, 0);
        let channels = vec![CVector::from_element(4, C64::new(1.0, 0.0))];
        let a = Measurement::identity(4);
        let obs = make_observations(&channels, &a, (10.0, 10.0), SnrConvention::Observed, Some(4.0), &mut rng).unwrap();
        assert!((obs.noise_vars[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn snr_round_trips() {
        let mut rng = stream_rng(8, 0);
        let channels: Vec<CVector> = (0..50)
            .map(|_| CVector::from_fn(10, |_, _| standard_complex_normal(&mut rng)))
            .collect();
        let a = random_selection_matrix(4, 10, &mut rng).unwrap();
        let obs = make_observations(&channels, &a, (5.0, 20.0), SnrConvention::Observed, None, &mut rng).unwrap();
        let per_entry = mean(channels.iter().map(|h| squared_norm(&a.apply(h)))) / 4.0;
        for (s, snr) in obs.noise_vars.iter().zip(&obs.snr_db) {
            assert!((implied_snr_db(per_entry, *s) - snr).abs() < 1e-9);
            assert!((5.0..=20.0).contains(snr));
        }
    }

    #[test]
    fn zero_energy_channels_are_degenerate() {
        let mut rng = stream_rng(8, 0);
        let channels = vec![CVector::zeros(3); 4];
        let err = make_observations(&channels, &Measurement::identity(3), (0.0, 20.0), SnrConvention::Channel, None, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::DegenerateInput(_)));
    }

    #[test]
    fn normalization_examples() {
        let n = 6;
        let h = vec![CVector::from_element(n, C64::new(1.0, 0.0)); 3];
        let (_, scale) = normalize_dataset(&h).unwrap();
        assert!((scale - 1.0).abs() < 1e-15);

        let h = vec![CVector::from_element(n, C64::new(2.0, 0.0)); 3];
        let (scaled, scale) = normalize_dataset(&h).unwrap();
        assert!((scale - 0.5).abs() < 1e-15);
        let energy = mean(scaled.iter().map(squared_norm));
        assert!((energy - n as f64).abs() < 1e-10);

        assert!(matches!(normalize_dataset(&[CVector::zeros(3)]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn cell_masses_sum_to_one_inside_grid() {
        let grid = AngleGrid::new(128).unwrap();
        let m = laplacian_cell_masses(20.0 * DEG, 2.0 * DEG, &grid);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let peak = grid.nearest_index(20.0 * DEG);
        assert_eq!(m.iter().cloned().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap().0, peak);
    }
}
