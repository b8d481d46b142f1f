//! Parameter grids and steering-vector dictionaries.
//!
//! A dictionary maps a coefficient vector indexed by grid points to a channel
//! vector: `h = D s`. Two domains are supported:
//!
//! * angular (SIMO, half-wavelength ULA): grid points `g·π/S` for
//!   `g = -S/2 .. S/2-1`, columns `a(θ)_i = exp(-jπ i sin θ)`;
//! * delay-Doppler (OFDM): `D = D_t ⊗ D_f`, Doppler points `i·2ϑ̄/S_t` for
//!   `i = -S_t/2 .. S_t/2-1` and delay points `j·τ̄/S_f` for `j = 0 .. S_f-1`.
//!
//! OFDM channels are vectorized frequency-fastest: for an `N_f × N_sym`
//! channel matrix `H`, `h[t·N_f + f] = H[f, t]`. Coefficients follow the same
//! convention, `s[q·S_f + p]` is Doppler point `q` and delay point `p`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, CMatrix, CVector, C64};

/// Upper bound on `rows × cols` of a materialized dictionary.
pub const MAX_DICTIONARY_ELEMENTS: usize = 1 << 26;

/// Uniform angle grid over `[-π/2, π/2)`; only the size is stored, points are
/// derived on demand so that grid equality is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    size: usize,
}

impl AngleGrid {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 || !size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "angle grid size must be a positive even integer, got {size}"
            )));
        }
        Ok(Self { size })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn spacing(&self) -> f64 {
        PI / self.size as f64
    }

    /// Angle of grid index `idx` (0-based), in radians.
    pub fn point(&self, idx: usize) -> f64 {
        (idx as i64 - (self.size / 2) as i64) as f64 * PI / self.size as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.size).map(|i| self.point(i)).collect()
    }

    /// Index of the grid point nearest to `angle`, clamped to the grid.
    pub fn nearest_index(&self, angle: f64) -> usize {
        let raw = (angle / self.spacing()).round() as i64 + (self.size / 2) as i64;
        raw.clamp(0, self.size as i64 - 1) as usize
    }
}

/// Doppler × delay grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayDopplerGrid {
    doppler_size: usize,
    delay_size: usize,
    /// ϑ̄ in Hz.
    max_doppler: f64,
    /// τ̄ in seconds.
    max_delay: f64,
}

impl DelayDopplerGrid {
    pub fn new(doppler_size: usize, delay_size: usize, max_doppler: f64, max_delay: f64) -> Result<Self> {
        if doppler_size == 0 || !doppler_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "Doppler grid size must be a positive even integer, got {doppler_size}"
            )));
        }
        if delay_size == 0 {
            return Err(Error::invalid("delay grid size must be positive"));
        }
        if !(max_doppler.is_finite() && max_doppler > 0.0 && max_delay.is_finite() && max_delay > 0.0) {
            return Err(Error::invalid("Doppler and delay bounds must be finite and positive"));
        }
        Ok(Self {
            doppler_size,
            delay_size,
            max_doppler,
            max_delay,
        })
    }

    pub fn doppler_size(&self) -> usize {
        self.doppler_size
    }

    pub fn delay_size(&self) -> usize {
        self.delay_size
    }

    pub fn max_doppler(&self) -> f64 {
        self.max_doppler
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }

    pub fn size(&self) -> usize {
        self.doppler_size * self.delay_size
    }

    pub fn doppler_point(&self, q: usize) -> f64 {
        (q as i64 - (self.doppler_size / 2) as i64) as f64 * 2.0 * self.max_doppler / self.doppler_size as f64
    }

    pub fn delay_point(&self, p: usize) -> f64 {
        p as f64 * self.max_delay / self.delay_size as f64
    }

    pub fn doppler_points(&self) -> Vec<f64> {
        (0..self.doppler_size).map(|q| self.doppler_point(q)).collect()
    }

    pub fn delay_points(&self) -> Vec<f64> {
        (0..self.delay_size).map(|p| self.delay_point(p)).collect()
    }

    /// Flat coefficient index of (Doppler `q`, delay `p`).
    pub fn flat_index(&self, q: usize, p: usize) -> usize {
        q * self.delay_size + p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "domain", rename_all = "snake_case")]
pub enum Grid {
    Angle(AngleGrid),
    DelayDoppler(DelayDopplerGrid),
}

impl Grid {
    pub fn size(&self) -> usize {
        match self {
            Grid::Angle(g) => g.size(),
            Grid::DelayDoppler(g) => g.size(),
        }
    }

    pub fn domain(&self) -> &'static str {
        match self {
            Grid::Angle(_) => "angular",
            Grid::DelayDoppler(_) => "delay-Doppler",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SystemConfig {
    Simo {
        antennas: usize,
    },
    Ofdm {
        subcarriers: usize,
        symbols: usize,
        /// Δf in Hz.
        subcarrier_spacing: f64,
        /// ΔT in seconds.
        symbol_duration: f64,
    },
}

impl SystemConfig {
    pub fn simo(antennas: usize) -> Self {
        SystemConfig::Simo { antennas }
    }

    pub fn ofdm(subcarriers: usize, symbols: usize, subcarrier_spacing: f64, symbol_duration: f64) -> Self {
        SystemConfig::Ofdm {
            subcarriers,
            symbols,
            subcarrier_spacing,
            symbol_duration,
        }
    }

    /// 24 subcarriers at 15 kHz, 14 symbols of 1/14 ms.
    pub fn ofdm_5g() -> Self {
        Self::ofdm(24, 14, 15e3, 1e-3 / 14.0)
    }

    /// 20 subcarriers at 60 kHz, 18 symbols of 1/3.5 ms.
    pub fn ofdm_large() -> Self {
        Self::ofdm(20, 18, 60e3, 1e-3 / 3.5)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SystemConfig::Simo { antennas: 0 } => Err(Error::invalid("antenna count must be ≥ 1")),
            SystemConfig::Simo { .. } => Ok(()),
            SystemConfig::Ofdm {
                subcarriers,
                symbols,
                subcarrier_spacing,
                symbol_duration,
            } => {
                if subcarriers == 0 || symbols == 0 {
                    return Err(Error::invalid("subcarrier and symbol counts must be ≥ 1"));
                }
                if !(subcarrier_spacing.is_finite() && subcarrier_spacing > 0.0) {
                    return Err(Error::invalid("subcarrier spacing must be positive"));
                }
                if !(symbol_duration.is_finite() && symbol_duration > 0.0) {
                    return Err(Error::invalid("symbol duration must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Length of the vectorized channel.
    pub fn channel_dim(&self) -> usize {
        match *self {
            SystemConfig::Simo { antennas } => antennas,
            SystemConfig::Ofdm { subcarriers, symbols, .. } => subcarriers * symbols,
        }
    }

    fn domain(&self) -> &'static str {
        match self {
            SystemConfig::Simo { .. } => "angular",
            SystemConfig::Ofdm { .. } => "delay-Doppler",
        }
    }
}

/// `exp(-jπ i sin θ)` for `i = 0 .. n-1`.
pub fn steering_vector_ula(theta: f64, n_antennas: usize) -> Result<CVector> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("steering angle must be finite, got {theta}")));
    }
    if n_antennas == 0 {
        return Err(Error::invalid("antenna count must be ≥ 1"));
    }
    let s = theta.sin();
    Ok(CVector::from_fn(n_antennas, |i, _| C64::cis(-PI * i as f64 * s)))
}

/// Temporal steering vector `exp(+j2π ϑ i ΔT)`.
pub fn doppler_steering(doppler: f64, symbols: usize, symbol_duration: f64) -> CVector {
    CVector::from_fn(symbols, |i, _| C64::cis(2.0 * PI * doppler * i as f64 * symbol_duration))
}

/// Spectral steering vector `exp(-j2π τ j Δf)`.
pub fn delay_steering(delay: f64, subcarriers: usize, subcarrier_spacing: f64) -> CVector {
    CVector::from_fn(subcarriers, |j, _| C64::cis(-2.0 * PI * delay * j as f64 * subcarrier_spacing))
}

/// The two OFDM factors; the full dictionary is `time ⊗ freq`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFactors {
    /// `D_t`, `N_sym × S_t`.
    pub time: CMatrix,
    /// `D_f`, `N_f × S_f`.
    pub freq: CMatrix,
}

/// Dense dictionary together with the grid labelling its columns and the
/// system configuration labelling its rows. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: CMatrix,
    grid: Grid,
    config: SystemConfig,
    factors: Option<OfdmFactors>,
}

impl Dictionary {
    pub fn build(grid: Grid, config: SystemConfig) -> Result<Self> {
        match grid {
            Grid::Angle(g) => build_simo_dictionary(g, config),
            Grid::DelayDoppler(g) => build_ofdm_dictionary(g, config),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn config(&self) -> &SystemConfig {
        &self.config
    }

    pub fn factors(&self) -> Option<&OfdmFactors> {
        self.factors.as_ref()
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    /// Re-evaluates the steering vectors for `new_config` over the same grid.
    pub fn swap_system_config(&self, new_config: SystemConfig) -> Result<Self> {
        if self.config.domain() != new_config.domain() {
            return Err(Error::DomainMismatch(format!(
                "cannot swap a {} dictionary to a {} system configuration",
                self.config.domain(),
                new_config.domain()
            )));
        }
        Self::build(self.grid, new_config)
    }

    /// `h = D s`.
    pub fn apply(&self, coefficients: &CVector) -> Result<CVector> {
        if coefficients.len() != self.cols() {
            return Err(Error::invalid(format!(
                "coefficient length {} does not match dictionary width {}",
                coefficients.len(),
                self.cols()
            )));
        }
        Ok(&self.matrix * coefficients)
    }
}

fn check_capacity(rows: usize, cols: usize) -> Result<()> {
    match rows.checked_mul(cols) {
        Some(n) if n <= MAX_DICTIONARY_ELEMENTS => Ok(()),
        _ => Err(Error::Capacity(format!(
            "{rows}×{cols} dictionary exceeds the {MAX_DICTIONARY_ELEMENTS}-element limit"
        ))),
    }
}

pub fn build_simo_dictionary(grid: AngleGrid, config: SystemConfig) -> Result<Dictionary> {
    config.validate()?;
    let SystemConfig::Simo { antennas } = config else {
        return Err(Error::DomainMismatch(format!(
            "angular grid requires a SIMO configuration, got {}",
            config.domain()
        )));
    };
    check_capacity(antennas, grid.size())?;
    let sines: Vec<f64> = grid.points().iter().map(|t| t.sin()).collect();
    let matrix = CMatrix::from_fn(antennas, grid.size(), |i, g| C64::cis(-PI * i as f64 * sines[g]));
    Ok(Dictionary {
        matrix,
        grid: Grid::Angle(grid),
        config,
        factors: None,
    })
}

pub fn build_ofdm_dictionary(grid: DelayDopplerGrid, config: SystemConfig) -> Result<Dictionary> {
    config.validate()?;
    let SystemConfig::Ofdm {
        subcarriers,
        symbols,
        subcarrier_spacing,
        symbol_duration,
    } = config
    else {
        return Err(Error::DomainMismatch(format!(
            "delay-Doppler grid requires an OFDM configuration, got {}",
            config.domain()
        )));
    };
    grid.doppler_size
        .checked_mul(grid.delay_size)
        .filter(|&s| s <= MAX_DICTIONARY_ELEMENTS)
        .ok_or_else(|| Error::Capacity("delay-Doppler grid too large".into()))?;
    check_capacity(subcarriers * symbols, grid.size())?;

    let time = CMatrix::from_fn(symbols, grid.doppler_size, |i, q| {
        C64::cis(2.0 * PI * grid.doppler_point(q) * i as f64 * symbol_duration)
    });
    let freq = CMatrix::from_fn(subcarriers, grid.delay_size, |j, p| {
        C64::cis(-2.0 * PI * grid.delay_point(p) * j as f64 * subcarrier_spacing)
    });
    let matrix = kron(&time, &freq);
    Ok(Dictionary {
        matrix,
        grid: Grid::DelayDoppler(grid),
        config,
        factors: Some(OfdmFactors { time, freq }),
    })
}

/// Vectorizes an `N_f × N_sym` OFDM channel matrix frequency-fastest.
pub fn vectorize_ofdm(h: &CMatrix) -> CVector {
    CVector::from_column_slice(h.as_slice())
}

/// Inverse of [`vectorize_ofdm`].
pub fn unvectorize_ofdm(h: &CVector, subcarriers: usize, symbols: usize) -> Result<CMatrix> {
    if h.len() != subcarriers * symbols {
        return Err(Error::invalid("channel length does not match the OFDM grid"));
    }
    Ok(CMatrix::from_column_slice(subcarriers, symbols, h.as_slice()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, toeplitz_deviation, weighted_gram};

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn steering_examples() {
        let v = steering_vector_ula(0.0, 4).unwrap();
        assert!(v.iter().all(|z| close(*z, C64::new(1.0, 0.0), 1e-15)));

        let v = steering_vector_ula(PI / 2.0, 2).unwrap();
        assert!(close(v[0], C64::new(1.0, 0.0), 0.0));
        assert!(close(v[1], C64::new(-1.0, 0.0), 1e-15));

        let v = steering_vector_ula(PI / 6.0, 3).unwrap();
        let want = [C64::new(1.0, 0.0), C64::new(0.0, -1.0), C64::new(-1.0, 0.0)];
        for (a, b) in v.iter().zip(want) {
            assert!(close(*a, b, 1e-15), "{a} vs {b}");
        }
    }

    #[test]
    fn steering_rejects_non_finite() {
        assert!(matches!(steering_vector_ula(f64::NAN, 4), Err(Error::InvalidArgument(_))));
        assert!(matches!(steering_vector_ula(f64::INFINITY, 4), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn angle_grid_layout() {
        let g = AngleGrid::new(8).unwrap();
        let pts = g.points();
        assert_eq!(pts[0], -PI / 2.0);
        assert!((pts[7] - (PI / 2.0 - PI / 8.0)).abs() < 1e-15);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(g.point(4), 0.0);
        assert!(AngleGrid::new(7).is_err());
        assert!(AngleGrid::new(0).is_err());
    }

    #[test]
    fn delay_doppler_grid_layout() {
        let g = DelayDopplerGrid::new(4, 3, 250.0, 6e-6).unwrap();
        assert_eq!(g.doppler_points(), vec![-250.0, -125.0, 0.0, 125.0]);
        assert_eq!(g.delay_point(0), 0.0);
        assert!((g.delay_point(2) - 4e-6).abs() < 1e-20);
    }

    #[test]
    fn simo_dictionary_shapes_and_columns() {
        let d = build_simo_dictionary(AngleGrid::new(256).unwrap(), SystemConfig::simo(16)).unwrap();
        assert_eq!((d.rows(), d.cols()), (16, 256));

        let d = build_simo_dictionary(AngleGrid::new(2).unwrap(), SystemConfig::simo(1)).unwrap();
        assert!(d.matrix().iter().all(|z| *z == C64::new(1.0, 0.0)));

        let d = build_simo_dictionary(AngleGrid::new(4).unwrap(), SystemConfig::simo(2)).unwrap();
        // grid point 0 sits at index S/2
        assert!(d.matrix().column(2).iter().all(|z| *z == C64::new(1.0, 0.0)));

        let grid = AngleGrid::new(32).unwrap();
        let d = build_simo_dictionary(grid, SystemConfig::simo(5)).unwrap();
        for g in 0..32 {
            let a = steering_vector_ula(grid.point(g), 5).unwrap();
            assert!((d.matrix().column(g) - a).camax() < 1e-15);
        }
    }

    #[test]
    fn ofdm_dictionary_paper_dimensions() {
        let grid = DelayDopplerGrid::new(40, 40, 250.0, 6e-6).unwrap();
        let d = build_ofdm_dictionary(grid, SystemConfig::ofdm_5g()).unwrap();
        assert_eq!((d.rows(), d.cols()), (336, 1600));
        // Doppler index S_t/2 is zero Doppler, delay index 0 is zero delay
        let col = d.matrix().column(grid.flat_index(20, 0));
        assert!(col.iter().all(|z| *z == C64::new(1.0, 0.0)));
    }

    #[test]
    fn ofdm_dictionary_matches_double_sum() {
        // 2×2 grid, 2 subcarriers, 2 symbols; each column is vec(a_f a_t^T)
        let grid = DelayDopplerGrid::new(2, 2, 500.0, 4e-6).unwrap();
        let (df, dt) = (15e3, 1e-3 / 14.0);
        let d = build_ofdm_dictionary(grid, SystemConfig::ofdm(2, 2, df, dt)).unwrap();
        for q in 0..2 {
            for p in 0..2 {
                let (nu, tau) = (grid.doppler_point(q), grid.delay_point(p));
                for t in 0..2 {
                    for f in 0..2 {
                        let expected = C64::cis(2.0 * PI * nu * t as f64 * dt) * C64::cis(-2.0 * PI * tau * f as f64 * df);
                        let got = d.matrix()[(t * 2 + f, grid.flat_index(q, p))];
                        assert!(close(got, expected, 1e-14));
                    }
                }
            }
        }
    }

    #[test]
    fn ofdm_matrix_is_kron_of_factors_and_unit_modulus() {
        let grid = DelayDopplerGrid::new(6, 5, 300.0, 5e-6).unwrap();
        let d = build_ofdm_dictionary(grid, SystemConfig::ofdm(4, 3, 15e3, 1e-3 / 14.0)).unwrap();
        let f = d.factors().unwrap();
        assert!(max_abs(&(kron(&f.time, &f.freq) - d.matrix())) <= 1e-12);
        assert!(d.matrix().iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn ofdm_capacity_error() {
        let grid = DelayDopplerGrid::new(1 << 14, 1 << 14, 1.0, 1.0).unwrap();
        let err = build_ofdm_dictionary(grid, SystemConfig::ofdm(2, 2, 1.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::Capacity(_)));
    }

    #[test]
    fn swap_examples() {
        let grid = DelayDopplerGrid::new(40, 40, 250.0, 6e-6).unwrap();
        let d = build_ofdm_dictionary(grid, SystemConfig::ofdm_5g()).unwrap();
        let swapped = d.swap_system_config(SystemConfig::ofdm_large()).unwrap();
        assert_eq!((swapped.rows(), swapped.cols()), (360, 1600));
        assert_eq!(swapped.grid(), d.grid());
        let back = swapped.swap_system_config(SystemConfig::ofdm_5g()).unwrap();
        assert!(max_abs(&(back.matrix() - d.matrix())) <= 1e-12);

        let same = d.swap_system_config(SystemConfig::ofdm_5g()).unwrap();
        assert!(max_abs(&(same.matrix() - d.matrix())) <= 1e-12);

        let simo = build_simo_dictionary(AngleGrid::new(64).unwrap(), SystemConfig::simo(16)).unwrap();
        let big = simo.swap_system_config(SystemConfig::simo(32)).unwrap();
        assert!(max_abs(&(big.matrix().rows(0, 16).into_owned() - simo.matrix())) <= 1e-12);

        assert!(matches!(
            simo.swap_system_config(SystemConfig::ofdm_5g()),
            Err(Error::DomainMismatch(_))
        ));
        assert!(matches!(
            build_simo_dictionary(AngleGrid::new(4).unwrap(), SystemConfig::ofdm_5g()),
            Err(Error::DomainMismatch(_))
        ));
    }

    #[test]
    fn vectorization_round_trip_matches_kron_order() {
        let h = CMatrix::from_fn(3, 2, |f, t| C64::new(f as f64, t as f64));
        let v = vectorize_ofdm(&h);
        assert_eq!(v[3 + 2], h[(2, 1)]);
        assert_eq!(unvectorize_ofdm(&v, 3, 2).unwrap(), h);
    }

    #[test]
    fn simo_conditional_covariance_is_toeplitz() {
        let d = build_simo_dictionary(AngleGrid::new(64).unwrap(), SystemConfig::simo(12)).unwrap();
        let gamma: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 / 7.0).collect();
        let c = weighted_gram(d.matrix(), &gamma);
        assert!(toeplitz_deviation(&c) < 1e-10);
    }
}
