//! Evaluation quantities for generated parameters and channels.

use serde::Serialize;

use crate::dictionary::AngleGrid;
use crate::error::{Error, Result};
use crate::linalg::{squared_norm, CVector};

/// Mean normalized power per grid point. Zero-norm samples are skipped and
/// counted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerProfile {
    pub profile: Vec<f64>,
    pub skipped: usize,
}

pub fn power_angular_profile(batch: &[CVector]) -> Result<PowerProfile> {
    let dim = batch.first().ok_or_else(|| Error::invalid("empty batch"))?.len();
    if batch.iter().any(|s| s.len() != dim) {
        return Err(Error::invalid("samples have differing lengths"));
    }
    let mut profile = vec![0.0; dim];
    let mut used = 0usize;
    for s in batch {
        let norm = squared_norm(s);
        if norm <= 0.0 {
            continue;
        }
        used += 1;
        for (p, z) in profile.iter_mut().zip(s.iter()) {
            *p += z.norm_sqr() / norm;
        }
    }
    if used == 0 {
        return Err(Error::DegenerateInput("every sample has zero norm".into()));
    }
    let total: f64 = profile.iter().sum();
    for p in profile.iter_mut() {
        *p /= total;
    }
    Ok(PowerProfile {
        profile,
        skipped: batch.len() - used,
    })
}

/// Power-weighted standard deviation of the grid angles, in radians.
pub fn angular_spread(s: &CVector, grid: &AngleGrid) -> Result<f64> {
    if s.len() != grid.size() {
        return Err(Error::invalid("vector length does not match the grid"));
    }
    let total = squared_norm(s);
    if total <= 0.0 {
        return Err(Error::DegenerateInput("zero vector has no angular spread".into()));
    }
    let mut mean = 0.0;
    let mut second = 0.0;
    for (g, z) in s.iter().enumerate() {
        let w = z.norm_sqr() / total;
        let t = grid.point(g);
        mean += w * t;
        second += w * t * t;
    }
    Ok((second - mean * mean).max(0.0).sqrt())
}

/// Spreads of all nonzero samples, plus the number skipped.
pub fn angular_spreads(batch: &[CVector], grid: &AngleGrid) -> Result<(Vec<f64>, usize)> {
    let mut spreads = Vec::with_capacity(batch.len());
    let mut skipped = 0;
    for s in batch {
        match angular_spread(s, grid) {
            Ok(v) => spreads.push(v),
            Err(Error::DegenerateInput(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    Ok((spreads, skipped))
}

fn check_pairs(estimates: &[CVector], truths: &[CVector]) -> Result<()> {
    if estimates.is_empty() || estimates.len() != truths.len() {
        return Err(Error::invalid("need equally many estimates and truths"));
    }
    if estimates.iter().zip(truths).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::invalid("estimate and truth dimensions differ"));
    }
    Ok(())
}

/// `mean_i ‖ĥ_i − h_i‖² / N`.
pub fn nmse(estimates: &[CVector], truths: &[CVector]) -> Result<f64> {
    check_pairs(estimates, truths)?;
    let sum: f64 = estimates
        .iter()
        .zip(truths)
        .map(|(e, t)| squared_norm(&(e - t)) / t.len() as f64)
        .sum();
    Ok(sum / estimates.len() as f64)
}

/// `mean_i |ĥ_i^H h_i| / (‖ĥ_i‖ ‖h_i‖)`.
pub fn cosine_similarity(estimates: &[CVector], truths: &[CVector]) -> Result<f64> {
    check_pairs(estimates, truths)?;
    let mut sum = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        let (ne, nt) = (e.norm(), t.norm());
        if ne == 0.0 || nt == 0.0 {
            return Err(Error::DegenerateInput("cosine similarity of a zero vector".into()));
        }
        sum += (e.dotc(t).norm() / (ne * nt)).min(1.0);
    }
    Ok(sum / estimates.len() as f64)
}

/// Fixed uniform binning on `[lo, hi]`; values outside are clamped into the
/// edge bins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || count == 0 {
            return Err(Error::invalid("bins need a finite range lo < hi and at least one bin"));
        }
        Ok(Self { lo, hi, count })
    }

    /// 64 bins on `[0, π/2]`.
    pub fn spread_default() -> Self {
        Self {
            lo: 0.0,
            hi: std::f64::consts::FRAC_PI_2,
            count: 64,
        }
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    pub fn index(&self, x: f64) -> usize {
        let i = ((x - self.lo) / self.width()).floor();
        if i.is_nan() || i < 0.0 {
            0
        } else {
            (i as usize).min(self.count - 1)
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.width()
    }

    /// Normalized histogram.
    pub fn histogram(&self, values: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.count];
        for &v in values {
            h[self.index(v)] += 1.0;
        }
        let n = values.len().max(1) as f64;
        h.iter_mut().for_each(|x| *x /= n);
        h
    }
}

/// 1-Wasserstein distance between the binned empirical distributions, each bin
/// represented by its center.
pub fn histogram_w1(a: &[f64], b: &[f64], bins: Bins) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("histogram inputs must be nonempty"));
    }
    let (ha, hb) = (bins.histogram(a), bins.histogram(b));
    let mut cdf = 0.0;
    let mut dist = 0.0;
    for i in 0..bins.count - 1 {
        cdf += ha[i] - hb[i];
        dist += cdf.abs();
    }
    Ok(dist * bins.width())
}

/// Profile mass outside the mask.
pub fn profile_support_leakage(profile: &[f64], support: &[bool]) -> Result<f64> {
    if profile.len() != support.len() {
        return Err(Error::invalid("profile and mask lengths differ"));
    }
    Ok(profile.iter().zip(support).filter(|(_, &m)| !m).map(|(p, _)| p).sum())
}
