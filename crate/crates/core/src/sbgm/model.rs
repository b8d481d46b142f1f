use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::kron_vec;

/// Lower clip applied to variances after every M-step.
pub const DEFAULT_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    Full,
    Kronecker,
}

/// Per-component prior variances.
#[derive(Debug, Clone, PartialEq)]
pub enum Variances {
    /// `K` vectors of length `S`.
    Full(Vec<Vec<f64>>),
    /// `γ_k = γ_k^(t) ⊗ γ_k^(f)` with Doppler factors of length `S_t` and
    /// delay factors of length `S_f`.
    Kronecker { time: Vec<Vec<f64>>, freq: Vec<Vec<f64>> },
}

/// Sparse Bayesian Gaussian mixture: `s | k ~ N_C(0, diag(γ_k))`, `k ~ ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbgmModel {
    weights: Vec<f64>,
    variances: Variances,
    floor: f64,
}

impl SbgmModel {
    pub fn full(weights: Vec<f64>, gammas: Vec<Vec<f64>>, floor: f64) -> Result<Self> {
        let model = Self {
            weights,
            variances: Variances::Full(gammas),
            floor,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn kronecker(weights: Vec<f64>, time: Vec<Vec<f64>>, freq: Vec<Vec<f64>>, floor: f64) -> Result<Self> {
        let model = Self {
            weights,
            variances: Variances::Kronecker { time, freq },
            floor,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 {
            return Err(Error::invalid("model needs at least one component"));
        }
        if !(self.floor >= 0.0 && self.floor.is_finite()) {
            return Err(Error::invalid("variance floor must be nonnegative"));
        }
        if self.weights.iter().any(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::invalid("mixture weights must lie in [0, 1]"));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        let check = |sets: &[Vec<f64>], what: &str| -> Result<()> {
            if sets.len() != k {
                return Err(Error::invalid(format!("expected {k} {what} vectors, got {}", sets.len())));
            }
            let len = sets[0].len();
            if len == 0 || sets.iter().any(|g| g.len() != len) {
                return Err(Error::invalid(format!("{what} vectors must share a nonzero length")));
            }
            if sets.iter().flatten().any(|&g| !(g >= self.floor && g.is_finite())) {
                return Err(Error::invalid(format!("{what} entries must be finite and ≥ the floor {}", self.floor)));
            }
            Ok(())
        };
        match &self.variances {
            Variances::Full(g) => check(g, "variance"),
            Variances::Kronecker { time, freq } => {
                check(time, "Doppler variance")?;
                check(freq, "delay variance")
            }
        }
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn variances(&self) -> &Variances {
        &self.variances
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn form(&self) -> VarianceForm {
        match self.variances {
            Variances::Full(_) => VarianceForm::Full,
            Variances::Kronecker { .. } => VarianceForm::Kronecker,
        }
    }

    /// Length of each (expanded) variance vector.
    pub fn sparse_dim(&self) -> usize {
        match &self.variances {
            Variances::Full(g) => g[0].len(),
            Variances::Kronecker { time, freq } => time[0].len() * freq[0].len(),
        }
    }

    /// `(S_t, S_f)` for the Kronecker form.
    pub fn kronecker_dims(&self) -> Option<(usize, usize)> {
        match &self.variances {
            Variances::Full(_) => None,
            Variances::Kronecker { time, freq } => Some((time[0].len(), freq[0].len())),
        }
    }

    /// Expanded variance vector of component `k`.
    pub fn gamma(&self, k: usize) -> Vec<f64> {
        match &self.variances {
            Variances::Full(g) => g[k].clone(),
            Variances::Kronecker { time, freq } => kron_vec(&time[k], &freq[k]),
        }
    }

    pub fn gammas(&self) -> Vec<Vec<f64>> {
        (0..self.components()).map(|k| self.gamma(k)).collect()
    }
}
