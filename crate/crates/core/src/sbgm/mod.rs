//! Sparse Bayesian generative model: prior, posterior, EM fitting.

mod elbo;
mod em;
mod kronecker;
mod model;
mod posterior;

pub use elbo::{csvae_elbo_terms, ElboBreakdown};
pub use em::{
    csgmm_e_step, csgmm_fit, csgmm_m_step, e_step_with, initial_model, total_log_likelihood, EStep, EmTrace, FitOptions,
    MStep, SufficientStats,
};
pub use kronecker::{
    component_objective, kronecker_m_step, kronecker_objective, update_freq_factor, update_time_factor, FactorPair,
    KRONECKER_SWEEPS,
};
pub use model::{SbgmModel, VarianceForm, Variances, DEFAULT_FLOOR};
pub use posterior::{
    effective_dictionary, marginal_cov, marginal_cov_factor, posterior_moments, posterior_moments_with, PosteriorMoments,
};
