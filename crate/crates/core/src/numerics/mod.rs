//! Deterministic numerics: counter-based RNG, special functions, CDFs,
//! symmetric-matrix square roots, and elementary distribution samplers.

pub mod cdf;
pub mod linalg;
pub mod prng;
pub mod samplers;
pub mod special;

pub use cdf::{binomial_cdf, chi2_cdf, normal_cdf, normal_quantile};
pub use linalg::{sym_sqrt, SymSqrtKind};
pub use prng::RngState;
pub use samplers::{
    sample_chi2, sample_dirichlet, sample_gamma, sample_poisson, sample_std_normal,
};
pub use special::{
    digamma, log_gamma, multivariate_digamma, multivariate_log_gamma, reg_inc_beta,
    reg_inc_gamma_lower, trigamma,
};
