//! Shared fixtures for the criterion benchmarks.

use ruin_core::{ClaimDistribution, ModelParams, QuadratureSpec};

/// u = 1, c = 2, lambda = 1, sigma = 1, Exp(1) claims.
pub fn desk_model() -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, 1.0, ClaimDistribution::exponential(1.0).expect("valid rate"))
        .expect("valid model")
}

pub fn default_spec() -> QuadratureSpec {
    QuadratureSpec::default()
}
