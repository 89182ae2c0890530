#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernels;
pub mod lundberg;
pub mod model;
pub mod montecarlo;
pub mod numerics;
pub mod preruin;
pub mod ruin_density;

pub use error::{Result, RuinError};
pub use lundberg::{decay_bound, solve_rho, DecayBound, LundbergRoot};
pub use model::{ClaimDistribution, ClaimKind, ModelParams, TabulatedDensity};
pub use numerics::QuadratureSpec;
