//! Quadrature engine, special functions and series truncation shared by the
//! analytic modules.

pub mod quadrature;
pub mod series;
pub mod special;

pub use quadrature::{
    integrate, integrate_nested, integrate_points, integrate_semi_infinite, integrate_vec,
    integrate_vec_sqrt_both, integrate_vec_sqrt_left, integrate_vec_sqrt_right, Decay, Estimate,
    QuadratureSpec, VecEstimate,
};
pub use series::{claim_count_tail_bound, poisson_series_truncation};
