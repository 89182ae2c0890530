//! Model parameters and claim-size distributions.

pub(crate) mod claims;
mod tabulated;

pub use claims::{ClaimDistribution, ClaimKind};
pub use tabulated::TabulatedDensity;

use crate::error::{invalid, Result, RuinError};

/// Parameters of the surplus process `U(t) = u + c t - sum X_i + sigma B(t)`.
///
/// Construction enforces `sigma > 0` and the net profit condition
/// `c > lambda * E[X]`; the diffusion coefficient `D = sigma^2 / 2` is derived.
#[derive(Debug, Clone)]
pub struct ModelParams {
    u: f64,
    c: f64,
    lambda: f64,
    sigma: f64,
    d: f64,
    claims: ClaimDistribution,
}

impl ModelParams {
    pub fn new(u: f64, c: f64, lambda: f64, sigma: f64, claims: ClaimDistribution) -> Result<Self> {
        let check = |name: &'static str, v: f64, allow_zero: bool| {
            if !v.is_finite() {
                return Err(invalid(name, format!("must be finite, got {v}")));
            }
            if v < 0.0 || (!allow_zero && v == 0.0) {
                let op = if allow_zero { ">= 0" } else { "> 0" };
                return Err(invalid(name, format!("must be {op}, got {v}")));
            }
            Ok(())
        };
        check("u", u, true)?;
        check("c", c, false)?;
        check("lambda", lambda, false)?;
        check("sigma", sigma, false)?;
        let loading = lambda * claims.mean();
        if c <= loading {
            return Err(RuinError::NetProfitViolation { c, loading });
        }
        Ok(Self {
            u,
            c,
            lambda,
            sigma,
            d: 0.5 * sigma * sigma,
            claims,
        })
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `D = sigma^2 / 2`.
    pub fn diffusion(&self) -> f64 {
        self.d
    }

    pub fn claims(&self) -> &ClaimDistribution {
        &self.claims
    }

    /// Mean growth rate of the surplus, `c - lambda E[X]` (positive by construction).
    pub fn drift(&self) -> f64 {
        self.c - self.lambda * self.claims.mean()
    }

    /// Same model with a different initial reserve.
    pub fn with_reserve(&self, u: f64) -> Result<Self> {
        Self::new(u, self.c, self.lambda, self.sigma, self.claims.clone())
    }
}
