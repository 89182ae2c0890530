//! The generalized Lundberg equation `D s^2 + c s - (lambda + delta) + lambda r p_hat(s) = 0`
//! and exponential bounds derived from the surplus Laplace exponent.

use serde::Serialize;

use crate::error::{domain, Result, RuinError};
use crate::model::ModelParams;

const MAX_ITERATIONS: usize = 500;

/// Unique positive root of the Lundberg equation for a given discount and claim weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LundbergRoot {
    pub delta: f64,
    pub r: f64,
    pub rho: f64,
    pub residual: f64,
    pub iterations: usize,
}

fn check_weights(r: f64, delta: f64) -> Result<()> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("lundberg", format!("r must lie in (0, 1], got {r}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("lundberg", format!("delta must be finite and > 0, got {delta}")));
    }
    Ok(())
}

fn f_unchecked(model: &ModelParams, r: f64, delta: f64, s: f64) -> f64 {
    let lambda = model.lambda();
    (model.diffusion() * s + model.c()) * s - (lambda + delta) + lambda * r * model.claims().laplace_extended(s)
}

fn f_prime_unchecked(model: &ModelParams, r: f64, s: f64) -> f64 {
    2.0 * model.diffusion() * s + model.c() + model.lambda() * r * model.claims().laplace_derivative(s)
}

pub fn lundberg_f(model: &ModelParams, r: f64, delta: f64, s: f64) -> Result<f64> {
    check_weights(r, delta)?;
    if !(s >= 0.0) {
        return Err(domain("lundberg_f", format!("s must be >= 0, got {s}")));
    }
    Ok(f_unchecked(model, r, delta, s))
}

pub fn lundberg_f_prime(model: &ModelParams, r: f64, delta: f64, s: f64) -> Result<f64> {
    check_weights(r, delta)?;
    if !(s >= 0.0) {
        return Err(domain("lundberg_f", format!("s must be >= 0, got {s}")));
    }
    Ok(f_prime_unchecked(model, r, s))
}

/// Residual tolerance used by [`solve_rho`].
pub fn root_tolerance(model: &ModelParams, delta: f64) -> f64 {
    1e-12 * (model.lambda() + delta).max(1.0)
}

/// Safeguarded Newton iteration on a doubling bracket.
pub fn solve_rho(model: &ModelParams, r: f64, delta: f64) -> Result<LundbergRoot> {
    check_weights(r, delta)?;
    let tol = root_tolerance(model, delta);
    let f = |s: f64| f_unchecked(model, r, delta, s);
    let mut lo = 0.0;
    let mut hi = (1.0f64).max((model.lambda() + delta) / model.c());
    let mut f_hi = f(hi);
    while f_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        f_hi = f(hi);
        if !hi.is_finite() {
            return Err(RuinError::NoConvergence {
                axis: "lundberg bracket".into(),
                error: f_hi,
                tolerance: tol,
            });
        }
    }
    let mut s = lo + 0.5 * (hi - lo);
    let mut best = (f64::INFINITY, s);
    for it in 1..=MAX_ITERATIONS {
        let v = f(s);
        if v.abs() < best.0 {
            best = (v.abs(), s);
        }
        if v.abs() <= tol {
            return Ok(LundbergRoot {
                delta,
                r,
                rho: s,
                residual: v.abs(),
                iterations: it,
            });
        }
        if v < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let d = f_prime_unchecked(model, r, s);
        let newton = s - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            lo + 0.5 * (hi - lo)
        };
        if next == s || hi - lo <= f64::EPSILON * hi {
            break;
        }
        s = next;
    }
    if best.0 <= tol {
        return Ok(LundbergRoot {
            delta,
            r,
            rho: best.1,
            residual: best.0,
            iterations: MAX_ITERATIONS,
        });
    }
    Err(RuinError::NoConvergence {
        axis: "lundberg root".into(),
        error: best.0,
        tolerance: tol,
    })
}

/// `ln E[exp(theta (U(t) - u))] / t = D theta^2 + c theta + lambda (p_hat(theta) - 1)`,
/// finite for `theta` above the claim transform abscissa.
pub fn laplace_exponent(model: &ModelParams, theta: f64) -> f64 {
    let d = model.diffusion();
    (d * theta + model.c()) * theta + model.lambda() * (model.claims().laplace_extended(theta) - 1.0)
}

/// Exponential decay bound from the surplus Laplace exponent.
///
/// With `theta < 0` minimizing the exponent and `kappa = -exponent(theta) > 0`,
/// `exp(theta (U(t) - u) + kappa t)` is a martingale, which gives
/// `P(S < T_u < inf) <= exp(theta u - kappa S)` for the ruin time and
/// `P(tau_x > S) <= exp(-theta x - kappa S)` for the first passage above `u + x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayBound {
    pub theta: f64,
    pub kappa: f64,
}

impl DecayBound {
    pub fn ruin_after(&self, u: f64, horizon: f64) -> f64 {
        (self.theta * u - self.kappa * horizon).exp()
    }

    pub fn passage_after(&self, x: f64, horizon: f64) -> f64 {
        (-self.theta * x - self.kappa * horizon).exp()
    }

    /// Smallest horizon `S` with `exp(-delta S) * bound(S) <= eps` for a passage
    /// over distance `x` (use `-u` for ruin from reserve `u`).
    pub fn horizon(&self, x: f64, delta: f64, eps: f64) -> f64 {
        ((1.0 / eps).ln() - self.theta * x).max(0.0) / (delta + self.kappa)
    }
}

pub fn decay_bound(model: &ModelParams) -> DecayBound {
    let abscissa = model.claims().laplace_abscissa();
    // the exponent is convex with slope c - lambda E[X] > 0 at zero; bisect on its slope
    let floor = if abscissa.is_finite() { abscissa * (1.0 - 1e-9) } else { -1e6 };
    let psi = |t: f64| laplace_exponent(model, t);
    let mut left = floor;
    while !psi(left).is_finite() {
        left *= 0.5;
    }
    let slope = |t: f64| {
        2.0 * model.diffusion() * t + model.c() + model.lambda() * model.claims().laplace_derivative(t)
    };
    let (mut a, mut b) = (left, 0.0);
    if slope(a) < 0.0 {
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid == a || mid == b {
                break;
            }
            if slope(mid) < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
        }
    } else {
        b = a;
    }
    let theta = 0.5 * (a + b);
    DecayBound {
        theta,
        kappa: -psi(theta),
    }
}
