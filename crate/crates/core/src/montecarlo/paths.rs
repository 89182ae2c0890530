use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};

use crate::model::ModelParams;

use super::{HitOutcome, Outcome, PathOutcome};

/// Per-path random source: stream `index` of the ChaCha8 generator keyed by `seed`.
/// The mirrored copy returns `1 - u` and `-z`, giving the antithetic partner.
pub(crate) struct Draws {
    rng: ChaCha8Rng,
    mirror: bool,
}

impl Draws {
    pub(crate) fn new(seed: u64, index: u64, mirror: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self { rng, mirror }
    }

    pub(crate) fn uniform(&mut self) -> f64 {
        let u: f64 = self.rng.sample(Open01);
        if self.mirror {
            1.0 - u
        } else {
            u
        }
    }

    pub(crate) fn normal(&mut self) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        if self.mirror {
            -z
        } else {
            z
        }
    }

    fn exponential(&mut self, rate: f64) -> f64 {
        if rate > 0.0 {
            -self.uniform().ln() / rate
        } else {
            f64::INFINITY
        }
    }
}

/// Probability that a Brownian bridge with diffusion coefficient `2 d` over `dt`,
/// at distances `a` and `b` from a barrier at its ends, touches the barrier.
pub fn bridge_crossing_probability(a: f64, b: f64, d: f64, dt: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        1.0
    } else {
        (-a * b / (d * dt)).exp()
    }
}

/// First barrier touch inside `[t0, t0 + dt]` for a bridge known to touch it, located by
/// bisection: each midpoint is drawn from the bridge law conditioned on a touch, then the
/// half holding the first touch is kept.
fn refine(mut a: f64, mut b: f64, mut t0: f64, mut dt: f64, d: f64, tol: f64, rng: &mut Draws) -> f64 {
    while dt > tol {
        let half = 0.5 * dt;
        let sd = (0.5 * d * dt).sqrt();
        loop {
            let m = 0.5 * (a + b) + sd * rng.normal();
            let p1 = bridge_crossing_probability(a, m, d, half);
            let p2 = bridge_crossing_probability(m, b, d, half);
            let either = 1.0 - (1.0 - p1) * (1.0 - p2);
            if rng.uniform() < either {
                if rng.uniform() * either < p1 {
                    b = m;
                } else {
                    t0 += half;
                    a = m;
                }
                dt = half;
                break;
            }
        }
    }
    t0 + 0.5 * dt
}

/// Touch time of the barrier within one diffusion step, if any.
fn step_crossing(a: f64, b: f64, t0: f64, dt: f64, d: f64, tol: f64, rng: &mut Draws) -> Option<f64> {
    let p = bridge_crossing_probability(a, b, d, dt);
    if p >= 1.0 || (p > 0.0 && rng.uniform() < p) {
        Some(refine(a, b, t0, dt, d, tol, rng))
    } else {
        None
    }
}

pub(crate) fn ruin_path(model: &ModelParams, horizon: f64, tol: f64, rng: &mut Draws) -> PathOutcome {
    let (c, d, lambda) = (model.c(), model.diffusion(), model.lambda());
    let claims = model.claims();
    let mut t = 0.0;
    let mut x = model.u();
    let mut n = 0u32;
    loop {
        let gap = rng.exponential(lambda);
        let end = (t + gap).min(horizon);
        let dt = end - t;
        let y = x + c * dt + (2.0 * d * dt).sqrt() * rng.normal();
        if let Some(at) = step_crossing(x, y, t, dt, d, tol, rng) {
            return PathOutcome {
                outcome: Outcome::Oscillation,
                claims: n,
                time: at,
                surplus: 0.0,
            };
        }
        if t + gap >= horizon {
            return PathOutcome {
                outcome: Outcome::Censored,
                claims: n,
                time: horizon,
                surplus: y,
            };
        }
        t = end;
        n += 1;
        x = y - claims.sample_with(&mut || rng.uniform());
        if x < 0.0 {
            return PathOutcome {
                outcome: Outcome::Claim,
                claims: n,
                time: t,
                surplus: x,
            };
        }
    }
}

pub(crate) fn hitting_path(model: &ModelParams, level: f64, horizon: f64, tol: f64, rng: &mut Draws) -> HitOutcome {
    let (c, d, lambda) = (model.c(), model.diffusion(), model.lambda());
    let claims = model.claims();
    let mut t = 0.0;
    let mut x = model.u();
    let mut n = 0u32;
    loop {
        let gap = rng.exponential(lambda);
        let end = (t + gap).min(horizon);
        let dt = end - t;
        let y = x + c * dt + (2.0 * d * dt).sqrt() * rng.normal();
        if let Some(at) = step_crossing(level - x, level - y, t, dt, d, tol, rng) {
            return HitOutcome {
                hit: true,
                claims: n,
                time: at,
            };
        }
        if t + gap >= horizon {
            return HitOutcome {
                hit: false,
                claims: n,
                time: horizon,
            };
        }
        t = end;
        n += 1;
        x = y - claims.sample_with(&mut || rng.uniform());
    }
}

/// `(N(t), U(t))` of the process without ruin.
pub(crate) fn free_terminal(model: &ModelParams, t: f64, rng: &mut Draws) -> (u32, f64) {
    let claims = model.claims();
    let mut n = 0u32;
    let mut s = rng.exponential(model.lambda());
    let mut total = 0.0;
    while s <= t {
        n += 1;
        total += claims.sample_with(&mut || rng.uniform());
        s += rng.exponential(model.lambda());
    }
    let x = model.u() + model.c() * t + (2.0 * model.diffusion() * t).sqrt() * rng.normal() - total;
    (n, x)
}
