//! Joint densities of the ruin time and the number of claims until ruin, split by
//! cause, their time integrals, and the joint transform `E[r^N e^{-delta T}; T < inf]`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::kernels::Kernel;
use crate::lundberg::{decay_bound, solve_rho, DecayBound};
use crate::model::ModelParams;
use crate::numerics::special::{ln_norm_cdf, upper_quantile};
use crate::numerics::{integrate_vec, integrate_vec_sqrt_both, integrate_vec_sqrt_left, Estimate, QuadratureSpec, VecEstimate};
use crate::preruin::{clamp_density, count_cutoff, surplus_breaks, surplus_cutoff, PreRuin};

/// How ruin happened: a claim jumping below zero or the diffusion reaching zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuinCause {
    Claim,
    Oscillation,
    Total,
}

impl std::str::FromStr for RuinCause {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "claim" => Ok(Self::Claim),
            "oscillation" => Ok(Self::Oscillation),
            "total" => Ok(Self::Total),
            other => Err(format!("unknown cause `{other}` (claim|oscillation|total)")),
        }
    }
}

/// `omega(n, t)` split by cause.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinDensityPoint {
    pub n: usize,
    pub t: f64,
    pub omega_s: f64,
    pub omega_d: f64,
    pub omega: f64,
    pub error: f64,
}

/// Ruin probability split by cause, with a combined error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinProbability {
    pub claim: f64,
    pub oscillation: f64,
    pub total: f64,
    pub error: f64,
}

fn reserve(model: &ModelParams) -> Result<f64> {
    let u = model.u();
    if u > 0.0 {
        Ok(u)
    } else {
        Err(domain("ruin_density", "the initial reserve must be > 0"))
    }
}

fn check_t(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain("ruin_density", format!("t must be finite and > 0, got {t}")))
    }
}

/// `c' = sqrt(c^2 + 4 D (lambda + delta))`.
fn killed_speed(model: &ModelParams, delta: f64) -> f64 {
    let c = model.c();
    (c * c + 4.0 * model.diffusion() * (model.lambda() + delta)).sqrt()
}

/// Decay rate of the discounted claim-free first passage: `E[e^{-(lambda+delta) tau_w}] = e^{-w rate}`.
fn passage_rate(model: &ModelParams, delta: f64) -> f64 {
    (model.c() + killed_speed(model, delta)) / (2.0 * model.diffusion())
}

/// `ln` of the density of reaching zero from `w` at time `s` before any claim:
/// `w / sqrt(4 pi D s^3) exp(-lambda s - (w + c s)^2 / (4 D s))`.
fn ln_passage_density(model: &ModelParams, s: f64, w: f64) -> f64 {
    let d = model.diffusion();
    let z = w + model.c() * s;
    w.ln() - 0.5 * (4.0 * std::f64::consts::PI * d * s * s * s).ln() - model.lambda() * s - z * z / (4.0 * d * s)
}

/// Probability of reaching zero from `w >= 0` by time `horizon` before any claim.
pub(crate) fn claim_free_passage_cdf(model: &ModelParams, horizon: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 1.0;
    }
    let d = model.diffusion();
    let c = model.c();
    let cp = killed_speed(model, 0.0);
    if !horizon.is_finite() {
        return (-w * (c + cp) / (2.0 * d)).exp();
    }
    let sd = (2.0 * d * horizon).sqrt();
    let a = w * (cp - c) / (2.0 * d) + ln_norm_cdf(-(w + cp * horizon) / sd);
    let b = -w * (c + cp) / (2.0 * d) + ln_norm_cdf((cp * horizon - w) / sd);
    a.exp() + b.exp()
}

/// Density of ruin by oscillation before the first claim, at time `t`.
pub fn omega_d_zero(model: &ModelParams, t: f64) -> Result<f64> {
    Ok(log_omega_d_zero(model, t)?.exp())
}

pub fn log_omega_d_zero(model: &ModelParams, t: f64) -> Result<f64> {
    let u = reserve(model)?;
    check_t(t)?;
    Ok(ln_passage_density(model, t, u))
}

/// `int_0^inf omega_d(0, t) dt = exp(-u (c + sqrt(c^2 + 4 D lambda)) / (2 D))`.
pub fn omega_d_zero_mass(model: &ModelParams) -> f64 {
    (-model.u() * passage_rate(model, 0.0)).exp()
}

/// Convolution kernels that turn the pre-ruin density into ruin densities.
struct Kernels<'a> {
    model: &'a ModelParams,
    spec: QuadratureSpec,
    k: f64,
}

impl<'a> Kernels<'a> {
    fn new(model: &'a ModelParams, spec: &QuadratureSpec) -> Self {
        Self {
            model,
            spec: *spec,
            k: upper_quantile(spec.x_cutoff_mass),
        }
    }

    fn integrate_w(&self, mut f: impl FnMut(f64) -> f64, top: f64, breaks: &[f64]) -> Result<Estimate> {
        if !(top > 0.0) {
            return Ok(Estimate { value: 0.0, error: 0.0 });
        }
        let mut pts = vec![0.0];
        pts.extend(breaks.iter().copied().filter(|b| *b > 0.0 && *b < top));
        pts.push(top);
        pts.sort_by(f64::total_cmp);
        let est = integrate_vec(
            |w, v, _| {
                v[0] = f(w);
                Ok(())
            },
            &pts,
            1,
            &self.spec,
            "claim convolution",
        )?;
        Ok(est.get(0))
    }

    /// Upper bound of [`Self::oscillation_after_claim`] over `y`.
    fn oscillation_bound(&self, s: f64) -> f64 {
        let d = self.model.diffusion();
        self.model.claims().density_bound() * (d / (std::f64::consts::PI * s)).sqrt() * (-self.model.lambda() * s).exp()
    }

    /// `int_0^y p(y - w) k_s(w) dw`: density of ruin by oscillation at time `s` after a
    /// claim that left surplus distributed as `p(y - .)`.
    fn oscillation_after_claim(&self, s: f64, y: f64) -> Result<Estimate> {
        let m = self.model;
        let d = m.diffusion();
        let sd = (2.0 * d * s).sqrt();
        let q = (1.0 / self.spec.x_cutoff_mass).ln() + 0.5 * (d / (std::f64::consts::PI * s)).ln().max(0.0);
        let reach = ((4.0 * d * s * q).sqrt() - m.c() * s).max(sd);
        let top = y.min(reach);
        let claims = m.claims();
        self.integrate_w(
            |w| {
                if w <= 0.0 {
                    return 0.0;
                }
                ln_passage_density(m, s, w).exp() * claims.pdf(y - w)
            },
            top,
            &[sd, 4.0 * sd, 12.0 * sd],
        )
    }

    /// `int_0^y p(y - w) G(horizon, w) dw` with `G` the claim-free passage cdf.
    fn oscillation_cdf_after_claim(&self, horizon: f64, y: f64) -> Result<Estimate> {
        let m = self.model;
        let claims = m.claims();
        let breaks: Vec<f64> = if horizon.is_finite() {
            let sd = (2.0 * m.diffusion() * horizon).sqrt();
            vec![sd, 4.0 * sd, 12.0 * sd, self.k * sd]
        } else {
            let rate = passage_rate(m, 0.0);
            vec![1.0 / rate, 4.0 / rate, 12.0 / rate]
        };
        self.integrate_w(|w| claims.pdf(y - w) * claim_free_passage_cdf(m, horizon, w), y, &breaks)
    }

    /// `int_0^y p(y - w) e^{-w rate} dw`.
    fn discounted_passage_after_claim(&self, rate: f64, y: f64) -> Result<Estimate> {
        let claims = self.model.claims();
        self.integrate_w(|w| claims.pdf(y - w) * (-w * rate).exp(), y, &[1.0 / rate, 4.0 / rate, 12.0 / rate])
    }
}

fn to_density_vector(pre: VecEstimate, lambda: f64) -> VecEstimate {
    // entry m of the pre-ruin vector feeds claim count m + 1
    let mut out = VecEstimate::zeros(pre.values.len() + 1);
    for (m, (v, e)) in pre.values.iter().zip(&pre.errors).enumerate() {
        out.values[m + 1] = lambda * v;
        out.errors[m + 1] = lambda * e;
    }
    out
}

/// `int_0^inf H(m, sigma, u, y) w(y) dy` for `m = 0..n_max - 1`.
fn surplus_vector(
    pre: &mut PreRuin<'_>,
    sigma: f64,
    u: f64,
    n_max: usize,
    spec: &QuadratureSpec,
    weight_bound: f64,
    mut weight: impl FnMut(f64) -> Result<Estimate>,
    axis: &str,
) -> Result<VecEstimate> {
    let model = pre_model(pre);
    let mass = spec.x_cutoff_mass.min(spec.abs_tol / weight_bound.max(1.0));
    let spec = &QuadratureSpec { x_cutoff_mass: mass, ..*spec };
    let top = surplus_cutoff(model, sigma, u, spec);
    let pts = surplus_breaks(model, sigma, u, top);
    let mut est = integrate_vec(
        |y, out, err| {
            let w = weight(y)?;
            if w.value == 0.0 && w.error == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                err.iter_mut().for_each(|e| *e = 0.0);
                return Ok(());
            }
            let h = pre.vector(sigma, u, y, n_max - 1)?;
            for m in 0..n_max {
                out[m] = h.values[m] * w.value;
                err[m] = h.errors[m] * w.value.abs() + h.values[m].abs() * w.error;
            }
            Ok(())
        },
        &pts,
        n_max,
        spec,
        axis,
    )?;
    est.errors.iter_mut().for_each(|e| *e += weight_bound * mass);
    Ok(est)
}

fn pre_model<'a>(pre: &PreRuin<'a>) -> &'a ModelParams {
    pre.model()
}

/// `omega_s(n, t)` for `n = 0..=n_max` (entry 0 is zero).
pub fn omega_s_vector(model: &ModelParams, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let u = reserve(model)?;
    check_t(t)?;
    if n_max == 0 {
        return Ok(VecEstimate::zeros(1));
    }
    let inner = spec.tightened(10.0);
    let mut pre = PreRuin::new(model, &inner);
    let claims = model.claims();
    let v = surplus_vector(&mut pre, t, u, n_max, spec, 1.0, |x| Ok(Estimate { value: claims.sf(x), error: 0.0 }), "claim ruin surplus")?;
    Ok(to_density_vector(v, model.lambda()))
}

/// `omega_d(n, t)` for `n = 0..=n_max`.
pub fn omega_d_vector(model: &ModelParams, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let u = reserve(model)?;
    check_t(t)?;
    let mut out = if n_max == 0 {
        VecEstimate::zeros(1)
    } else {
        let mid = spec.tightened(10.0);
        let inner = spec.tightened(100.0);
        let mut pre = PreRuin::new(model, &mid);
        let kern = Kernels::new(model, &inner);
        // s is the time from the last claim to ruin, t - s the time of that claim
        let v = integrate_vec_sqrt_both(
            |s, out, err| {
                let sigma = t - s;
                let r = surplus_vector(
                    &mut pre,
                    sigma,
                    u,
                    n_max,
                    &mid,
                    kern.oscillation_bound(s),
                    |y| kern.oscillation_after_claim(s, y),
                    "oscillation ruin surplus",
                )?;
                out.copy_from_slice(&r.values);
                err.copy_from_slice(&r.errors);
                Ok(())
            },
            0.0,
            t,
            &[],
            n_max,
            spec,
            "oscillation ruin time",
        )?;
        to_density_vector(v, model.lambda())
    };
    out.values[0] = omega_d_zero(model, t)?;
    out.errors[0] = 0.0;
    Ok(out)
}

/// Both densities and their sum for `n = 0..=n_max`.
pub fn omega_vector(model: &ModelParams, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<Vec<RuinDensityPoint>> {
    let s = omega_s_vector(model, t, n_max, spec)?;
    let d = omega_d_vector(model, t, n_max, spec)?;
    Ok((0..=n_max)
        .map(|n| RuinDensityPoint {
            n,
            t,
            omega_s: s.values[n],
            omega_d: d.values[n],
            omega: s.values[n] + d.values[n],
            error: s.errors[n] + d.errors[n],
        })
        .collect())
}

pub fn omega_s(model: &ModelParams, n: usize, t: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(omega_s_vector(model, t, n, spec)?.get(n))
}

pub fn omega_d(model: &ModelParams, n: usize, t: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(omega_d_vector(model, t, n, spec)?.get(n))
}

pub fn omega(model: &ModelParams, n: usize, t: f64, spec: &QuadratureSpec) -> Result<RuinDensityPoint> {
    Ok(omega_vector(model, t, n, spec)?[n])
}

/// Time after which ruin has probability below `mass`.
fn ruin_horizon(model: &ModelParams, delta: f64, mass: f64) -> f64 {
    decay_bound(model).horizon(-model.u(), delta, mass)
}

fn psi_claim_vector(model: &ModelParams, u: f64, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let mid = spec.tightened(10.0);
    let inner = spec.tightened(100.0);
    let mut pre = PreRuin::new(model, &inner);
    let claims = model.claims();
    let v = integrate_vec_sqrt_left(
        |sigma, out, err| {
            let r = surplus_vector(
                &mut pre,
                sigma,
                u,
                n_max,
                &mid,
                1.0,
                |x| Ok(Estimate { value: claims.sf(x), error: 0.0 }),
                "claim ruin surplus",
            )?;
            out.copy_from_slice(&r.values);
            err.copy_from_slice(&r.errors);
            Ok(())
        },
        0.0,
        t,
        &[],
        n_max,
        spec,
        "claim ruin time",
    )?;
    Ok(to_density_vector(v, model.lambda()))
}

fn psi_oscillation_vector(model: &ModelParams, u: f64, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let mut out = if n_max == 0 {
        VecEstimate::zeros(1)
    } else {
        let mid = spec.tightened(10.0);
        let inner = spec.tightened(100.0);
        let mut pre = PreRuin::new(model, &mid);
        let kern = Kernels::new(model, &inner);
        let integrand = |sigma: f64, out: &mut [f64], err: &mut [f64]| -> Result<()> {
            let remaining = t - sigma;
            let r = surplus_vector(
                &mut pre,
                sigma,
                u,
                n_max,
                &mid,
                1.0,
                |y| kern.oscillation_cdf_after_claim(remaining, y),
                "oscillation ruin surplus",
            )?;
            out.copy_from_slice(&r.values);
            err.copy_from_slice(&r.errors);
            Ok(())
        };
        let v = integrate_vec_sqrt_both(integrand, 0.0, t, &[], n_max, spec, "oscillation ruin time")?;
        to_density_vector(v, model.lambda())
    };
    out.values[0] = claim_free_passage_cdf(model, t, u);
    out.errors[0] = 0.0;
    Ok(out)
}

fn time_breaks(end: f64) -> Vec<f64> {
    let mut b = Vec::new();
    let mut p = 0.5;
    while p < end {
        b.push(p);
        p *= 2.0;
    }
    b
}

/// `P(N(T) = n, T <= t)` restricted to the given cause, for `n = 0..=n_max`.
/// `t = inf` gives the ultimate probabilities.
pub fn psi_vector(model: &ModelParams, t: f64, n_max: usize, cause: RuinCause, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let u = reserve(model)?;
    if !(t > 0.0) {
        return Err(domain("psi_cumulative", format!("t must be > 0, got {t}")));
    }
    if t == f64::INFINITY {
        let (mut claim, osc) = psi_ultimate(model, u, n_max, spec)?;
        return Ok(match cause {
            RuinCause::Claim => claim,
            RuinCause::Oscillation => osc,
            RuinCause::Total => {
                claim.add_assign(&osc);
                claim
            }
        });
    }
    match cause {
        RuinCause::Claim => {
            if n_max == 0 {
                return Ok(VecEstimate::zeros(1));
            }
            psi_claim_vector(model, u, t, n_max, spec)
        }
        RuinCause::Oscillation => psi_oscillation_vector(model, u, t, n_max, spec),
        RuinCause::Total => {
            let mut a = psi_vector(model, t, n_max, RuinCause::Claim, spec)?;
            let b = psi_vector(model, t, n_max, RuinCause::Oscillation, spec)?;
            a.add_assign(&b);
            Ok(a)
        }
    }
}

pub fn psi_cumulative(model: &ModelParams, n: usize, t: f64, cause: RuinCause, spec: &QuadratureSpec) -> Result<Estimate> {
    Ok(psi_vector(model, t, n, cause, spec)?.get(n))
}

/// `P(N(T) = n, T <= t)` from the claim-count balance of the surviving mass
/// `S_n(t) = int H(n, t, u, x) dx`:
/// `psi(n, t) = [n = 0] - S_n(t) + lambda int_0^t (S_{n-1} - S_n) d tau`.
/// Shares only the pre-ruin density with [`psi_vector`], so the two cross-check each other.
pub fn psi_balance_vector(model: &ModelParams, t: f64, n_max: usize, spec: &QuadratureSpec) -> Result<VecEstimate> {
    let u = reserve(model)?;
    check_t(t)?;
    let len = n_max + 1;
    let mid = spec.tightened(10.0);
    let inner = spec.tightened(100.0);
    let mut pre = PreRuin::new(model, &inner);
    let mut survive = |tau: f64, sp: &QuadratureSpec| -> Result<VecEstimate> {
        surplus_vector(&mut pre, tau, u, len, sp, 1.0, |_| Ok(Estimate { value: 1.0, error: 0.0 }), "survival surplus")
    };
    let lambda = model.lambda();
    let flow = integrate_vec_sqrt_left(
        |tau, out, err| {
            let s = survive(tau, &mid)?;
            for n in 0..len {
                let prev = if n == 0 { 0.0 } else { s.values[n - 1] };
                let prev_err = if n == 0 { 0.0 } else { s.errors[n - 1] };
                out[n] = lambda * (prev - s.values[n]);
                err[n] = lambda * (prev_err + s.errors[n]);
            }
            Ok(())
        },
        0.0,
        t,
        &[],
        len,
        spec,
        "survival time",
    )?;
    let end = survive(t, spec)?;
    let mut out = VecEstimate::zeros(len);
    for n in 0..len {
        let start = if n == 0 { 1.0 } else { 0.0 };
        out.values[n] = start - end.values[n] + flow.values[n];
        out.errors[n] = end.errors[n] + flow.errors[n];
    }
    Ok(out)
}

/// Discounted occupation densities of the free process, from which the pre-ruin
/// resolvent `int_0^inf e^{-delta t} sum_n r^n H(n, t, u, x) dt` factors as
/// `occupation(x - u) - hitting(x) * occupation(-u)`.
struct Resolvent<'a> {
    model: &'a ModelParams,
    spec: QuadratureSpec,
    kernel: Kernel<'a>,
    bound: DecayBound,
    delta: f64,
}

impl<'a> Resolvent<'a> {
    fn new(model: &'a ModelParams, delta: f64, spec: &QuadratureSpec) -> Self {
        Self {
            model,
            spec: *spec,
            kernel: Kernel::new(model),
            bound: decay_bound(model),
            delta,
        }
    }

    fn rate(&self) -> f64 {
        self.bound.kappa + self.delta
    }

    fn horizon(&self, y: f64, len: usize) -> f64 {
        let eps = self.spec.t_cutoff_mass.min(self.spec.abs_tol) / len as f64;
        (((1.0 / eps).ln() - self.bound.theta * y).max(0.0) / self.rate()).max(1.0)
    }

    /// Bound on `int_S^inf e^{-delta t} sum_n g_t(n, y) dt` from exponential tilting.
    fn occupation_tail(&self, y: f64, end: f64) -> f64 {
        let rate = self.rate();
        let d = self.model.diffusion();
        (-self.bound.theta * y - rate * end).exp() / (rate * (4.0 * std::f64::consts::PI * d * end).sqrt())
    }

    fn time_points(&self, y: f64, end: f64) -> Vec<f64> {
        let mut pts = time_breaks(end);
        let m = self.model;
        let speed = m.c() - m.lambda() * m.claims().mean();
        if y > 0.0 && y / speed < end {
            pts.push(y / speed);
        }
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// `int_0^inf e^{-delta t} sum_n r^n g_t(n, y) dt`.
    fn occupation(&mut self, y: f64, r: f64) -> Result<Estimate> {
        let end = self.horizon(y, 1);
        let pts = self.time_points(y, end);
        let d = self.model.diffusion();
        let mass = self.spec.series_tail_mass.min(self.spec.abs_tol) / (1.0 + (end / (std::f64::consts::PI * d)).sqrt());
        let cut = QuadratureSpec { series_tail_mass: mass, ..self.spec };
        let Self { model, spec, kernel, delta, .. } = self;
        let est = integrate_vec_sqrt_left(
            |t, out, _| {
                // the dropped counts carry probability below `mass` and density below `mass / sqrt(4 pi D t)`
                let n_cut = count_cutoff(model, t, &cut)?;
                out[0] = (-*delta * t).exp() * kernel.weighted_sum(t, y, n_cut, r)?;
                Ok(())
            },
            0.0,
            end,
            &pts,
            1,
            spec,
            "occupation time",
        )?;
        Ok(Estimate {
            value: est.values[0],
            error: est.errors[0] + self.occupation_tail(y, end) + mass * (end / (std::f64::consts::PI * d)).sqrt(),
        })
    }

    /// `int_0^inf e^{-delta t} g_t(n, y) dt` for `n < len`.
    fn occupation_vector(&mut self, y: f64, len: usize) -> Result<VecEstimate> {
        let end = self.horizon(y, len);
        let pts = self.time_points(y, end);
        let tail = self.occupation_tail(y, end);
        let Self { spec, kernel, delta, .. } = self;
        let mut est = integrate_vec_sqrt_left(
            |t, out, _| {
                let disc = -*delta * t;
                for (o, l) in out.iter_mut().zip(kernel.log_vector(t, y, len - 1)?) {
                    *o = (l + disc).exp();
                }
                Ok(())
            },
            0.0,
            end,
            &pts,
            len,
            spec,
            "occupation time",
        )?;
        est.errors.iter_mut().for_each(|e| *e += tail);
        Ok(est)
    }

    /// `int_0^inf e^{-delta s} (x/s) g_s(n, x) ds` for `n < len`: the law of the claim
    /// count when level `x` above the start is first reached.
    fn hitting_vector(&mut self, x: f64, len: usize) -> Result<VecEstimate> {
        let eps = self.spec.t_cutoff_mass.min(self.spec.abs_tol) / len as f64;
        let end = self.bound.horizon(x, self.delta, eps).max(1.0);
        let tail = (-self.delta * end).exp() * self.bound.passage_after(x, end);
        let pts = self.time_points(x, end);
        let Self { spec, kernel, delta, .. } = self;
        let mut est = integrate_vec_sqrt_left(
            |s, out, _| {
                let front = (x / s).ln() - *delta * s;
                for (o, l) in out.iter_mut().zip(kernel.log_vector(s, x, len - 1)?) {
                    *o = (l + front).exp();
                }
                Ok(())
            },
            0.0,
            end,
            &pts,
            len,
            spec,
            "hitting time",
        )?;
        est.errors.iter_mut().for_each(|e| *e += tail);
        Ok(est)
    }
}

/// Surplus points and truncation for integrals of the resolvent against claim-ruin weights.
fn resolvent_surplus(model: &ModelParams, u: f64, delta: f64, spec: &QuadratureSpec) -> (Vec<f64>, f64) {
    let end = ruin_horizon(model, delta, spec.t_cutoff_mass.min(spec.abs_tol));
    let mass = spec.x_cutoff_mass.min(spec.abs_tol);
    let top = surplus_cutoff(model, end, u, &QuadratureSpec { x_cutoff_mass: mass, ..*spec });
    let mut pts = vec![0.0, 0.5 * u, u];
    let mut step = 1.0;
    while u + step < top {
        pts.push(u + step);
        step *= 2.0;
    }
    pts.push(top);
    // surplus above the cutoff before the horizon, or ruin after it
    let lost = 2.0 * model.lambda() * end * mass + (-delta * end).exp() * decay_bound(model).ruin_after(u, end);
    (pts, lost)
}

/// Claim and oscillation parts of `E[r^N e^{-delta T}; T < inf]`; `delta = 0` allowed with `r = 1`.
fn phi_parts(model: &ModelParams, r: f64, delta: f64, spec: &QuadratureSpec) -> Result<(Estimate, Estimate)> {
    let u = reserve(model)?;
    let rho = if delta > 0.0 {
        solve_rho(model, r, delta)?.rho
    } else if r == 1.0 {
        0.0
    } else {
        return Err(domain("phi_transform", "delta = 0 requires r = 1"));
    };
    let rate = passage_rate(model, delta);
    let mid = spec.tightened(10.0);
    let mut res = Resolvent::new(model, delta, &mid);
    let kern = Kernels::new(model, &mid);
    let claims = model.claims();
    let start = res.occupation(-u, r)?;
    let (pts, lost) = resolvent_surplus(model, u, delta, &mid);
    let est = integrate_vec(
        |x, out, err| {
            let occ = res.occupation(x - u, r)?;
            let hit = (-rho * x).exp();
            let e = occ.error + hit * start.error;
            let dens = clamp_density(occ.value - hit * start.value, spec.negative_slack + e, 0, f64::INFINITY, x)?;
            let sf = claims.sf(x);
            let l = kern.discounted_passage_after_claim(rate, x)?;
            out[0] = dens * sf;
            err[0] = e * sf;
            out[1] = dens * l.value;
            err[1] = e * l.value + dens * l.error;
            Ok(())
        },
        &pts,
        2,
        spec,
        "transform surplus",
    )?;
    let scale = model.lambda() * r;
    let claim = Estimate {
        value: scale * est.values[0],
        error: scale * est.errors[0] + lost,
    };
    let osc = Estimate {
        value: scale * est.values[1] + (-u * rate).exp(),
        error: scale * est.errors[1] + lost,
    };
    Ok((claim, osc))
}

/// `P(N(T) = n, T < inf)` by cause for `n = 0..=n_max`, from the per-count resolvent
/// `occupation_n(x - u) - sum_l hitting_l(x) occupation_{n-l}(-u)`.
fn psi_ultimate(model: &ModelParams, u: f64, n_max: usize, spec: &QuadratureSpec) -> Result<(VecEstimate, VecEstimate)> {
    let mut claim = VecEstimate::zeros(n_max + 1);
    let mut osc = VecEstimate::zeros(n_max + 1);
    osc.values[0] = claim_free_passage_cdf(model, f64::INFINITY, u);
    if n_max == 0 {
        return Ok((claim, osc));
    }
    let len = n_max;
    let rate = passage_rate(model, 0.0);
    let mid = spec.tightened(10.0 * len as f64);
    let mut res = Resolvent::new(model, 0.0, &mid);
    let kern = Kernels::new(model, &mid);
    let claims = model.claims();
    let start = res.occupation_vector(-u, len)?;
    let (pts, lost) = resolvent_surplus(model, u, 0.0, &mid);
    let mut dens = vec![0.0; len];
    let mut derr = vec![0.0; len];
    let est = integrate_vec(
        |x, out, err| {
            let occ = res.occupation_vector(x - u, len)?;
            let hit = res.hitting_vector(x, len)?;
            for n in 0..len {
                let mut v = occ.values[n];
                let mut e = occ.errors[n];
                for l in 0..=n {
                    v -= hit.values[l] * start.values[n - l];
                    e += hit.errors[l] * start.values[n - l] + hit.values[l] * start.errors[n - l];
                }
                dens[n] = clamp_density(v, spec.negative_slack + e, n, f64::INFINITY, x)?;
                derr[n] = e;
            }
            let sf = claims.sf(x);
            let l = kern.discounted_passage_after_claim(rate, x)?;
            for n in 0..len {
                out[n] = dens[n] * sf;
                err[n] = derr[n] * sf;
                out[len + n] = dens[n] * l.value;
                err[len + n] = derr[n] * l.value + dens[n] * l.error;
            }
            Ok(())
        },
        &pts,
        2 * len,
        spec,
        "ultimate ruin surplus",
    )?;
    let lambda = model.lambda();
    for n in 0..len {
        claim.values[n + 1] = lambda * est.values[n];
        claim.errors[n + 1] = lambda * est.errors[n] + lost;
        osc.values[n + 1] = lambda * est.values[len + n];
        osc.errors[n + 1] = lambda * est.errors[len + n] + lost;
    }
    Ok((claim, osc))
}

/// `E[r^{N(T)} e^{-delta T}; T < inf]`.
pub fn phi_transform(model: &ModelParams, r: f64, delta: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("phi_transform", format!("r must lie in (0, 1], got {r}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain("phi_transform", format!("delta must be finite and > 0, got {delta}")));
    }
    let (a, b) = phi_parts(model, r, delta, spec)?;
    Ok(Estimate {
        value: a.value + b.value,
        error: a.error + b.error,
    })
}

/// Ultimate ruin probability split by cause.
pub fn ruin_probability(model: &ModelParams, spec: &QuadratureSpec) -> Result<RuinProbability> {
    let (a, b) = phi_parts(model, 1.0, 0.0, spec)?;
    Ok(RuinProbability {
        claim: a.value,
        oscillation: b.value,
        total: a.value + b.value,
        error: a.error + b.error,
    })
}
