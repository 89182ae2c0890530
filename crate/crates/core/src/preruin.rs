//! Pre-ruin density `H(n, t, u, x)` of the claim count and the surplus on survival up to `t`:
//! `g_t(n, x - u) - sum_l int_0^t (x/s) g_s(l, x) g_{t-s}(n - l, -u) ds`.

use serde::Serialize;

use crate::error::{domain, Result, RuinError};
use crate::kernels::Kernel;
use crate::model::ModelParams;
use crate::numerics::special::upper_quantile;
use crate::numerics::{
    integrate_vec, integrate_vec_sqrt_both, poisson_series_truncation, Estimate, QuadratureSpec,
    VecEstimate,
};

/// Arguments of `H(n, t, u, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PreRuinQuery {
    pub n: usize,
    pub t: f64,
    pub u: f64,
    pub x: f64,
}

impl PreRuinQuery {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("u", self.u), ("x", self.x)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain("pre_ruin_density", format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

fn check_tux(t: f64, u: f64, x: f64) -> Result<()> {
    PreRuinQuery { n: 0, t, u, x }.validate()
}

/// Claim-count cutoff for quantities at time `t`.
pub(crate) fn count_cutoff(model: &ModelParams, t: f64, spec: &QuadratureSpec) -> Result<usize> {
    let n = poisson_series_truncation(model.lambda() * t, spec.series_tail_mass);
    if n > spec.n_max {
        return Err(RuinError::TruncationLimit {
            needed: n,
            cap: spec.n_max,
        });
    }
    Ok(n)
}

/// Upper end for surplus integrals at time `t` from reserve `u`.
pub(crate) fn surplus_cutoff(model: &ModelParams, t: f64, u: f64, spec: &QuadratureSpec) -> f64 {
    let k = upper_quantile(spec.x_cutoff_mass);
    u + model.c() * t + k * (2.0 * model.diffusion() * t).sqrt()
}

/// Breakpoints in `x` for surplus integrals at time `t`.
pub(crate) fn surplus_breaks(model: &ModelParams, t: f64, u: f64, top: f64) -> Vec<f64> {
    let sd = (2.0 * model.diffusion() * t).sqrt();
    let center = u + model.c() * t;
    let mut b = vec![0.0, u, center];
    for k in [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0] {
        b.push(center + k * sd);
    }
    b.push(top);
    b.retain(|v| *v >= 0.0 && *v <= top);
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

/// Reusable evaluator of `H` and its claim-weighted sums at fixed model and spec.
#[derive(Debug)]
pub struct PreRuin<'a> {
    model: &'a ModelParams,
    spec: QuadratureSpec,
    inner: QuadratureSpec,
    a: Kernel<'a>,
    b: Kernel<'a>,
    head: Kernel<'a>,
    la: Vec<f64>,
    ea: Vec<f64>,
    eb: Vec<f64>,
}

impl<'a> PreRuin<'a> {
    /// `spec` bounds the returned values; the inner time integral runs ten times tighter
    /// so its error does not dominate any outer integral built on it.
    pub fn new(model: &'a ModelParams, spec: &QuadratureSpec) -> Self {
        Self {
            model,
            spec: *spec,
            inner: spec.tightened(10.0),
            a: Kernel::new(model),
            b: Kernel::new(model),
            head: Kernel::new(model),
            la: Vec::new(),
            ea: Vec::new(),
            eb: Vec::new(),
        }
    }

    pub fn model(&self) -> &'a ModelParams {
        self.model
    }

    fn time_breaks(&self, t: f64, u: f64, x: f64) -> Vec<f64> {
        let d = self.model.diffusion();
        let c = self.model.c();
        let mut b = vec![x * x / (6.0 * d), x / c, t - u * u / (6.0 * d)];
        b.retain(|s| *s > 0.0 && *s < t);
        b.sort_by(f64::total_cmp);
        b
    }

    /// `H(n, t, u, x)` for `n = 0..=n_max`, clamped to zero within the negative slack.
    pub fn vector(&mut self, t: f64, u: f64, x: f64, n_max: usize) -> Result<VecEstimate> {
        let len = n_max + 1;
        let breaks = self.time_breaks(t, u, x);
        let Self {
            a, b, la, ea, eb, inner, ..
        } = self;
        let sub = integrate_vec_sqrt_both(
            |s, out, _| {
                la.clear();
                la.extend_from_slice(a.log_vector(s, x, n_max)?);
                let lb = b.log_vector(t - s, -u, n_max)?;
                let ma = la.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mb = lb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if ma == f64::NEG_INFINITY || mb == f64::NEG_INFINITY {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return Ok(());
                }
                ea.clear();
                ea.extend(la.iter().map(|l| (l - ma).exp()));
                eb.clear();
                eb.extend(lb.iter().map(|l| (l - mb).exp()));
                let scale = (ma + mb).exp() * x / s;
                for (n, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for l in 0..=n {
                        acc += ea[l] * eb[n - l];
                    }
                    *o = scale * acc;
                }
                Ok(())
            },
            0.0,
            t,
            &breaks,
            len,
            inner,
            "pre-ruin time",
        )?;
        let head = self.head.log_vector(t, x - u, n_max)?;
        let mut values = Vec::with_capacity(len);
        for n in 0..len {
            let v = head[n].exp() - sub.values[n];
            values.push(clamp_density(v, self.spec.negative_slack, n, t, x)?);
        }
        Ok(VecEstimate {
            values,
            errors: sub.errors,
        })
    }

    /// `sum_{n <= n_cut} r^n H(n, t, u, x)`, evaluated as `g~ - int (x/s) a~ b~ ds` with
    /// `a~`, `b~` the claim-weighted kernel sums.
    pub fn weighted(&mut self, t: f64, u: f64, x: f64, r: f64, n_cut: usize) -> Result<Estimate> {
        let breaks = self.time_breaks(t, u, x);
        let Self { a, b, inner, .. } = self;
        let sub = integrate_vec_sqrt_both(
            |s, out, _| {
                let sa = a.weighted_sum(s, x, n_cut, r)?;
                let sb = b.weighted_sum(t - s, -u, n_cut, r)?;
                out[0] = x / s * sa * sb;
                Ok(())
            },
            0.0,
            t,
            &breaks,
            1,
            inner,
            "pre-ruin time",
        )?;
        let head = self.head.weighted_sum(t, x - u, n_cut, r)?;
        let value = clamp_density(head - sub.values[0], self.spec.negative_slack, n_cut, t, x)?;
        Ok(Estimate {
            value,
            error: sub.errors[0],
        })
    }

    /// `int_0^inf sum_{n <= n_cut} r^n H(n, t, u, x) w(x) dx` for a weight bounded by one.
    pub fn integrate_surplus(
        &mut self,
        t: f64,
        u: f64,
        r: f64,
        n_cut: usize,
        mut weight: impl FnMut(f64) -> f64,
        spec: &QuadratureSpec,
    ) -> Result<Estimate> {
        let top = surplus_cutoff(self.model, t, u, spec);
        let pts = surplus_breaks(self.model, t, u, top);
        let est = integrate_vec(
            |x, out, err| {
                let h = self.weighted(t, u, x, r, n_cut)?;
                let w = weight(x);
                out[0] = h.value * w;
                err[0] = h.error * w.abs();
                Ok(())
            },
            &pts,
            1,
            spec,
            "pre-ruin surplus",
        )?;
        Ok(Estimate {
            value: est.values[0],
            error: est.errors[0] + spec.x_cutoff_mass,
        })
    }
}

pub(crate) fn clamp_density(v: f64, slack: f64, n: usize, t: f64, x: f64) -> Result<f64> {
    if v >= 0.0 {
        return Ok(v);
    }
    if v >= -slack {
        return Ok(0.0);
    }
    Err(RuinError::NegativeDensity {
        value: v,
        slack,
        n,
        t,
        x,
    })
}

pub fn h_vector(
    model: &ModelParams,
    t: f64,
    u: f64,
    x: f64,
    n_max: usize,
    spec: &QuadratureSpec,
) -> Result<VecEstimate> {
    check_tux(t, u, x)?;
    PreRuin::new(model, spec).vector(t, u, x, n_max)
}

pub fn h_density(model: &ModelParams, q: &PreRuinQuery, spec: &QuadratureSpec) -> Result<Estimate> {
    q.validate()?;
    let v = PreRuin::new(model, spec).vector(q.t, q.u, q.x, q.n)?;
    Ok(v.get(q.n))
}

/// `sum_n r^n H(n, t, u, x)` with the series cut where the claim-count tail at `t`
/// falls below `series_tail_mass`.
pub fn h_weighted(model: &ModelParams, r: f64, t: f64, u: f64, x: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    check_tux(t, u, x)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("pre_ruin_density", format!("r must lie in (0, 1], got {r}")));
    }
    let n_cut = count_cutoff(model, t, spec)?;
    PreRuin::new(model, spec).weighted(t, u, x, r, n_cut)
}

/// `P(T_u > t) = sum_n int_0^inf H(n, t, u, x) dx`.
pub fn survival_mass(model: &ModelParams, t: f64, u: f64, spec: &QuadratureSpec) -> Result<Estimate> {
    check_tux(t, u, 1.0)?;
    let n_cut = count_cutoff(model, t, spec)?;
    let mut est = PreRuin::new(model, spec).integrate_surplus(t, u, 1.0, n_cut, |_| 1.0, spec)?;
    est.error += spec.series_tail_mass;
    est.value = est.value.clamp(0.0, 1.0);
    Ok(est)
}
