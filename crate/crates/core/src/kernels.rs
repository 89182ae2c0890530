//! The kernel `g_t(n, x)`, the joint density of `N(t)` and `U(t) - u`, and the
//! first-passage law above the initial reserve built from it.

use serde::Serialize;

use crate::error::{domain, Result, RuinError};
use crate::lundberg::decay_bound;
use crate::model::claims::SmoothingWorkspace;
use crate::model::ModelParams;
use crate::numerics::special::{ln_factorial, ln_normal_pdf, LN_SQRT_2PI};
use crate::numerics::{
    claim_count_tail_bound, integrate_semi_infinite, integrate_vec, integrate_vec_sqrt_left,
    poisson_series_truncation, Decay, Estimate, QuadratureSpec,
};

/// One value of `g_t(n, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelPoint {
    pub n: usize,
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub log_value: f64,
}

/// Result of a truncated claim-count series of time integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub value: f64,
    /// Quadrature error estimate.
    pub quad_error: f64,
    /// Bound on everything dropped by truncating the series and the time axis.
    pub truncation_bound: f64,
    /// Highest claim count kept.
    pub n_terms: usize,
    /// Upper end of the time integral.
    pub horizon: f64,
}

impl SeriesEstimate {
    pub fn error(&self) -> f64 {
        self.quad_error + self.truncation_bound
    }
}

/// Evaluator of `ln g_t(n, x)` for `n = 0..=n_max` with reusable scratch space.
#[derive(Debug)]
pub struct Kernel<'a> {
    model: &'a ModelParams,
    ws: SmoothingWorkspace,
    logs: Vec<f64>,
}

impl<'a> Kernel<'a> {
    pub fn new(model: &'a ModelParams) -> Self {
        Self {
            model,
            ws: SmoothingWorkspace::default(),
            logs: Vec::new(),
        }
    }

    pub fn model(&self) -> &'a ModelParams {
        self.model
    }

    /// `ln g_t(n, x)` for `n = 0..=n_max`; `t > 0` is not checked.
    pub fn log_vector(&mut self, t: f64, x: f64, n_max: usize) -> Result<&[f64]> {
        let m = self.model;
        let lt = m.lambda() * t;
        let var = 2.0 * m.diffusion() * t;
        m.claims()
            .smoothed_convolution_logs_into(m.c() * t - x, var, n_max, &mut self.logs, &mut self.ws)?;
        let ln_lt = lt.ln();
        for (n, v) in self.logs.iter_mut().enumerate() {
            *v += n as f64 * ln_lt - lt - ln_factorial(n);
        }
        Ok(&self.logs)
    }

    /// `sum_n weight^n g_t(n, x)` over `n = 0..=n_max`.
    pub fn weighted_sum(&mut self, t: f64, x: f64, n_max: usize, weight: f64) -> Result<f64> {
        let ln_w = weight.ln();
        let logs = self.log_vector(t, x, n_max)?;
        Ok(logs
            .iter()
            .enumerate()
            .map(|(n, l)| (l + n as f64 * ln_w).exp())
            .sum())
    }
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain("g_density", format!("t must be finite and > 0, got {t}")))
    }
}

/// `ln g_t(n, x)`.
pub fn g_log_density(model: &ModelParams, n: usize, t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    if !x.is_finite() {
        return Err(domain("g_density", "x must be finite"));
    }
    let mut k = Kernel::new(model);
    Ok(k.log_vector(t, x, n)?[n])
}

pub fn g_density(model: &ModelParams, n: usize, t: f64, x: f64) -> Result<f64> {
    Ok(g_log_density(model, n, t, x)?.exp())
}

pub fn g_point(model: &ModelParams, n: usize, t: f64, x: f64) -> Result<KernelPoint> {
    let log_value = g_log_density(model, n, t, x)?;
    Ok(KernelPoint {
        n,
        t,
        x,
        value: log_value.exp(),
        log_value,
    })
}

/// `g_t(n, x)` by direct quadrature of the Gaussian-smoothed convolution over the
/// claim total `z`, independent of the closed-form smoothing used by [`g_density`].
pub fn g_density_quadrature(
    model: &ModelParams,
    n: usize,
    t: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    check_time(t)?;
    let lt = model.lambda() * t;
    let ln_poisson = n as f64 * lt.ln() - lt - ln_factorial(n);
    let mean = model.c() * t - x;
    let var = 2.0 * model.diffusion() * t;
    if n == 0 {
        let v = (ln_poisson + ln_normal_pdf(0.0, mean, var)).exp();
        return Ok(Estimate { value: v, error: 0.0 });
    }
    let claims = model.claims();
    let scale = (ln_poisson - 0.5 * var.ln() - LN_SQRT_2PI).exp() * claims.density_bound();
    let sd = var.sqrt();
    integrate_semi_infinite(
        |z| {
            if z <= 0.0 {
                return 0.0;
            }
            let ln_conv = claims.log_convolution_density(n, z).unwrap_or(f64::NEG_INFINITY);
            (ln_poisson + ln_normal_pdf(z, mean, var) + ln_conv).exp()
        },
        0.0,
        Decay::Gaussian {
            center: mean.max(0.0),
            sd,
            scale: scale.max(f64::MIN_POSITIVE),
        },
        spec,
    )
}

/// Density of `(N(tau), tau)` at `(n, t)` for the first passage of the surplus to
/// `level > u`: `((level - u) / t) g_t(n, level - u)`.
pub fn hitting_density(model: &ModelParams, n: usize, t: f64, level: f64, u: f64) -> Result<f64> {
    check_time(t)?;
    let x = level - u;
    if !(x > 0.0) {
        return Err(domain("hitting_density", format!("level must exceed u, got {level} <= {u}")));
    }
    Ok(x / t * g_density(model, n, t, x)?)
}

/// Time breakpoints for integrands carrying `(x/s) g_s(., x)`.
fn passage_breaks(model: &ModelParams, x: f64, horizon: f64) -> Vec<f64> {
    let mut b = vec![x * x / (6.0 * model.diffusion()), x / model.c()];
    let mut p = 2.0 * x / model.c();
    while p < horizon {
        b.push(p);
        p *= 2.0;
    }
    b.retain(|v| *v > 0.0 && *v < horizon);
    b.sort_by(f64::total_cmp);
    b
}

/// Claim-count cutoff and time horizon for `E[r^N e^{-delta tau}]`-type series
/// over a passage distance `x`, with total dropped mass below `eps`.
pub(crate) fn series_plan(
    model: &ModelParams,
    r: f64,
    delta: f64,
    x: f64,
    eps: f64,
    spec: &QuadratureSpec,
) -> Result<(usize, f64, f64)> {
    let bound = decay_bound(model);
    let horizon = bound.horizon(x, delta, 0.5 * eps);
    let time_tail = (-delta * horizon).exp() * bound.passage_after(x, horizon);
    let by_poisson = poisson_series_truncation(model.lambda() * horizon, 0.5 * eps);
    let mut n_cut = by_poisson;
    let mut count_tail = 0.5 * eps;
    if r * model.lambda() < model.lambda() + delta {
        // geometric bound from the (N+1)-th arrival may be shorter
        let ratio = r * model.lambda() / (model.lambda() + delta);
        let by_arrival = ((0.5 * eps).ln() / ratio.ln()).ceil().max(1.0) as usize;
        if by_arrival < n_cut {
            n_cut = by_arrival;
            count_tail = claim_count_tail_bound(r, model.lambda(), delta, n_cut);
        }
    }
    if n_cut > spec.n_max {
        return Err(RuinError::TruncationLimit {
            needed: n_cut,
            cap: spec.n_max,
        });
    }
    Ok((n_cut, horizon, time_tail + count_tail))
}

/// `sum_n r^n int_0^inf e^{-delta s} (x/s) g_s(n, x) ds = E[r^{N(tau)} e^{-delta tau}]`
/// for the passage over distance `x > 0`; `delta = 0` gives total masses.
pub fn hitting_transform(
    model: &ModelParams,
    r: f64,
    delta: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<SeriesEstimate> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(domain("hitting_transform", format!("r must lie in (0, 1], got {r}")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(domain("hitting_transform", format!("delta must be >= 0, got {delta}")));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain("hitting_transform", format!("x must be > 0, got {x}")));
    }
    let (n_cut, horizon, tail) = series_plan(model, r, delta, x, spec.series_tail_mass, spec)?;
    let mut kernel = Kernel::new(model);
    let breaks = passage_breaks(model, x, horizon);
    let est = integrate_vec_sqrt_left(
        |s, out, _| {
            let g = kernel.weighted_sum(s, x, n_cut, r)?;
            out[0] = (-delta * s).exp() * x / s * g;
            Ok(())
        },
        0.0,
        horizon,
        &breaks,
        1,
        spec,
        "hitting time",
    )?;
    Ok(SeriesEstimate {
        value: est.values[0],
        quad_error: est.errors[0],
        truncation_bound: tail,
        n_terms: n_cut,
        horizon,
    })
}

/// Series side of `exp(-rho_delta x)`; requires `delta > 0`.
pub fn exp_rho_series(
    model: &ModelParams,
    r: f64,
    delta: f64,
    x: f64,
    spec: &QuadratureSpec,
) -> Result<SeriesEstimate> {
    if !(delta > 0.0) {
        return Err(domain("exp_rho_series", format!("delta must be > 0, got {delta}")));
    }
    hitting_transform(model, r, delta, x, spec)
}

/// Total probability that the level `u + x` is ever reached.
pub fn hitting_total_mass(model: &ModelParams, x: f64, spec: &QuadratureSpec) -> Result<SeriesEstimate> {
    hitting_transform(model, 1.0, 0.0, x, spec)
}

/// `P(N(tau) = n, tau in [edges[k], edges[k+1]))` for `n = 0..=n_max` (rows) and each bin (columns).
pub fn hitting_bin_masses(
    model: &ModelParams,
    x: f64,
    edges: &[f64],
    n_max: usize,
    spec: &QuadratureSpec,
) -> Result<Vec<Vec<f64>>> {
    if !(x > 0.0) {
        return Err(domain("hitting_bin_masses", format!("x must be > 0, got {x}")));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(domain("hitting_bin_masses", "bin edges must be increasing and >= 0"));
    }
    let mut kernel = Kernel::new(model);
    let mut out = vec![vec![0.0; edges.len() - 1]; n_max + 1];
    let mut integrand = |s: f64, v: &mut [f64], _: &mut [f64]| -> Result<()> {
        let logs = kernel.log_vector(s, x, n_max)?;
        for (o, l) in v.iter_mut().zip(logs) {
            *o = x / s * l.exp();
        }
        Ok(())
    };
    for (k, w) in edges.windows(2).enumerate() {
        let breaks = passage_breaks(model, x, w[1]);
        let est = if w[0] == 0.0 {
            integrate_vec_sqrt_left(&mut integrand, 0.0, w[1], &breaks, n_max + 1, spec, "hitting bin")?
        } else {
            let mut pts = vec![w[0]];
            pts.extend(breaks.iter().filter(|b| **b > w[0]));
            pts.push(w[1]);
            integrate_vec(&mut integrand, &pts, n_max + 1, spec, "hitting bin")?
        };
        for n in 0..=n_max {
            out[n][k] = est.values[n];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lundberg::solve_rho;
    use crate::model::{ClaimDistribution, TabulatedDensity};
    use crate::numerics::integrate_points;

    fn desk() -> ModelParams {
        ModelParams::new(1.0, 2.0, 1.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn zero_claim_kernel_at_drift_center() {
        let m = desk();
        let t: f64 = 0.7;
        let want = (-t).exp() / (2.0 * (std::f64::consts::PI * 0.5 * t).sqrt());
        assert!((g_density(&m, 0, t, 2.0 * t).unwrap() / want - 1.0).abs() < 1e-14);
        assert!(g_density(&m, 0, 0.0, 1.0).is_err());
    }

    #[test]
    fn two_claim_kernel_matches_simpson() {
        let m = desk();
        let oracle = (-1.0f64).exp() / 2.0
            * simpson(
                |z| (-(z - 2.0) * (z - 2.0) / 2.0).exp() / (2.0 * (std::f64::consts::PI * 0.5).sqrt()) * z * (-z).exp(),
                0.0,
                40.0,
                40_000,
            );
        let got = g_density(&m, 2, 1.0, 0.0).unwrap();
        assert!((got - oracle).abs() < 1e-6 * oracle.max(1e-300) + 1e-12, "{got} {oracle}");
        let quad = g_density_quadrature(&m, 2, 1.0, 0.0, &QuadratureSpec::default()).unwrap();
        assert!((quad.value / got - 1.0).abs() < 1e-8);
    }

    #[test]
    fn both_routes_agree_across_families() {
        let spec = QuadratureSpec::default();
        let families = [
            ClaimDistribution::exponential(1.0).unwrap(),
            ClaimDistribution::erlang(3, 2.0).unwrap(),
            ClaimDistribution::hyper_exponential(vec![0.3, 0.7], vec![0.5, 3.0]).unwrap(),
        ];
        for claims in families {
            let m = ModelParams::new(1.0, 3.0, 1.0, 0.8, claims).unwrap();
            for &(n, t, x) in &[(1usize, 0.3, 0.1), (3, 1.0, -2.0), (5, 2.5, 1.0), (2, 4.0, 12.0)] {
                let a = g_density(&m, n, t, x).unwrap();
                let b = g_density_quadrature(&m, n, t, x, &spec).unwrap().value;
                assert!((a - b).abs() <= 1e-8 * a.abs() + 1e-14, "n={n} t={t} x={x}: {a:e} {b:e}");
            }
        }
    }

    #[test]
    fn kernel_is_a_joint_density() {
        let m = desk();
        let t = 1.0;
        let n_max = poisson_series_truncation(t, 1e-12);
        let mut k = Kernel::new(&m);
        let pts: Vec<f64> = (-60..=12).map(|i| i as f64).collect();
        let total = integrate_points(|x| k.weighted_sum(t, x, n_max, 1.0).unwrap(), &pts, &QuadratureSpec::default())
            .unwrap();
        assert!((total.value - 1.0).abs() < 1e-6, "{}", total.value);
    }

    #[test]
    fn tabulated_claims_reproduce_the_kernel() {
        let exp1 = ClaimDistribution::exponential(1.0).unwrap();
        let table = TabulatedDensity::discretize(&exp1, 1e-3, 40.0).unwrap();
        let m = desk();
        let mt = ModelParams::new(1.0, 2.0, 1.0, 1.0, ClaimDistribution::tabulated(table)).unwrap();
        for &(n, t, x) in &[(1usize, 0.5, 0.3), (2, 1.0, 0.0), (4, 2.0, -1.0), (3, 0.01, -0.5)] {
            let a = g_density(&m, n, t, x).unwrap();
            let b = g_density(&mt, n, t, x).unwrap();
            assert!((a - b).abs() < 1e-4, "n={n} t={t} x={x}: {a} {b}");
        }
    }

    #[test]
    fn kernel_underflows_gracefully() {
        let m = desk();
        let mut k = Kernel::new(&m);
        for &(t, x) in &[(1e-9, 3.0), (0.5, -300.0), (200.0, 2.0), (1.0, 500.0)] {
            let logs = k.log_vector(t, x, 150).unwrap();
            assert!(logs.iter().all(|l| !l.is_nan() && *l < 10.0), "t={t} x={x}");
        }
    }

    #[test]
    fn hitting_density_composes_the_kernel() {
        let m = desk();
        let (u, level, t) = (1.0, 2.4, 0.7);
        let want = (level - u) / t * g_density(&m, 0, t, level - u).unwrap();
        assert_eq!(hitting_density(&m, 0, t, level, u).unwrap(), want);
        assert!(hitting_density(&m, 0, t, 0.5, u).is_err());
    }

    #[test]
    fn hitting_law_mass_and_transform() {
        let m = desk();
        let spec = QuadratureSpec::default();
        let mass = hitting_total_mass(&m, 1.0, &spec).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-4, "{mass:?}");
        let tr = hitting_transform(&m, 0.9, 0.2, 1.0, &spec).unwrap();
        let rho = solve_rho(&m, 0.9, 0.2).unwrap().rho;
        assert!((tr.value - (-rho).exp()).abs() < 1e-5);
    }

    #[test]
    fn series_matches_exponential() {
        let m = desk();
        let spec = QuadratureSpec::default();
        for &(r, delta, x) in &[(1.0, 0.1, 1.0), (0.5, 1.0, 2.0), (0.9, 0.5, 1e-3)] {
            let s = exp_rho_series(&m, r, delta, x, &spec).unwrap();
            let want = (-solve_rho(&m, r, delta).unwrap().rho * x).exp();
            let tol = if x < 0.01 { 5e-3 } else { 1e-5 };
            assert!((s.value - want).abs() < tol, "r={r} d={delta} x={x}: {} {want}", s.value);
        }
    }

    #[test]
    fn bin_masses_sum_to_total() {
        let m = desk();
        let spec = QuadratureSpec::default();
        let edges = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0];
        let bins = hitting_bin_masses(&m, 1.0, &edges, 3, &spec).unwrap();
        let mut k = Kernel::new(&m);
        let direct = integrate_vec_sqrt_left(
            |s, v, _| {
                let logs = k.log_vector(s, 1.0, 3)?;
                for (o, l) in v.iter_mut().zip(logs) {
                    *o = 1.0 / s * l.exp();
                }
                Ok(())
            },
            0.0,
            4.0,
            &[],
            4,
            &spec,
            "s",
        )
        .unwrap();
        for n in 0..=3 {
            let sum: f64 = bins[n].iter().sum();
            assert!((sum - direct.values[n]).abs() < 1e-9, "n={n}");
        }
    }
}
