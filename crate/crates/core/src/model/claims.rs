use std::sync::{Arc, OnceLock};

use crate::error::{domain, invalid, Result};
use crate::model::tabulated::TabulatedDensity;
use crate::numerics::special::{
    ln_factorial, ln_normal_pdf, log_repeated_erfc_into, RepeatedErfc, LN_SQRT_2PI,
};

/// The claim-size families supported by the crate.
#[derive(Debug, Clone)]
pub enum ClaimKind {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
    Tabulated(TabulatedDensity),
}

/// Claim-size law: density, survival, Laplace transform and n-fold convolutions.
///
/// The three parametric families are all mixtures of Erlang laws with a common
/// rate (a hyperexponential branch with rate `mu_i <= mu*` is a geometric sum of
/// `Exp(mu*)` variables), so their convolution powers stay Erlang mixtures and
/// Gaussian-smoothed convolutions reduce to repeated erfc integrals.
#[derive(Debug, Clone)]
pub struct ClaimDistribution {
    kind: ClaimKind,
    mean: f64,
    mixture: Option<Arc<ErlangMixture>>,
}

const MIXTURE_TAIL: f64 = 1e-17;
const MIXTURE_MAX_LEN: usize = 200_000;
const MIXTURE_MAX_POWER: usize = 4096;

/// Weights `pi_k`, `k >= 1`, of `sum_k pi_k Erlang(k, rate)` and cached convolution powers.
#[derive(Debug)]
struct ErlangMixture {
    rate: f64,
    base: Vec<f64>, // base[k-1] = pi_k
    powers: Vec<OnceLock<Vec<f64>>>, // powers[n][j] = weight of Erlang(n + j)
}

impl ErlangMixture {
    fn hyper_exponential(weights: &[f64], rates: &[f64]) -> Result<Self> {
        let top = rates.iter().copied().fold(0.0, f64::max);
        let q: Vec<f64> = rates.iter().map(|r| r / top).collect();
        let mut base = Vec::new();
        loop {
            let k = base.len();
            let pk: f64 = weights
                .iter()
                .zip(&q)
                .map(|(w, qi)| w * qi * (1.0 - qi).powi(k as i32))
                .sum();
            base.push(pk);
            let tail: f64 = weights
                .iter()
                .zip(&q)
                .map(|(w, qi)| w * (1.0 - qi).powi(k as i32 + 1))
                .sum();
            if tail < MIXTURE_TAIL {
                break;
            }
            if base.len() >= MIXTURE_MAX_LEN {
                return Err(invalid(
                    "rates",
                    "hyperexponential rates too far apart for the Erlang mixture representation",
                ));
            }
        }
        Ok(Self {
            rate: top,
            base,
            powers: (0..=MIXTURE_MAX_POWER).map(|_| OnceLock::new()).collect(),
        })
    }

    fn power(&self, n: usize) -> Result<&[f64]> {
        if n == 0 || n > MIXTURE_MAX_POWER {
            return Err(domain(
                "claim_convolution",
                format!("mixture convolution order {n} outside 1..={MIXTURE_MAX_POWER}"),
            ));
        }
        for k in 1..=n {
            if self.powers[k].get().is_some() {
                continue;
            }
            let next = if k == 1 {
                self.base.clone()
            } else {
                let prev = self.powers[k - 1].get().expect("filled in order");
                let mut out = vec![0.0; prev.len() + self.base.len() - 1];
                for (i, a) in prev.iter().enumerate() {
                    if *a == 0.0 {
                        continue;
                    }
                    for (j, b) in self.base.iter().enumerate() {
                        out[i + j] += a * b;
                    }
                }
                // drop the negligible far tail so lengths grow ~linearly
                let mut tail = 0.0;
                let mut keep = out.len();
                while keep > 1 {
                    tail += out[keep - 1];
                    if tail > MIXTURE_TAIL {
                        break;
                    }
                    keep -= 1;
                }
                out.truncate(keep);
                out
            };
            let _ = self.powers[k].set(next);
        }
        Ok(self.powers[n].get().expect("just filled"))
    }
}

fn erlang_log_pdf(k: usize, rate: f64, x: f64) -> f64 {
    k as f64 * rate.ln() + (k as f64 - 1.0) * x.ln() - rate * x - ln_factorial(k - 1)
}

/// `ln int_0^inf N(z; mean, var) Erlang(K, rate)(z) dz` for `K = 0..=kmax`, where the
/// `K = 0` entry is the point mass at zero, i.e. `ln N(0; mean, var)`.
pub(crate) fn gaussian_erlang_logs(
    mean: f64,
    var: f64,
    rate: f64,
    kmax: usize,
    out: &mut Vec<f64>,
    scratch: &mut RepeatedErfc,
) {
    out.clear();
    out.push(ln_normal_pdf(0.0, mean, var));
    if kmax == 0 {
        return;
    }
    let sd = var.sqrt();
    // N(z; m, v) e^{-rate z} = N(z; m - rate v, v) exp(-rate m + rate^2 v / 2)
    let shifted = mean - rate * var;
    let x = -shifted / sd;
    log_repeated_erfc_into(x, kmax - 1, scratch);
    let base = if x > 0.0 {
        // the exp(x^2/2) scaling of the erfc integrals cancels against the prefactor
        -mean * mean / (2.0 * var)
    } else {
        -rate * mean + 0.5 * rate * rate * var
    };
    let (ln_rate, ln_sd) = (rate.ln(), sd.ln());
    for k in 1..=kmax {
        let kf = k as f64;
        out.push(kf * ln_rate + (kf - 1.0) * ln_sd + base + scratch.log_values[k - 1] - LN_SQRT_2PI);
    }
}

impl ClaimDistribution {
    pub fn exponential(rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        Ok(Self {
            kind: ClaimKind::Exponential { rate },
            mean: 1.0 / rate,
            mixture: None,
        })
    }

    pub fn erlang(shape: u32, rate: f64) -> Result<Self> {
        positive("rate", rate)?;
        if shape == 0 {
            return Err(invalid("shape", "must be >= 1"));
        }
        Ok(Self {
            kind: ClaimKind::Erlang { shape, rate },
            mean: shape as f64 / rate,
            mixture: None,
        })
    }

    pub fn hyper_exponential(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != rates.len() {
            return Err(invalid("weights", "weights and rates must be non-empty and of equal length"));
        }
        for &r in &rates {
            positive("rates", r)?;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(invalid("weights", "weights must be finite and > 0"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid("weights", format!("weights must sum to 1, got {total}")));
        }
        let mean = weights.iter().zip(&rates).map(|(w, r)| w / r).sum();
        let mixture = Arc::new(ErlangMixture::hyper_exponential(&weights, &rates)?);
        Ok(Self {
            kind: ClaimKind::HyperExponential { weights, rates },
            mean,
            mixture: Some(mixture),
        })
    }

    pub fn tabulated(table: TabulatedDensity) -> Self {
        let mean = table.mean();
        Self {
            kind: ClaimKind::Tabulated(table),
            mean,
            mixture: None,
        }
    }

    pub fn kind(&self) -> &ClaimKind {
        &self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Density `p(x)`; zero for `x <= 0`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            ClaimKind::Exponential { rate } => rate * (-rate * x).exp(),
            ClaimKind::Erlang { shape, rate } => erlang_log_pdf(*shape as usize, *rate, x).exp(),
            ClaimKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * r * (-r * x).exp())
                .sum(),
            ClaimKind::Tabulated(t) => t.pdf(x),
        }
    }

    /// Checked density for `x > 0`.
    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain("claim_density", format!("x must be > 0, got {x}")));
        }
        Ok(self.pdf(x))
    }

    pub fn log_density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(domain("claim_density", format!("x must be > 0, got {x}")));
        }
        Ok(match &self.kind {
            ClaimKind::Exponential { rate } => rate.ln() - rate * x,
            ClaimKind::Erlang { shape, rate } => erlang_log_pdf(*shape as usize, *rate, x),
            _ => self.pdf(x).ln(),
        })
    }

    /// Survival `P(X > x)`; one for `x <= 0`.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            ClaimKind::Exponential { rate } => (-rate * x).exp(),
            ClaimKind::Erlang { shape, rate } => {
                let y = rate * x;
                let mut term = 1.0;
                let mut sum = 1.0;
                for j in 1..*shape {
                    term *= y / j as f64;
                    sum += term;
                }
                (sum.ln() - y).exp()
            }
            ClaimKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| w * (-r * x).exp())
                .sum(),
            ClaimKind::Tabulated(t) => t.sf(x),
        }
    }

    /// Checked survival for `x >= 0`.
    pub fn survival(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(domain("claim_survival", format!("x must be >= 0, got {x}")));
        }
        Ok(self.sf(x))
    }

    /// Laplace transform `p_hat(s) = E[e^{-s X}]` for `s >= 0`.
    pub fn laplace(&self, s: f64) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(domain("claim_laplace", format!("s must be >= 0, got {s}")));
        }
        Ok(self.laplace_extended(s))
    }

    /// Left end of the half-line on which the transform is finite.
    pub fn laplace_abscissa(&self) -> f64 {
        match &self.kind {
            ClaimKind::Exponential { rate } | ClaimKind::Erlang { rate, .. } => -rate,
            ClaimKind::HyperExponential { rates, .. } => -rates.iter().copied().fold(f64::INFINITY, f64::min),
            ClaimKind::Tabulated(t) => -600.0 / t.support_end(),
        }
    }

    /// Transform at any `s` above the abscissa (negative `s` gives the moment generating function).
    pub fn laplace_extended(&self, s: f64) -> f64 {
        match &self.kind {
            ClaimKind::Exponential { rate } => rate / (rate + s),
            ClaimKind::Erlang { shape, rate } => (rate / (rate + s)).powi(*shape as i32),
            ClaimKind::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * r / (r + s)).sum()
            }
            ClaimKind::Tabulated(t) => t.laplace(s),
        }
    }

    /// `d/ds p_hat(s) = -E[X e^{-sX}]`.
    pub fn laplace_derivative(&self, s: f64) -> f64 {
        match &self.kind {
            ClaimKind::Exponential { rate } => -rate / (rate + s).powi(2),
            ClaimKind::Erlang { shape, rate } => {
                let k = *shape as i32;
                -(k as f64) * rate.powi(k) / (rate + s).powi(k + 1)
            }
            ClaimKind::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(w, r)| -w * r / (r + s).powi(2))
                .sum(),
            ClaimKind::Tabulated(t) => t.laplace_derivative(s),
        }
    }

    /// Upper bound on the density (and on every convolution power of it).
    pub fn density_bound(&self) -> f64 {
        match &self.kind {
            ClaimKind::Exponential { rate } => *rate,
            ClaimKind::Erlang { shape, rate } => {
                if *shape == 1 {
                    *rate
                } else {
                    self.pdf((*shape as f64 - 1.0) / rate)
                }
            }
            ClaimKind::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(w, r)| w * r).sum()
            }
            ClaimKind::Tabulated(t) => t.max_value(),
        }
    }

    /// Density of the `n`-fold convolution `p^{n*}(z)`.
    pub fn convolution_density(&self, n: usize, z: f64) -> Result<f64> {
        Ok(self.log_convolution_density(n, z)?.exp())
    }

    pub fn log_convolution_density(&self, n: usize, z: f64) -> Result<f64> {
        if n < 1 {
            return Err(domain("claim_convolution", "n must be >= 1"));
        }
        if !(z > 0.0) {
            return Err(domain("claim_convolution", format!("z must be > 0, got {z}")));
        }
        Ok(match &self.kind {
            ClaimKind::Exponential { rate } => erlang_log_pdf(n, *rate, z),
            ClaimKind::Erlang { shape, rate } => erlang_log_pdf(n * *shape as usize, *rate, z),
            ClaimKind::HyperExponential { .. } => {
                let mix = self.mixture.as_ref().expect("hyperexponential carries its mixture");
                let w = mix.power(n)?;
                let terms = w
                    .iter()
                    .enumerate()
                    .filter(|(_, wk)| **wk > 0.0)
                    .map(|(j, wk)| wk.ln() + erlang_log_pdf(n + j, mix.rate, z));
                crate::numerics::special::log_sum_exp(terms)
            }
            ClaimKind::Tabulated(t) => t.power_pdf(n, z)?.ln(),
        })
    }

    /// `ln int_0^inf N(z; mean, var) p^{n*}(z) dz` for `n = 0..=n_max`
    /// (`n = 0` is the point mass at zero).
    pub fn smoothed_convolution_logs(&self, mean: f64, var: f64, n_max: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(n_max + 1);
        let mut ws = SmoothingWorkspace::default();
        self.smoothed_convolution_logs_into(mean, var, n_max, &mut out, &mut ws)?;
        Ok(out)
    }

    pub(crate) fn smoothed_convolution_logs_into(
        &self,
        mean: f64,
        var: f64,
        n_max: usize,
        out: &mut Vec<f64>,
        ws: &mut SmoothingWorkspace,
    ) -> Result<()> {
        match &self.kind {
            ClaimKind::Exponential { rate } => {
                gaussian_erlang_logs(mean, var, *rate, n_max, out, &mut ws.erfc);
            }
            ClaimKind::Erlang { shape, rate } => {
                let k = *shape as usize;
                gaussian_erlang_logs(mean, var, *rate, n_max * k, &mut ws.buf, &mut ws.erfc);
                out.clear();
                out.extend((0..=n_max).map(|n| ws.buf[n * k]));
            }
            ClaimKind::HyperExponential { .. } => {
                let mix = self.mixture.as_ref().expect("hyperexponential carries its mixture");
                let kmax = if n_max == 0 { 0 } else { n_max + mix.power(n_max)?.len() };
                gaussian_erlang_logs(mean, var, mix.rate, kmax, &mut ws.buf, &mut ws.erfc);
                out.clear();
                out.push(ws.buf[0]);
                for n in 1..=n_max {
                    let w = mix.power(n)?;
                    let lead = (0..w.len())
                        .map(|j| ws.buf[n + j])
                        .fold(f64::NEG_INFINITY, f64::max);
                    if lead == f64::NEG_INFINITY {
                        out.push(lead);
                        continue;
                    }
                    let s: f64 = w
                        .iter()
                        .enumerate()
                        .map(|(j, wk)| wk * (ws.buf[n + j] - lead).exp())
                        .sum();
                    out.push(lead + s.ln());
                }
            }
            ClaimKind::Tabulated(t) => {
                out.clear();
                out.push(ln_normal_pdf(0.0, mean, var));
                for n in 1..=n_max {
                    out.push(t.smoothed_power(n, mean, var)?.ln());
                }
            }
        }
        Ok(())
    }

    /// Draws one claim from a stream of uniforms on `(0, 1)` by inversion.
    pub fn sample_with(&self, uniform: &mut impl FnMut() -> f64) -> f64 {
        match &self.kind {
            ClaimKind::Exponential { rate } => -uniform().ln() / rate,
            ClaimKind::Erlang { shape, rate } => {
                (0..*shape).map(|_| -uniform().ln()).sum::<f64>() / rate
            }
            ClaimKind::HyperExponential { weights, rates } => {
                let v = uniform();
                let mut acc = 0.0;
                let mut pick = rates.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if v < acc {
                        pick = i;
                        break;
                    }
                }
                -uniform().ln() / rates[pick]
            }
            ClaimKind::Tabulated(t) => t.sample(uniform()),
        }
    }
}

/// Scratch buffers for [`ClaimDistribution::smoothed_convolution_logs_into`].
#[derive(Debug, Default)]
pub(crate) struct SmoothingWorkspace {
    erfc: RepeatedErfc,
    buf: Vec<f64>,
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("must be finite and > 0, got {v}")))
    }
}
