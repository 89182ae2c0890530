//! Special functions: scaled complementary error function, normal tails and
//! repeated integrals of the error function.

use statrs::function::erf;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_PI_OVER_2: f64 = 1.253_314_137_315_500_3;

pub fn erfc(x: f64) -> f64 {
    erf::erfc(x)
}

/// `exp(x^2) * erfc(x)`, accurate for large positive `x`.
pub fn erfcx(x: f64) -> f64 {
    if x < 25.0 {
        return (x * x).exp() * erf::erfc(x);
    }
    // Laplace continued fraction, converges in a handful of terms this far out.
    let mut frac = x;
    for k in (1..=40).rev() {
        frac = x + (k as f64 * 0.5) / frac;
    }
    1.0 / (SQRT_PI * frac)
}

/// Standard normal cdf.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// `ln Phi(x)`, finite far into the lower tail.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -5.0 {
        norm_cdf(x).ln()
    } else {
        (0.5 * erfcx(-x / std::f64::consts::SQRT_2)).ln() - 0.5 * x * x
    }
}

/// `k` such that `Phi(-k) = mass`.
pub fn upper_quantile(mass: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * mass)
}

pub fn ln_factorial(n: usize) -> f64 {
    statrs::function::factorial::ln_factorial(n as u64)
}

/// Log of the normal density `N(z; mean, var)`.
pub fn ln_normal_pdf(z: f64, mean: f64, var: f64) -> f64 {
    let d = z - mean;
    -d * d / (2.0 * var) - 0.5 * var.ln() - LN_SQRT_2PI
}

/// Logarithms of the repeated erfc integrals
/// `Hh_j(x) = int_x^inf (t - x)^j / j! exp(-t^2/2) dt` for `j = 0..=jmax`.
///
/// For `x > 0` the values are scaled by `exp(x^2/2)`; `ln Hh_j(x) = log_values[j] - offset`
/// with `offset = x^2/2`. Keeping the offset separate lets callers cancel it
/// against their own Gaussian prefactor exactly.
#[derive(Debug, Clone, Default)]
pub struct RepeatedErfc {
    pub offset: f64,
    pub log_values: Vec<f64>,
}

pub fn log_repeated_erfc(x: f64, jmax: usize) -> RepeatedErfc {
    let mut out = RepeatedErfc {
        offset: 0.0,
        log_values: Vec::with_capacity(jmax + 1),
    };
    log_repeated_erfc_into(x, jmax, &mut out);
    out
}

/// Same as [`log_repeated_erfc`] but reuses the output buffer.
pub fn log_repeated_erfc_into(x: f64, jmax: usize, out: &mut RepeatedErfc) {
    out.log_values.clear();
    // The recurrence j Hh_j = Hh_{j-2} - x Hh_{j-1} has Hh_j(x) as its dominant
    // solution for x <= 0 and as its minimal solution for x > 0. The spurious
    // solution grows like exp(2 x sqrt(j)) relative to the wanted one.
    let forward = x <= 0.0 || 2.0 * x * ((jmax + 1) as f64).sqrt() <= 8.0;
    let (offset, ln_h0, ratio0) = if x > 0.0 {
        let hs0 = SQRT_PI_OVER_2 * erfcx(x / std::f64::consts::SQRT_2);
        (0.5 * x * x, hs0.ln(), hs0)
    } else {
        let h0 = SQRT_PI_OVER_2 * erfc(x / std::f64::consts::SQRT_2);
        // Hh_0 / Hh_{-1} with Hh_{-1} = exp(-x^2/2); may overflow to inf, which is harmless.
        (0.0, h0.ln(), h0 * (0.5 * x * x).exp())
    };
    out.offset = offset;
    out.log_values.push(ln_h0);
    if jmax == 0 {
        return;
    }
    if forward {
        let mut ratio = ratio0;
        let mut acc = ln_h0;
        let mut ok = true;
        for j in 1..=jmax {
            ratio = (1.0 / ratio - x) / j as f64;
            if !(ratio > 0.0) {
                ok = false;
                break;
            }
            acc += ratio.ln();
            out.log_values.push(acc);
        }
        if ok {
            return;
        }
        out.log_values.truncate(1);
    }
    // Backward continued fraction: rho_j = Hh_j / Hh_{j-1} = 1 / (x + (j+1) rho_{j+1}).
    let sj = ((jmax + 1) as f64).sqrt();
    let depth = (sj + 20.0 / x).powi(2).ceil() as usize;
    let start = depth.clamp(jmax + 32, jmax + 2_000_000);
    let mut rho = 0.0;
    for j in (jmax + 1..=start).rev() {
        rho = 1.0 / (x + (j + 1) as f64 * rho);
    }
    let mut ratios = vec![0.0; jmax + 1];
    for j in (1..=jmax).rev() {
        rho = 1.0 / (x + (j + 1) as f64 * rho);
        ratios[j] = rho;
    }
    let mut acc = ln_h0;
    for r in ratios.iter().skip(1) {
        acc += r.ln();
        out.log_values.push(acc);
    }
}

/// Stable `ln(sum(exp(v)))`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hh_by_quadrature(x: f64, j: usize) -> f64 {
        // composite Simpson on [x, x + 40] in t - x
        let n = 200_000;
        let h = 40.0 / n as f64;
        let lnj = ln_factorial(j);
        let f = |w: f64| {
            if w == 0.0 {
                if j == 0 {
                    (-(x * x) / 2.0).exp()
                } else {
                    0.0
                }
            } else {
                (j as f64 * w.ln() - lnj - (x + w) * (x + w) / 2.0).exp()
            }
        };
        let mut s = f(0.0) + f(40.0);
        for i in 1..n {
            let w = i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(w);
        }
        s * h / 3.0
    }

    #[test]
    fn erfcx_continuous_at_switch() {
        let below = erfcx(25.0 - 1e-9);
        let above = erfcx(25.0);
        assert!((below / above - 1.0).abs() < 1e-8);
        assert!((erfcx(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn repeated_erfc_matches_quadrature() {
        for &x in &[-6.0, -1.5, -0.2, 0.0, 0.01, 0.4, 1.0, 3.0, 8.0] {
            let seq = log_repeated_erfc(x, 40);
            for &j in &[0usize, 1, 2, 5, 13, 40] {
                let exact = hh_by_quadrature(x, j);
                let got = (seq.log_values[j] - seq.offset).exp();
                assert!(
                    (got / exact - 1.0).abs() < 1e-9,
                    "x={x} j={j} got={got:e} exact={exact:e}"
                );
            }
        }
    }

    #[test]
    fn repeated_erfc_recurrence_holds_for_long_sequences() {
        for &x in &[-12.0, 0.05, 0.7, 25.0] {
            let seq = log_repeated_erfc(x, 400);
            let v = |j: usize| (seq.log_values[j] - seq.offset).exp();
            for j in [2usize, 100, 399] {
                // both sides relative to Hh_{j-2}, so deep values do not underflow
                let base = seq.log_values[j - 2];
                let lhs = j as f64 * (seq.log_values[j] - base).exp();
                let rhs = 1.0 - x * (seq.log_values[j - 1] - base).exp();
                assert!((lhs - rhs).abs() < 1e-10, "x={x} j={j} {lhs:e} {rhs:e}");
                assert!(v(j).is_finite());
            }
        }
    }

    #[test]
    fn ln_norm_cdf_deep_tail() {
        assert!((ln_norm_cdf(0.0) - 0.5f64.ln()).abs() < 1e-15);
        // Phi(-40) ~ exp(-800) / (40 sqrt(2 pi))
        let approx = -800.0 - (40.0 * (2.0 * std::f64::consts::PI).sqrt()).ln();
        assert!((ln_norm_cdf(-40.0) - approx).abs() < 1e-3);
        assert!((upper_quantile(0.5)).abs() < 1e-12);
        assert!((norm_cdf(-upper_quantile(1e-10)) / 1e-10 - 1.0).abs() < 1e-8);
    }
}
