use crate::numerics::special::ln_factorial;

/// Smallest `N` with `sum_{n > N} e^{-m} m^n / n! <= eps`, found by direct summation.
pub fn poisson_series_truncation(lambda_t: f64, eps: f64) -> usize {
    assert!(lambda_t >= 0.0 && lambda_t.is_finite(), "lambda_t must be finite and >= 0");
    assert!(eps > 0.0 && eps < 1.0, "eps must lie in (0, 1)");
    if lambda_t == 0.0 {
        return 0;
    }
    // pmf until it is far below eps and past the mode
    let ln_m = lambda_t.ln();
    let hi = (lambda_t + 40.0 * lambda_t.sqrt() + 60.0).ceil() as usize;
    let pmf: Vec<f64> = (0..=hi)
        .map(|n| (n as f64 * ln_m - lambda_t - ln_factorial(n)).exp())
        .collect();
    // tail[N] = sum_{n > N} pmf[n], accumulated from the far end for accuracy
    let mut tail = vec![0.0; hi + 1];
    let mut acc = 0.0;
    for n in (0..hi).rev() {
        acc += pmf[n + 1];
        tail[n] = acc;
    }
    tail.iter().position(|&t| t <= eps).unwrap_or(hi)
}

/// Bound on the claim-count tail of any functional `E[r^{N} e^{-delta T}; N > n_cut]`
/// with `T` a stopping time: `N(T) > n_cut` forces the `(n_cut+1)`-th claim arrival
/// before `T`, whose discounted expectation is `(lambda/(lambda+delta))^{n_cut+1}`.
pub fn claim_count_tail_bound(r: f64, lambda: f64, delta: f64, n_cut: usize) -> f64 {
    (r * lambda / (lambda + delta)).powi(n_cut as i32 + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tail_direct(m: f64, n_cut: usize) -> f64 {
        // plain forward summation of the terms beyond n_cut
        let mut term = (-m).exp();
        for n in 1..=n_cut {
            term *= m / n as f64;
        }
        let mut s = 0.0;
        for n in n_cut + 1..n_cut + 400 {
            term *= m / n as f64;
            s += term;
        }
        s
    }

    fn minimal_by_oracle(m: f64, eps: f64) -> usize {
        (0..).find(|&n| tail_direct(m, n) <= eps).unwrap()
    }

    #[test]
    fn zero_rate_is_zero() {
        assert_eq!(poisson_series_truncation(0.0, 1e-10), 0);
    }

    #[test]
    fn matches_direct_summation() {
        for (m, eps) in [(1.0, 1e-10), (10.0, 1e-8), (0.3, 1e-6), (55.0, 1e-10)] {
            assert_eq!(poisson_series_truncation(m, eps), minimal_by_oracle(m, eps), "m={m}");
        }
        // frozen values for the worked examples
        assert_eq!(poisson_series_truncation(1.0, 1e-10), 12);
        assert_eq!(poisson_series_truncation(10.0, 1e-8), 32);
    }

    #[test]
    fn monotone_in_rate_and_precision() {
        let mut last = 0;
        for i in 0..60 {
            let n = poisson_series_truncation(i as f64 * 0.7, 1e-9);
            assert!(n >= last);
            last = n;
        }
        let mut last = 0;
        for k in 1..14 {
            let n = poisson_series_truncation(3.0, 10f64.powi(-k));
            assert!(n >= last);
            last = n;
        }
    }
}
