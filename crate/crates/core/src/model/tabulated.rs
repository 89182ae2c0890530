use std::io::Read;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{invalid, Result, RuinError};
use crate::model::ClaimDistribution;
use crate::numerics::special::norm_cdf;

/// Highest convolution power kept on the grid.
pub const MAX_GRID_POWER: usize = 64;

const MASS_TOLERANCE: f64 = 1e-6;
const POWER_TAIL: f64 = 1e-16;
const WINDOW_SDS: f64 = 9.0;

/// Claim density given by its values on the uniform grid `x_i = i h`, `i >= 0`,
/// interpolated linearly and zero past the last node.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    step: f64,
    values: Vec<f64>,
    cumulative: Vec<f64>,
    mean: f64,
    max_value: f64,
    powers: Arc<Vec<OnceLock<Vec<f64>>>>,
}

impl TabulatedDensity {
    /// Builds the table; the trapezoid mass must be within `1e-6` of one and is then
    /// rescaled to exactly one.
    pub fn new(step: f64, values: Vec<f64>) -> Result<Self> {
        Self::build(step, values, MASS_TOLERANCE)
    }

    fn build(step: f64, values: Vec<f64>, mass_tolerance: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(invalid("step", format!("must be finite and > 0, got {step}")));
        }
        if values.len() < 2 {
            return Err(invalid("values", "need at least two grid values"));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("values", format!("value at node {i} is negative or not finite")));
        }
        let mass = trapezoid(step, &values);
        if (mass - 1.0).abs() > mass_tolerance {
            return Err(RuinError::Table(format!(
                "density integrates to {mass}, not 1 within {mass_tolerance}"
            )));
        }
        let values: Vec<f64> = values.into_iter().map(|v| v / mass).collect();
        let mut cumulative = Vec::with_capacity(values.len());
        cumulative.push(0.0);
        let mut mean = 0.0;
        for (i, w) in values.windows(2).enumerate() {
            let a = i as f64 * step;
            cumulative.push(cumulative[i] + 0.5 * step * (w[0] + w[1]));
            mean += step * a * 0.5 * (w[0] + w[1]) + step * step * (w[0] / 6.0 + w[1] / 3.0);
        }
        let max_value = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            step,
            values,
            cumulative,
            mean,
            max_value,
            powers: Arc::new((0..=MAX_GRID_POWER).map(|_| OnceLock::new()).collect()),
        })
    }

    /// Samples a density on `[0, x_max]` with step `h`. The mass check allows for the
    /// `O(h^2)` trapezoid bias of the sampled values.
    pub fn discretize(claims: &ClaimDistribution, step: f64, x_max: f64) -> Result<Self> {
        if !(x_max > step) {
            return Err(invalid("x_max", "must exceed the grid step"));
        }
        let n = (x_max / step).round() as usize;
        let values = (0..=n)
            .map(|i| {
                let x = if i == 0 { f64::MIN_POSITIVE } else { i as f64 * step };
                claims.pdf(x)
            })
            .collect::<Vec<f64>>();
        let peak = values.iter().copied().fold(0.0, f64::max);
        Self::build(step, values, MASS_TOLERANCE.max(step * step * peak))
    }

    /// Reads a two-column `x,p(x)` CSV. The grid must start at zero and be uniform.
    /// A header row and `#` comment lines are allowed.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut xs = Vec::new();
        let mut ps = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| RuinError::Table(e.to_string()))?;
            if rec.len() != 2 {
                return Err(RuinError::Table(format!(
                    "row {}: expected 2 columns, found {}",
                    line + 1,
                    rec.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => {
                    xs.push(v[0]);
                    ps.push(v[1]);
                }
                Err(_) if line == 0 => continue,
                Err(e) => return Err(RuinError::Table(format!("row {}: {e}", line + 1))),
            }
        }
        if xs.len() < 2 {
            return Err(RuinError::Table("need at least two rows".into()));
        }
        let step = xs[1] - xs[0];
        if xs[0].abs() > 1e-12 * step.abs().max(1.0) {
            return Err(RuinError::Table(format!("grid must start at x = 0, got {}", xs[0])));
        }
        for (i, w) in xs.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(RuinError::Table(format!("x not strictly increasing at row {}", i + 2)));
            }
            if ((w[1] - w[0]) - step).abs() > 1e-9 * step {
                return Err(RuinError::Table(format!("x not uniformly spaced at row {}", i + 2)));
            }
        }
        Self::new(step, ps)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| RuinError::Table(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(file)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn support_end(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    pub fn pdf(&self, x: f64) -> f64 {
        interpolate(&self.values, self.step, x)
    }

    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        let last = self.values.len() - 1;
        let pos = x / self.step;
        if pos >= last as f64 {
            return 0.0;
        }
        let i = pos as usize;
        let w = x - i as f64 * self.step;
        let p0 = self.values[i];
        let px = interpolate(&self.values, self.step, x);
        (1.0 - self.cumulative[i] - 0.5 * w * (p0 + px)).max(0.0)
    }

    /// Exact transform of the interpolated density.
    pub fn laplace(&self, s: f64) -> f64 {
        let h = self.step;
        let (a0, a1) = cell_moments(s, h);
        let decay = (-s * h).exp();
        let mut scale = 1.0; // e^{-s x_i}
        let mut sum = 0.0;
        for w in self.values.windows(2) {
            sum += scale * (w[0] * a0 + (w[1] - w[0]) * a1 / h);
            scale *= decay;
        }
        sum
    }

    /// `-sum' h x_i e^{-s x_i} p_i`, the trapezoid rule for the transform's derivative.
    pub fn laplace_derivative(&self, s: f64) -> f64 {
        let h = self.step;
        let n = self.values.len() - 1;
        let mut sum = 0.0;
        for (i, p) in self.values.iter().enumerate() {
            let x = i as f64 * h;
            let wgt = if i == n { 0.5 } else { 1.0 };
            sum += wgt * x * (-s * x).exp() * p;
        }
        -h * sum
    }

    /// Inverse-cdf sample for `v` in `(0, 1)`.
    pub fn sample(&self, v: f64) -> f64 {
        let i = match self.cumulative.partition_point(|c| *c <= v) {
            0 => 0,
            k => (k - 1).min(self.values.len() - 2),
        };
        let rem = (v - self.cumulative[i]).max(0.0);
        let p0 = self.values[i];
        let a = (self.values[i + 1] - p0) / (2.0 * self.step);
        let disc = (p0 * p0 + 4.0 * a * rem).max(0.0);
        let denom = p0 + disc.sqrt();
        let w = if denom > 0.0 { 2.0 * rem / denom } else { 0.0 };
        (i as f64 * self.step + w.min(self.step)).max(f64::MIN_POSITIVE)
    }

    /// Grid values of the `n`-fold convolution, `1 <= n <= 64`.
    pub fn power(&self, n: usize) -> Result<&[f64]> {
        if n == 0 || n > MAX_GRID_POWER {
            return Err(RuinError::TruncationLimit {
                needed: n,
                cap: MAX_GRID_POWER,
            });
        }
        if n == 1 {
            return Ok(&self.values);
        }
        for k in 2..=n {
            if self.powers[k].get().is_some() {
                continue;
            }
            let prev: &[f64] = if k == 2 { &self.values } else { self.powers[k - 1].get().expect("filled in order") };
            let next = self.convolve_step(prev);
            let _ = self.powers[k].set(next);
        }
        Ok(self.powers[n].get().expect("just filled"))
    }

    pub fn power_pdf(&self, n: usize, z: f64) -> Result<f64> {
        Ok(interpolate(self.power(n)?, self.step, z))
    }

    /// `int_0^inf N(z; mean, var) p^{n*}(z) dz` on the interpolated grid density.
    pub fn smoothed_power(&self, n: usize, mean: f64, var: f64) -> Result<f64> {
        let q = self.power(n)?;
        let h = self.step;
        let sd = var.sqrt();
        let last = q.len() - 1;
        let lo = ((mean - WINDOW_SDS * sd) / h).floor().max(0.0);
        let hi = ((mean + WINDOW_SDS * sd) / h).ceil().min(last as f64);
        if lo > hi {
            return Ok(0.0);
        }
        let (lo, hi) = (lo as usize, hi as usize);
        if sd >= 2.0 * h {
            let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
            let mut sum = 0.0;
            for (k, qk) in q.iter().enumerate().take(hi + 1).skip(lo) {
                let d = (k as f64 * h - mean) / sd;
                let wgt = if k == 0 || k == last { 0.5 } else { 1.0 };
                sum += wgt * qk * (-0.5 * d * d).exp();
            }
            return Ok(h * norm * sum);
        }
        // exact Gaussian times piecewise-linear on each cell
        let mut sum = 0.0;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for k in lo..hi {
            let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
            let slope = (q[k + 1] - q[k]) / h;
            let icpt = q[k] - slope * a;
            let (ta, tb) = ((a - mean) / sd, (b - mean) / sd);
            let mass = if ta > 0.0 { norm_cdf(-ta) - norm_cdf(-tb) } else { norm_cdf(tb) - norm_cdf(ta) };
            let first = mean * mass + sd * (phi(ta) - phi(tb));
            sum += icpt * mass + slope * first;
        }
        Ok(sum.max(0.0))
    }

    fn convolve_step(&self, prev: &[f64]) -> Vec<f64> {
        let p = &self.values;
        let h = self.step;
        let len = prev.len() + p.len() - 1;
        let size = len.next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let pad = |v: &[f64]| {
            let mut buf: Vec<Complex<f64>> = v.iter().map(|x| Complex::new(*x, 0.0)).collect();
            buf.resize(size, Complex::new(0.0, 0.0));
            buf
        };
        let mut a = pad(prev);
        let mut b = pad(p);
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        let scale = h / size as f64;
        let floor = 1e-14 * self.max_value;
        let mut out: Vec<f64> = (0..len)
            .map(|k| {
                let mut v = a[k].re * scale;
                let qk = prev.get(k).copied().unwrap_or(0.0);
                let pk = p.get(k).copied().unwrap_or(0.0);
                v -= 0.5 * h * (prev[0] * pk + qk * p[0]);
                if v < floor {
                    0.0
                } else {
                    v
                }
            })
            .collect();
        out[0] = 0.0;
        // trim the negligible right tail
        let mut tail = 0.0;
        let mut keep = out.len();
        while keep > 2 {
            tail += h * out[keep - 1];
            if tail > POWER_TAIL {
                break;
            }
            keep -= 1;
        }
        out.truncate(keep.max(2));
        out
    }
}

fn trapezoid(h: f64, v: &[f64]) -> f64 {
    let inner: f64 = v.iter().sum();
    h * (inner - 0.5 * (v[0] + v[v.len() - 1]))
}

fn interpolate(v: &[f64], h: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let pos = x / h;
    let last = v.len() - 1;
    if pos >= last as f64 {
        return if pos == last as f64 { v[last] } else { 0.0 };
    }
    let i = pos as usize;
    let f = pos - i as f64;
    v[i] + f * (v[i + 1] - v[i])
}

/// `(int_0^h e^{-s w} dw, int_0^h w e^{-s w} dw)`.
fn cell_moments(s: f64, h: f64) -> (f64, f64) {
    let y = s * h;
    if y.abs() < 1e-3 {
        let a0 = h * (1.0 - y / 2.0 + y * y / 6.0 - y * y * y / 24.0);
        let a1 = h * h * (0.5 - y / 3.0 + y * y / 8.0 - y * y * y / 30.0);
        return (a0, a1);
    }
    let e = (-y).exp();
    let a0 = -(-y).exp_m1() / s;
    let a1 = (1.0 - e * (1.0 + y)) / (s * s);
    (a0, a1)
}
