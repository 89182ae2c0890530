//! Globally adaptive Gauss-Kronrod (7/15) integration.
//!
//! All integrals in the crate go through [`integrate_vec`]: the integrand fills a
//! vector of component values (and optionally the error of any inner
//! quadrature it performed), so families such as `n = 0..=N` are integrated in
//! one pass with a shared subdivision. Subdivision order is fixed, so results are
//! bit-stable for a given [`QuadratureSpec`].

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, RuinError};
use crate::numerics::special::upper_quantile;

/// Tolerances, truncation orders and cutoffs for every integral and series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maximum bisection depth of any subinterval.
    pub max_depth: u32,
    /// Hard cap on claim-count series length; exceeding it is an error.
    pub n_max: usize,
    /// Tail mass allowed when truncating `dx` integrals.
    pub x_cutoff_mass: f64,
    /// Tail mass allowed when truncating time integrals.
    pub t_cutoff_mass: f64,
    /// Tail mass allowed when truncating claim-count series.
    pub series_tail_mass: f64,
    /// Pre-ruin densities in `[-negative_slack, 0)` are clamped to zero.
    pub negative_slack: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-12,
            max_depth: 40,
            n_max: 2000,
            x_cutoff_mass: 1e-10,
            t_cutoff_mass: 1e-10,
            series_tail_mass: 1e-10,
            negative_slack: 1e-9,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("rel_tol", self.rel_tol)?;
        positive("abs_tol", self.abs_tol)?;
        positive("negative_slack", self.negative_slack)?;
        if self.n_max < 1 {
            return Err(invalid("n_max", "must be >= 1"));
        }
        if self.max_depth < 1 {
            return Err(invalid("max_depth", "must be >= 1"));
        }
        for (name, v) in [
            ("x_cutoff_mass", self.x_cutoff_mass),
            ("t_cutoff_mass", self.t_cutoff_mass),
            ("series_tail_mass", self.series_tail_mass),
        ] {
            if !(v > 0.0 && v <= 1e-4) {
                return Err(invalid(name, format!("must lie in (0, 1e-4], got {v}")));
            }
        }
        Ok(())
    }

    /// Same spec with every tolerance and cutoff mass divided by `factor`.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            abs_tol: self.abs_tol / factor,
            x_cutoff_mass: self.x_cutoff_mass / factor,
            t_cutoff_mass: self.t_cutoff_mass / factor,
            series_tail_mass: self.series_tail_mass / factor,
            ..*self
        }
    }

    /// Same spec with relative/absolute tolerances replaced.
    pub fn with_tolerances(&self, rel_tol: f64, abs_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol,
            ..*self
        }
    }

    /// Number of standard deviations beyond which a Gaussian has mass below `x_cutoff_mass`.
    pub fn gaussian_cutoff(&self) -> f64 {
        upper_quantile(self.x_cutoff_mass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecEstimate {
    pub values: Vec<f64>,
    pub errors: Vec<f64>,
}

impl VecEstimate {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
            errors: vec![0.0; len],
        }
    }

    pub fn get(&self, i: usize) -> Estimate {
        Estimate {
            value: self.values[i],
            error: self.errors[i],
        }
    }

    pub fn add_assign(&mut self, other: &VecEstimate) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for v in self.values.iter_mut() {
            *v *= k;
        }
        for e in self.errors.iter_mut() {
            *e *= k.abs();
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_SEGMENTS: usize = 5000;

struct Segment {
    a: f64,
    b: f64,
    depth: u32,
    slot: usize,
}

struct Workspace {
    len: usize,
    fvals: Vec<f64>,
    ferrs: Vec<f64>,
}

impl Workspace {
    fn new(len: usize) -> Self {
        Self {
            len,
            fvals: vec![0.0; 15 * len],
            ferrs: vec![0.0; 15 * len],
        }
    }
}

fn node_abscissae(a: f64, b: f64) -> [f64; 15] {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut xs = [0.0; 15];
    for j in 0..7 {
        xs[2 * j] = c - h * XGK[j];
        xs[2 * j + 1] = c + h * XGK[j];
    }
    xs[14] = c;
    xs
}

fn gk15<F>(
    f: &mut F,
    a: f64,
    b: f64,
    ws: &mut Workspace,
    val: &mut [f64],
    err: &mut [f64],
    axis: &str,
) -> Result<()>
where
    F: FnMut(f64, &mut [f64], &mut [f64]) -> Result<()>,
{
    let len = ws.len;
    let xs = node_abscissae(a, b);
    ws.ferrs.iter_mut().for_each(|e| *e = 0.0);
    for (k, &x) in xs.iter().enumerate() {
        let (v, e) = (
            &mut ws.fvals[k * len..(k + 1) * len],
            &mut ws.ferrs[k * len..(k + 1) * len],
        );
        v.iter_mut().for_each(|z| *z = 0.0);
        f(x, v, e)?;
        if let Some(bad) = v.iter().find(|z| !z.is_finite()) {
            let _ = bad;
            return Err(RuinError::NonFinite {
                axis: axis.to_string(),
                at: x,
            });
        }
    }
    let h = 0.5 * (b - a);
    let wk = |k: usize| if k == 14 { WGK[7] } else { WGK[k / 2] };
    for c in 0..len {
        let fv = |k: usize| ws.fvals[k * len + c];
        let mut resk = 0.0;
        let mut resabs = 0.0;
        let mut inner = 0.0;
        for k in 0..15 {
            resk += wk(k) * fv(k);
            resabs += wk(k) * fv(k).abs();
            inner += wk(k) * ws.ferrs[k * len + c].abs();
        }
        let mut resg = WG[3] * fv(14);
        for (g, j) in [1usize, 3, 5].iter().enumerate() {
            resg += WG[g] * (fv(2 * j) + fv(2 * j + 1));
        }
        let mean = 0.5 * resk;
        let mut resasc = 0.0;
        for k in 0..15 {
            resasc += wk(k) * (fv(k) - mean).abs();
        }
        let (resk, resabs, resasc) = (resk * h, resabs * h.abs(), resasc * h.abs());
        let mut e = ((resk - resg * h).abs()).max(0.0);
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        val[c] = resk;
        err[c] = e + inner * h.abs();
    }
    Ok(())
}

/// Adaptive integration of a vector-valued integrand over `[points[0], points[last]]`.
///
/// `points` are initial breakpoints (sorted, at least two). The integrand writes
/// its values into the first slice and, when it performs an inner quadrature, the
/// absolute error of each component into the second (pre-zeroed) slice.
/// Convergence requires every component to satisfy
/// `err <= max(abs_tol, rel_tol * |value|)`.
pub fn integrate_vec<F>(
    mut f: F,
    points: &[f64],
    len: usize,
    spec: &QuadratureSpec,
    axis: &str,
) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64], &mut [f64]) -> Result<()>,
{
    let mut pts: Vec<f64> = points.to_vec();
    pts.dedup_by(|b, a| *b <= *a);
    if pts.len() < 2 || len == 0 {
        return Ok(VecEstimate::zeros(len));
    }
    let mut ws = Workspace::new(len);
    let mut vals: Vec<f64> = Vec::new();
    let mut errs: Vec<f64> = Vec::new();
    let mut segs: Vec<Segment> = Vec::new();
    let mut tmp_v = vec![0.0; len];
    let mut tmp_e = vec![0.0; len];

    let push = |segs: &mut Vec<Segment>,
                vals: &mut Vec<f64>,
                errs: &mut Vec<f64>,
                a: f64,
                b: f64,
                depth: u32,
                v: &[f64],
                e: &[f64]| {
        let slot = segs.len();
        vals.extend_from_slice(v);
        errs.extend_from_slice(e);
        segs.push(Segment { a, b, depth, slot });
    };

    for w in pts.windows(2) {
        gk15(&mut f, w[0], w[1], &mut ws, &mut tmp_v, &mut tmp_e, axis)?;
        push(&mut segs, &mut vals, &mut errs, w[0], w[1], 0, &tmp_v, &tmp_e);
    }

    let mut total_v = vec![0.0; len];
    let mut total_e = vec![0.0; len];
    let mut tol = vec![0.0; len];
    loop {
        total_v.iter_mut().for_each(|x| *x = 0.0);
        total_e.iter_mut().for_each(|x| *x = 0.0);
        for s in &segs {
            for c in 0..len {
                total_v[c] += vals[s.slot * len + c];
                total_e[c] += errs[s.slot * len + c];
            }
        }
        let mut converged = true;
        for c in 0..len {
            tol[c] = spec.abs_tol.max(spec.rel_tol * total_v[c].abs());
            if total_e[c] > tol[c] {
                converged = false;
            }
        }
        if converged {
            return Ok(VecEstimate {
                values: total_v,
                errors: total_e,
            });
        }
        // pick the segment with the largest tolerance-scaled error
        let mut best = 0;
        let mut best_score = -1.0;
        for (i, s) in segs.iter().enumerate() {
            let mut score: f64 = 0.0;
            for c in 0..len {
                score = score.max(errs[s.slot * len + c] / tol[c]);
            }
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        let seg = &segs[best];
        let worst = (0..len)
            .map(|c| (total_e[c], tol[c]))
            .max_by(|x, y| (x.0 / x.1).total_cmp(&(y.0 / y.1)))
            .unwrap();
        if seg.depth >= spec.max_depth || segs.len() >= MAX_SEGMENTS {
            return Err(RuinError::NoConvergence {
                axis: axis.to_string(),
                error: worst.0,
                tolerance: worst.1,
            });
        }
        let (a, b, depth, slot) = (seg.a, seg.b, seg.depth, seg.slot);
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            return Err(RuinError::NoConvergence {
                axis: axis.to_string(),
                error: worst.0,
                tolerance: worst.1,
            });
        }
        gk15(&mut f, a, m, &mut ws, &mut tmp_v, &mut tmp_e, axis)?;
        vals[slot * len..(slot + 1) * len].copy_from_slice(&tmp_v);
        errs[slot * len..(slot + 1) * len].copy_from_slice(&tmp_e);
        segs[best] = Segment {
            a,
            b: m,
            depth: depth + 1,
            slot,
        };
        gk15(&mut f, m, b, &mut ws, &mut tmp_v, &mut tmp_e, axis)?;
        push(&mut segs, &mut vals, &mut errs, m, b, depth + 1, &tmp_v, &tmp_e);
    }
}

/// Scalar integral of a plain function over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    integrate_points(&mut f, &[a, b], spec)
}

/// Scalar integral with initial breakpoints.
pub fn integrate_points<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let r = integrate_vec(
        |x, v, _| {
            v[0] = f(x);
            Ok(())
        },
        points,
        1,
        spec,
        "scalar",
    )?;
    Ok(r.get(0))
}

/// Scalar integral of a fallible integrand that reports its own error.
pub fn integrate_nested<F>(
    mut f: F,
    points: &[f64],
    spec: &QuadratureSpec,
    axis: &str,
) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<Estimate>,
{
    let r = integrate_vec(
        |x, v, e| {
            let est = f(x)?;
            v[0] = est.value;
            e[0] = est.error;
            Ok(())
        },
        points,
        1,
        spec,
        axis,
    )?;
    Ok(r.get(0))
}

/// Integrates over `[a, b]` after substituting `t = a + v^2`, which removes an
/// integrable `(t - a)^{-1/2}` singularity and resolves essential-singular
/// onsets `exp(-k / (t - a))` near the left endpoint.
pub fn integrate_vec_sqrt_left<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    len: usize,
    spec: &QuadratureSpec,
    axis: &str,
) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64], &mut [f64]) -> Result<()>,
{
    let vmax = (b - a).sqrt();
    let mut pts = vec![0.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&t| t > a && t < b)
            .map(|&t| (t - a).sqrt()),
    );
    pts.push(vmax);
    pts.sort_by(f64::total_cmp);
    integrate_vec(
        |v, out, err| {
            f(a + v * v, out, err)?;
            let jac = 2.0 * v;
            out.iter_mut().for_each(|z| *z *= jac);
            err.iter_mut().for_each(|z| *z *= jac);
            Ok(())
        },
        &pts,
        len,
        spec,
        axis,
    )
}

/// Mirror of [`integrate_vec_sqrt_left`] with `t = b - w^2`.
pub fn integrate_vec_sqrt_right<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    len: usize,
    spec: &QuadratureSpec,
    axis: &str,
) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64], &mut [f64]) -> Result<()>,
{
    let wmax = (b - a).sqrt();
    let mut pts = vec![0.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&t| t > a && t < b)
            .map(|&t| (b - t).sqrt()),
    );
    pts.push(wmax);
    pts.sort_by(f64::total_cmp);
    integrate_vec(
        |w, out, err| {
            f(b - w * w, out, err)?;
            let jac = 2.0 * w;
            out.iter_mut().for_each(|z| *z *= jac);
            err.iter_mut().for_each(|z| *z *= jac);
            Ok(())
        },
        &pts,
        len,
        spec,
        axis,
    )
}

/// Splits `[a, b]` at its midpoint and applies the square-root substitution
/// towards both endpoints.
pub fn integrate_vec_sqrt_both<F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    len: usize,
    spec: &QuadratureSpec,
    axis: &str,
) -> Result<VecEstimate>
where
    F: FnMut(f64, &mut [f64], &mut [f64]) -> Result<()>,
{
    let m = 0.5 * (a + b);
    let mut left = integrate_vec_sqrt_left(&mut f, a, m, breaks, len, spec, axis)?;
    let right = integrate_vec_sqrt_right(&mut f, m, b, breaks, len, spec, axis)?;
    left.add_assign(&right);
    Ok(left)
}

/// Envelope asserted by the caller for a semi-infinite integrand on `(a, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decay {
    /// `|f(x)| <= scale * exp(-rate * (x - a))`.
    Exponential { rate: f64, scale: f64 },
    /// `|f(x)| <= scale * exp(-(x - center)^2 / (2 sd^2))` for `x > center`.
    Gaussian { center: f64, sd: f64, scale: f64 },
}

/// Integral over `(a, inf)`, truncated where the envelope leaves less than
/// `x_cutoff_mass` of tail. The envelope is checked at the cutoff; an integrand
/// that exceeds it there fails with `BadDecayHint`. The returned error includes
/// the tail allowance.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    decay: Decay,
    spec: &QuadratureSpec,
) -> Result<Estimate> {
    let mass = spec.x_cutoff_mass;
    let (b, mut points) = match decay {
        Decay::Exponential { rate, scale } => {
            if !(rate > 0.0 && scale > 0.0) {
                return Err(invalid("decay", "rate and scale must be > 0"));
            }
            let len = ((scale / (rate * mass)).max(1.0)).ln() / rate;
            let b = a + len.max(1.0 / rate);
            let mut pts = vec![a];
            let mut p = a + 1.0 / rate;
            while p < b {
                pts.push(p);
                p = a + 2.0 * (p - a);
            }
            (b, pts)
        }
        Decay::Gaussian { center, sd, scale } => {
            if !(sd > 0.0 && scale > 0.0) {
                return Err(invalid("decay", "sd and scale must be > 0"));
            }
            let target = (mass / (scale * sd * (2.0 * std::f64::consts::PI).sqrt())).min(0.25);
            let k = upper_quantile(target).max(1.0);
            let b = (center + k * sd).max(a + sd);
            let mut pts = vec![a];
            for z in [-6.0, -2.0, 0.0, 2.0] {
                let p = center + z * sd;
                if p > a && p < b {
                    pts.push(p);
                }
            }
            (b, pts)
        }
    };
    points.push(b);
    let fb = f(b).abs();
    let tail = match decay {
        Decay::Exponential { rate, .. } => fb / rate,
        Decay::Gaussian { center, sd, .. } => {
            let k = ((b - center) / sd).max(1.0);
            fb * sd / k
        }
    };
    if !(tail <= mass) {
        return Err(RuinError::BadDecayHint { tail, mass });
    }
    let mut est = integrate_points(&mut f, &points, spec)?;
    est.error += mass;
    Ok(est)
}
