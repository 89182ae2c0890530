//! Acceptance suite on the desk model (u=1, c=2, lambda=1, sigma=1, Exp(1) claims).
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ruin_core::kernels::{exp_rho_series, g_density, g_log_density, hitting_bin_masses, hitting_total_mass, hitting_transform};
use ruin_core::lundberg::{lundberg_f, root_tolerance};
use ruin_core::montecarlo::{martingale_check, simulate_hitting, simulate_ruin, SimulationConfig};
use ruin_core::numerics::{integrate_semi_infinite, Decay, Estimate};
use ruin_core::preruin::{h_density, h_vector, survival_mass, PreRuinQuery};
use ruin_core::ruin_density::{
    log_omega_d_zero, omega_d_zero, omega_s_vector, omega_vector, phi_transform, psi_balance_vector, psi_vector,
    ruin_probability, RuinCause,
};
use ruin_core::{solve_rho, ClaimDistribution, ModelParams, QuadratureSpec};

fn desk() -> ModelParams {
    ModelParams::new(1.0, 2.0, 1.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
}

fn mc(paths: usize, horizon: f64) -> SimulationConfig {
    SimulationConfig {
        paths,
        horizon,
        seed: 0xACCE_0001,
        ..SimulationConfig::default()
    }
}

/// Failure messages collected by one criterion.
#[derive(Default)]
struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

type Body = fn(&mut Checks) -> Result<(), String>;

fn run(id: u32, title: &str, limit: Duration, body: Body) -> bool {
    let start = Instant::now();
    let mut checks = Checks::default();
    if let Err(e) = body(&mut checks) {
        checks.failures.push(format!("error: {e}"));
    }
    let elapsed = start.elapsed();
    if elapsed > limit {
        checks.failures.push(format!("runtime {elapsed:.1?} over {limit:?}"));
    }
    let pass = checks.failures.is_empty();
    println!(
        "criterion {id} {}: {title} [{elapsed:.1?}]{}",
        if pass { "PASS" } else { "FAIL" },
        if checks.notes.is_empty() { String::new() } else { format!(" ({})", checks.notes.join("; ")) }
    );
    for f in &checks.failures {
        println!("    {f}");
    }
    pass
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Positive root of `a s^3 + b s^2 + c s + d` via the trigonometric / Cardano solution.
fn cubic_positive_root(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let (b, c, d) = (b / a, c / a, d / a);
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let roots: Vec<f64> = if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    };
    roots
        .into_iter()
        .map(|y| y - b / 3.0)
        .filter(|s| *s > 0.0)
        .fold(f64::NAN, f64::min)
}

fn lundberg_root(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let root = solve_rho(&m, 1.0, 0.1).map_err(err)?;
    // 0.5 s^2 (1 + s) + 2 s (1 + s) - 1.1 (1 + s) + 1 = 0
    let want = cubic_positive_root(0.5, 2.5, 0.9, -0.1);
    c.check((root.rho - want).abs() <= 1e-10, || format!("rho {} vs cubic {want}", root.rho));
    let resid = lundberg_f(&m, 1.0, 0.1, root.rho).map_err(err)?;
    c.check(resid.abs() <= 1e-12, || format!("residual {resid:e}"));
    c.note(format!("rho={:.12}", root.rho));

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let claims = match i % 3 {
            0 => ClaimDistribution::exponential(rng.random_range(0.2..5.0)),
            1 => ClaimDistribution::erlang(rng.random_range(1..6), rng.random_range(0.5..5.0)),
            _ => {
                let w = rng.random_range(0.05..0.95);
                ClaimDistribution::hyper_exponential(vec![w, 1.0 - w], vec![rng.random_range(0.2..2.0), rng.random_range(2.0..10.0)])
            }
        }
        .map_err(err)?;
        let lambda = rng.random_range(0.1..3.0);
        let c_min = lambda * claims.mean();
        let model = ModelParams::new(
            rng.random_range(0.1..5.0),
            c_min * rng.random_range(1.05..3.0),
            lambda,
            rng.random_range(0.05..2.0),
            claims,
        )
        .map_err(err)?;
        let (r, delta) = (rng.random_range(0.01..=1.0), rng.random_range(1e-3..5.0));
        let root = solve_rho(&model, r, delta).map_err(err)?;
        let resid = lundberg_f(&model, r, delta, root.rho).map_err(err)?.abs();
        let tol = root_tolerance(&model, delta);
        worst = worst.max(resid / tol);
        c.check(root.rho > 0.0 && resid <= tol, || format!("draw {i}: residual {resid:e} over {tol:e}"));
    }
    c.note(format!("sweep worst residual/tol={worst:.2e}"));
    Ok(())
}

fn exp_rho_identity(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let mut worst: f64 = 0.0;
    for x in [0.5, 1.0, 2.0] {
        for delta in [0.1, 0.5, 1.0] {
            for r in [0.5, 0.9, 1.0] {
                let rho = solve_rho(&m, r, delta).map_err(err)?.rho;
                let s = exp_rho_series(&m, r, delta, x, &spec).map_err(err)?;
                let gap = (s.value - (-rho * x).exp()).abs();
                worst = worst.max(gap);
                c.check(gap <= 1e-5, || format!("x={x} delta={delta} r={r}: gap {gap:e}"));
            }
        }
    }
    c.note(format!("max gap {worst:.1e}"));
    Ok(())
}

fn hitting_law(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let mass = hitting_total_mass(&m, 1.0, &spec).map_err(err)?;
    c.check((mass.value - 1.0).abs() <= 1e-4, || format!("total mass {}", mass.value));
    let rho = solve_rho(&m, 0.9, 0.2).map_err(err)?.rho;
    let tr = hitting_transform(&m, 0.9, 0.2, 1.0, &spec).map_err(err)?;
    c.check((tr.value - (-rho).exp()).abs() <= 1e-5, || format!("transform {} vs {}", tr.value, (-rho).exp()));

    let edges = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.5, 2.0, 3.0, 5.0, 10.0];
    let n_max = 5;
    let exact = hitting_bin_masses(&m, 1.0, &edges, n_max, &spec).map_err(err)?;
    let paths = 100_000;
    let sim = simulate_hitting(&m, 2.0, &mc(paths, 10.0)).map_err(err)?;
    let counts = sim.joint_counts(n_max, &edges);
    let (mut good, mut total) = (0, 0);
    for (row_e, row_c) in exact.iter().zip(&counts) {
        for (&p, &k) in row_e.iter().zip(row_c) {
            let phat = k as f64 / paths as f64;
            let se = (p * (1.0 - p) / paths as f64).sqrt();
            total += 1;
            if (phat - p).abs() <= 3.0 * se.max(1.0 / paths as f64) {
                good += 1;
            }
        }
    }
    let frac = good as f64 / total as f64;
    c.check(frac >= 0.95, || format!("{good}/{total} bins within 3 SE"));
    c.note(format!("mass={:.8}, {good}/{total} bins within 3 SE", mass.value));
    Ok(())
}

fn pre_ruin(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let surv = survival_mass(&m, 1.0, 1.0, &spec).map_err(err)?;
    let sim = simulate_ruin(&m, &mc(100_000, 1.0)).map_err(err)?;
    let est = sim.survival(1.0).map_err(err)?;
    c.check(est.agrees(surv.value, 3.0, surv.error), || format!("survival {} vs MC {:?}", surv.value, est));
    let h = h_density(&m, &PreRuinQuery { n: 0, t: 1.0, u: 1.0, x: 2.0 }, &spec).map_err(err)?;
    let binned = sim.preruin_density(0, 2.0, 0.1);
    c.check(binned.agrees(h.value, 3.0, h.error), || format!("H(0,1,1,2) {} vs MC {:?}", h.value, binned));
    c.note(format!("P(T>1)={:.6} vs {:.6}+-{:.1e}; H={:.6} vs {:.6}+-{:.1e}", surv.value, est.value, est.se, h.value, binned.value, binned.se));

    let slack = 1e-9;
    let mut cells = 0;
    for t in [0.1, 0.5, 1.0, 2.0] {
        for u in [0.5, 1.0, 2.0] {
            for x in [0.05, 0.5, 1.0, 2.0, 4.0] {
                let v = h_vector(&m, t, u, x, 4, &spec).map_err(err)?;
                for n in 0..=4 {
                    let g = g_density(&m, n, t, x - u).map_err(err)?;
                    let hv = v.values[n];
                    cells += 1;
                    c.check(hv >= 0.0 && hv <= g + slack, || format!("H({n},{t},{u},{x})={hv:e} outside [0, g={g:e}]"));
                }
            }
        }
    }
    c.note(format!("{cells} lattice cells in [0, g]"));
    Ok(())
}

fn zero_claim_oscillation(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let (u, cc, d, lambda) = (1.0f64, 2.0f64, 0.5f64, 1.0f64);
    let closed = (-u * (cc + (cc * cc + 4.0 * d * lambda).sqrt()) / (2.0 * d)).exp();
    let q = integrate_semi_infinite(
        |t| if t > 0.0 { omega_d_zero(&m, t).unwrap_or(f64::NAN) } else { 0.0 },
        0.0,
        Decay::Exponential { rate: lambda, scale: 1.0 },
        &QuadratureSpec::default(),
    )
    .map_err(err)?;
    c.check((q.value - closed).abs() <= 1e-8, || format!("mass {} vs {closed}", q.value));
    let spec = QuadratureSpec::default();
    for t in [0.01, 0.1, 0.5, 1.0, 2.0, 5.0] {
        let v = omega_s_vector(&m, t, 1, &spec).map_err(err)?;
        c.check(v.values[0] == 0.0, || format!("omega_s(0,{t}) = {}", v.values[0]));
    }
    c.note(format!("mass {:.12} vs {closed:.12}", q.value));
    Ok(())
}

fn ruin_densities(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let h = 0.05;
    let sim = simulate_ruin(&m, &mc(1_000_000, 2.0 + h)).map_err(err)?;
    let mut worst: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let pts = omega_vector(&m, t, 2, &spec).map_err(err)?;
        for n in [1usize, 2] {
            for (cause, exact) in [(RuinCause::Claim, pts[n].omega_s), (RuinCause::Oscillation, pts[n].omega_d)] {
                let fd = sim.density_fd(n as u32, t, h, cause).map_err(err)?;
                let z = (fd.value - exact).abs() / fd.se;
                worst = worst.max(z);
                c.check(z <= 3.0, || format!("{cause:?} n={n} t={t}: {exact:.6} vs {:.6}+-{:.1e}", fd.value, fd.se));
            }
        }
    }
    c.note(format!("worst |z|={worst:.2}"));

    let mut worst_rel: f64 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let split = psi_vector(&m, t, 2, RuinCause::Total, &spec).map_err(err)?;
        let whole = psi_balance_vector(&m, t, 2, &spec).map_err(err)?;
        for n in 0..=2 {
            let tol = split.errors[n] + whole.errors[n] + spec.rel_tol * whole.values[n].abs();
            let gap = (split.values[n] - whole.values[n]).abs();
            worst_rel = worst_rel.max(gap / tol);
            c.check(gap <= tol, || format!("psi split/whole n={n} t={t}: gap {gap:e} over {tol:e}"));
        }
    }
    c.note(format!("additivity gap/tol max {worst_rel:.2}"));
    Ok(())
}

fn transform_consistency(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let sim = simulate_ruin(&m, &mc(100_000, 80.0)).map_err(err)?;
    let mut worst: f64 = 0.0;
    for r in [0.5, 0.9, 1.0] {
        for delta in [0.2, 0.5] {
            let exact = phi_transform(&m, r, delta, &spec).map_err(err)?;
            let est = sim.phi(r, delta).map_err(err)?;
            c.check(est.censoring_bound < 0.1 * est.se, || format!("censoring {:e} vs se {:e}", est.censoring_bound, est.se));
            let z = (est.value - exact.value).abs() / est.se;
            worst = worst.max(z);
            c.check(z <= 3.0, || format!("phi({r},{delta}) {} vs MC {}+-{:.1e}", exact.value, est.value, est.se));
        }
    }
    let mart = martingale_check(&m, 0.9, 0.2, 1.0, &mc(100_000, 1.0)).map_err(err)?;
    c.check(mart.estimate.agrees(mart.target, 3.0, 0.0), || format!("martingale {:?} vs {}", mart.estimate, mart.target));
    c.note(format!("worst |z|={worst:.2}; martingale {:.5}+-{:.1e} vs {:.5}", mart.estimate.value, mart.estimate.se, mart.target));
    Ok(())
}

/// Values of the reported tables under one quadrature spec.
fn table(m: &ModelParams, spec: &QuadratureSpec) -> Result<Vec<(String, Estimate)>, String> {
    let mut out = Vec::new();
    for t in [0.5, 1.0, 2.0] {
        for p in omega_vector(m, t, 2, spec).map_err(err)? {
            let e = Estimate { value: p.omega, error: p.error };
            out.push((format!("omega({},{t})", p.n), e));
        }
        let s = survival_mass(m, t, 1.0, spec).map_err(err)?;
        out.push((format!("survival({t})"), s));
    }
    for r in [0.5, 0.9, 1.0] {
        for delta in [0.2, 0.5] {
            out.push((format!("phi({r},{delta})"), phi_transform(m, r, delta, spec).map_err(err)?));
            let s = exp_rho_series(m, r, delta, 1.0, spec).map_err(err)?;
            out.push((format!("series({r},{delta})"), Estimate { value: s.value, error: s.error() }));
        }
    }
    let p = ruin_probability(m, spec).map_err(err)?;
    out.push(("ruin probability".into(), Estimate { value: p.total, error: p.error }));
    for cause in [RuinCause::Claim, RuinCause::Oscillation] {
        let v = psi_vector(m, f64::INFINITY, 3, cause, spec).map_err(err)?;
        for n in 0..=3 {
            out.push((format!("psi_{cause:?}({n},inf)"), v.get(n)));
        }
    }
    Ok(out)
}

fn hygiene(c: &mut Checks) -> Result<(), String> {
    let m = desk();
    let spec = QuadratureSpec::default();
    let mut count = 0;
    for t in [0.01, 0.1, 0.5, 1.0, 2.0, 10.0] {
        for x in [-60.0, -5.0, -0.5, 0.0, 0.5, 5.0, 60.0] {
            for n in [0usize, 1, 5, 40] {
                let l = g_log_density(&m, n, t, x).map_err(err)?;
                let g = g_density(&m, n, t, x).map_err(err)?;
                count += 1;
                c.check(!l.is_nan() && l < f64::INFINITY && g.is_finite(), || format!("g({n},{t},{x}): log {l}, value {g}"));
            }
        }
        for u in [0.5, 1.0, 50.0] {
            let mu = m.with_reserve(u).map_err(err)?;
            let l = log_omega_d_zero(&mu, t).map_err(err)?;
            let v = omega_d_zero(&mu, t).map_err(err)?;
            count += 1;
            c.check(l.is_finite() && v.is_finite(), || format!("omega_d(0,{t}) at u={u}: {l} {v}"));
        }
    }
    let far = m.with_reserve(50.0).map_err(err)?;
    for t in [0.5, 1.0, 2.0] {
        for p in omega_vector(&far, t, 2, &spec).map_err(err)? {
            count += 1;
            c.check(p.omega.is_finite() && p.omega >= 0.0 && p.omega < 1e-20, || format!("u=50 omega({},{t})={}", p.n, p.omega));
        }
        // One claim of size ~ u: lambda e^{-lambda t} E[e^{-(u + c t + sigma B_t)}], pre-claim ruin negligible.
        let single = (-t - 50.0 - 2.0 * t + 0.5 * t).exp();
        let got = omega_s_vector(&far, t, 1, &spec).map_err(err)?.values[1];
        count += 1;
        c.check((got / single - 1.0).abs() <= 1e-4, || format!("u=50 omega_s(1,{t})={got:e} vs {single:e}"));
        let v = h_vector(&far, t, 50.0, 1.0, 3, &spec).map_err(err)?;
        count += v.values.len();
        c.check(v.values.iter().chain(&v.errors).all(|x| x.is_finite()), || format!("u=50 H at t={t}: {:?}", v.values));
    }

    let base = table(&m, &spec)?;
    let halved = table(&m, &spec.with_tolerances(spec.rel_tol / 2.0, spec.abs_tol / 2.0))?;
    let mut worst: f64 = 0.0;
    for ((name, a), (_, b)) in base.iter().zip(&halved) {
        count += 1;
        c.check(a.value.is_finite() && a.error.is_finite(), || format!("{name} not finite"));
        let gap = (a.value - b.value).abs();
        if gap > 0.0 {
            worst = worst.max(gap / a.error);
        }
        c.check(gap < 10.0 * a.error || gap == 0.0, || format!("{name}: change {gap:e} vs error {:e}", a.error));
    }
    c.note(format!("{count} values finite; halving tolerances: max change/error {worst:.2}"));
    Ok(())
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let results = [
        run(1, "Lundberg root against the cubic, residual sweep", Duration::from_secs(1), lundberg_root),
        run(2, "hitting series equals exp(-rho x) on the grid", min(1), exp_rho_identity),
        run(3, "hitting law mass, transform and simulated joint law", min(5), hitting_law),
        run(4, "pre-ruin density against simulation and 0 <= H <= g", min(5), pre_ruin),
        run(5, "zero-claim oscillation mass and omega_s(0, t) = 0", Duration::from_secs(10), zero_claim_oscillation),
        run(6, "ruin densities against simulated differences, cause additivity", min(30), ruin_densities),
        run(7, "transform against simulation, martingale", min(10), transform_consistency),
        run(8, "numerical hygiene and tolerance halving", min(30), hygiene),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
