//! Path simulation of the perturbed surplus process with exact claim times, bridge
//! detection of barrier touches between claims, and estimators with standard errors.

mod paths;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, invalid, Result, RuinError};
use crate::model::ModelParams;
use crate::ruin_density::RuinCause;

pub use paths::bridge_crossing_probability;
use paths::{free_terminal, hitting_path, ruin_path, Draws};

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub paths: usize,
    pub seed: u64,
    pub horizon: f64,
    pub bridge_tol: f64,
    pub antithetic: bool,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            seed: 20_240_601,
            horizon: 100.0,
            bridge_tol: 1e-4,
            antithetic: false,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("paths", "must be >= 1"));
        }
        if self.antithetic && self.paths % 2 == 1 {
            return Err(invalid("paths", "must be even with antithetic pairs"));
        }
        if !(self.horizon > 0.0) || self.horizon.is_nan() {
            return Err(invalid("horizon", format!("must be > 0, got {}", self.horizon)));
        }
        if !(self.bridge_tol > 0.0 && self.bridge_tol.is_finite()) {
            return Err(invalid("bridge_tol", format!("must be finite and > 0, got {}", self.bridge_tol)));
        }
        Ok(())
    }

    pub fn with_horizon(self, horizon: f64) -> Self {
        Self { horizon, ..self }
    }

    /// Runs `f` once per path, in parallel, returning results in path order.
    fn run<T: Send>(&self, f: impl Fn(&mut Draws) -> T + Sync) -> Vec<T> {
        let (seed, anti) = (self.seed, self.antithetic);
        let starts: Vec<usize> = (0..self.paths).step_by(CHUNK).collect();
        let chunks: Vec<Vec<T>> = starts
            .par_iter()
            .map(|&start| {
                (start..(start + CHUNK).min(self.paths))
                    .map(|i| {
                        let mut rng = if anti {
                            Draws::new(seed, (i / 2) as u64, i % 2 == 1)
                        } else {
                            Draws::new(seed, i as u64, false)
                        };
                        f(&mut rng)
                    })
                    .collect()
            })
            .collect();
        chunks.into_iter().flatten().collect()
    }

    /// Mean and standard error of per-path values; antithetic partners are averaged first.
    fn estimate(&self, values: impl Iterator<Item = f64>) -> McEstimate {
        let mut count = 0usize;
        let mut sum = 0.0;
        let mut sq = 0.0;
        let mut pending: Option<f64> = None;
        for v in values {
            let item = if self.antithetic {
                match pending.take() {
                    None => {
                        pending = Some(v);
                        continue;
                    }
                    Some(first) => 0.5 * (first + v),
                }
            } else {
                v
            };
            count += 1;
            sum += item;
            sq += item * item;
        }
        let n = count.max(1) as f64;
        let mean = sum / n;
        let var = (sq / n - mean * mean).max(0.0);
        McEstimate {
            value: mean,
            se: (var / n).sqrt(),
        }
    }
}

/// How a simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Claim,
    Oscillation,
    /// Still solvent at the horizon.
    Censored,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Claim => "claim",
            Self::Oscillation => "oscillation",
            Self::Censored => "none",
        }
    }

    fn matches(&self, cause: RuinCause) -> bool {
        match (self, cause) {
            (Self::Censored, _) => false,
            (_, RuinCause::Total) => true,
            (Self::Claim, RuinCause::Claim) | (Self::Oscillation, RuinCause::Oscillation) => true,
            _ => false,
        }
    }
}

/// One simulated path. For ruined paths `time`, `claims` and `surplus` are taken at ruin
/// (a ruining claim is counted, the surplus is 0 after oscillation); censored paths
/// report them at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub outcome: Outcome,
    pub claims: u32,
    pub time: f64,
    pub surplus: f64,
}

impl PathOutcome {
    pub fn ruined(&self) -> bool {
        self.outcome != Outcome::Censored
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HitOutcome {
    pub hit: bool,
    pub claims: u32,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub se: f64,
}

impl McEstimate {
    /// `|value - target| <= k * se`, with `extra` added to the allowance.
    pub fn agrees(&self, target: f64, k: f64, extra: f64) -> bool {
        (self.value - target).abs() <= k * self.se + extra
    }
}

/// Monte Carlo estimate of an infinite-horizon quantity with the censoring bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CensoredEstimate {
    pub value: f64,
    pub se: f64,
    pub censoring_bound: f64,
}

fn check_time(t: f64, horizon: f64) -> Result<()> {
    if t > 0.0 && t <= horizon {
        Ok(())
    } else {
        Err(domain("simulation estimate", format!("time {t} outside (0, horizon = {horizon}]")))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationSummary {
    pub config: SimulationConfig,
    pub claim: usize,
    pub oscillation: usize,
    pub censored: usize,
    #[serde(skip)]
    pub outcomes: Vec<PathOutcome>,
}

impl SimulationSummary {
    fn from_outcomes(config: SimulationConfig, outcomes: Vec<PathOutcome>) -> Self {
        let count = |o: Outcome| outcomes.iter().filter(|p| p.outcome == o).count();
        Self {
            config,
            claim: count(Outcome::Claim),
            oscillation: count(Outcome::Oscillation),
            censored: count(Outcome::Censored),
            outcomes,
        }
    }

    pub fn mean(&self, f: impl Fn(&PathOutcome) -> f64) -> McEstimate {
        self.config.estimate(self.outcomes.iter().map(f))
    }

    /// `P(N(T) = n, T <= t)` for the cause (`n = None` sums over counts).
    pub fn psi(&self, n: Option<u32>, t: f64, cause: RuinCause) -> Result<McEstimate> {
        check_time(t, self.config.horizon)?;
        Ok(self.mean(|p| {
            let hit = p.outcome.matches(cause) && p.time <= t && (n.is_none() || n == Some(p.claims));
            f64::from(u8::from(hit))
        }))
    }

    /// Central difference `(psi(t + h) - psi(t - h)) / 2h`.
    pub fn density_fd(&self, n: u32, t: f64, h: f64, cause: RuinCause) -> Result<McEstimate> {
        if !(h > 0.0 && h < t) {
            return Err(domain("density_fd", format!("need 0 < h < t, got h={h}, t={t}")));
        }
        check_time(t + h, self.config.horizon)?;
        Ok(self.mean(|p| {
            let hit = p.outcome.matches(cause) && p.claims == n && p.time > t - h && p.time <= t + h;
            f64::from(u8::from(hit)) / (2.0 * h)
        }))
    }

    /// `P(T > t)`.
    pub fn survival(&self, t: f64) -> Result<McEstimate> {
        check_time(t, self.config.horizon)?;
        Ok(self.mean(|p| f64::from(u8::from(!p.ruined() || p.time > t))))
    }

    /// Histogram estimate of the pre-ruin density at the horizon: surviving paths with
    /// `n` claims and surplus in `[x - width/2, x + width/2)`, divided by the width.
    pub fn preruin_density(&self, n: u32, x: f64, width: f64) -> McEstimate {
        let (lo, hi) = (x - 0.5 * width, x + 0.5 * width);
        self.mean(|p| {
            let hit = !p.ruined() && p.claims == n && p.surplus >= lo && p.surplus < hi;
            f64::from(u8::from(hit)) / width
        })
    }

    /// Counts of ruined paths of the cause by claim count (rows `0..=n_max`) and time bin.
    pub fn joint_counts(&self, cause: RuinCause, n_max: usize, edges: &[f64]) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; edges.len().saturating_sub(1)]; n_max + 1];
        for p in self.outcomes.iter().filter(|p| p.outcome.matches(cause)) {
            if let (Some(row), Some(bin)) = (out.get_mut(p.claims as usize), bin_of(edges, p.time)) {
                row[bin] += 1;
            }
        }
        out
    }

    /// `E[r^N e^{-delta T}; T < inf]`, with ruin beyond the horizon bounded by `e^{-delta horizon}`.
    pub fn phi(&self, r: f64, delta: f64) -> Result<CensoredEstimate> {
        if !(r > 0.0 && r <= 1.0 && delta > 0.0) {
            return Err(domain("estimate_phi", format!("need r in (0, 1] and delta > 0, got r={r}, delta={delta}")));
        }
        let est = self.mean(|p| {
            if p.ruined() {
                r.powi(p.claims as i32) * (-delta * p.time).exp()
            } else {
                0.0
            }
        });
        let bound = (-delta * self.config.horizon).exp();
        let limit = 0.1 * est.se;
        if bound > limit {
            return Err(RuinError::HorizonTooShort { bound, limit });
        }
        Ok(CensoredEstimate {
            value: est.value,
            se: est.se,
            censoring_bound: bound,
        })
    }
}

fn bin_of(edges: &[f64], t: f64) -> Option<usize> {
    if edges.len() < 2 || t < edges[0] || t >= edges[edges.len() - 1] {
        return None;
    }
    Some(edges.partition_point(|e| *e <= t) - 1)
}

pub fn simulate_ruin(model: &ModelParams, config: &SimulationConfig) -> Result<SimulationSummary> {
    config.validate()?;
    if !(model.u() >= 0.0) {
        return Err(invalid("u", "must be >= 0"));
    }
    let outcomes = config.run(|rng| ruin_path(model, config.horizon, config.bridge_tol, rng));
    Ok(SimulationSummary::from_outcomes(*config, outcomes))
}

#[derive(Debug, Clone, Serialize)]
pub struct HittingSummary {
    pub config: SimulationConfig,
    pub level: f64,
    pub hits: usize,
    #[serde(skip)]
    pub outcomes: Vec<HitOutcome>,
}

impl HittingSummary {
    pub fn mean(&self, f: impl Fn(&HitOutcome) -> f64) -> McEstimate {
        self.config.estimate(self.outcomes.iter().map(f))
    }

    pub fn hit_fraction(&self) -> McEstimate {
        self.mean(|h| f64::from(u8::from(h.hit)))
    }

    /// `E[r^N e^{-delta tau}; tau < inf]`; unseen hits add at most `e^{-delta horizon}`.
    pub fn transform(&self, r: f64, delta: f64) -> CensoredEstimate {
        let est = self.mean(|h| {
            if h.hit {
                r.powi(h.claims as i32) * (-delta * h.time).exp()
            } else {
                0.0
            }
        });
        CensoredEstimate {
            value: est.value,
            se: est.se,
            censoring_bound: (-delta * self.config.horizon).exp(),
        }
    }

    /// Hit counts by claim count (rows `0..=n_max`) and time bin.
    pub fn joint_counts(&self, n_max: usize, edges: &[f64]) -> Vec<Vec<u64>> {
        let mut out = vec![vec![0u64; edges.len().saturating_sub(1)]; n_max + 1];
        for h in self.outcomes.iter().filter(|h| h.hit) {
            if let (Some(row), Some(bin)) = (out.get_mut(h.claims as usize), bin_of(edges, h.time)) {
                row[bin] += 1;
            }
        }
        out
    }
}

/// First passage of the free process (no ruin) to `level > u`.
pub fn simulate_hitting(model: &ModelParams, level: f64, config: &SimulationConfig) -> Result<HittingSummary> {
    config.validate()?;
    if !(level > model.u()) {
        return Err(domain("simulate_hitting", format!("level {level} must exceed u = {}", model.u())));
    }
    let outcomes = config.run(|rng| hitting_path(model, level, config.horizon, config.bridge_tol, rng));
    Ok(HittingSummary {
        config: *config,
        level,
        hits: outcomes.iter().filter(|h| h.hit).count(),
        outcomes,
    })
}

pub fn estimate_phi(model: &ModelParams, r: f64, delta: f64, config: &SimulationConfig) -> Result<CensoredEstimate> {
    simulate_ruin(model, config)?.phi(r, delta)
}

/// Sample mean of `exp(rho U(t) - delta t + N(t) ln r)` for the free process, against its
/// expectation `e^{rho u}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MartingaleCheck {
    pub rho: f64,
    pub t: f64,
    pub estimate: McEstimate,
    pub target: f64,
}

pub fn martingale_check(model: &ModelParams, r: f64, delta: f64, t: f64, config: &SimulationConfig) -> Result<MartingaleCheck> {
    config.validate()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(domain("martingale_check", format!("t must be finite and > 0, got {t}")));
    }
    let rho = crate::lundberg::solve_rho(model, r, delta)?.rho;
    let ln_r = r.ln();
    let values = config.run(|rng| {
        let (n, x) = free_terminal(model, t, rng);
        (rho * x - delta * t + f64::from(n) * ln_r).exp()
    });
    Ok(MartingaleCheck {
        rho,
        t,
        estimate: config.estimate(values.into_iter()),
        target: (rho * model.u()).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClaimDistribution;
    use crate::numerics::special::ln_norm_cdf;

    fn desk() -> ModelParams {
        ModelParams::new(1.0, 2.0, 1.0, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap()
    }

    fn config(paths: usize, horizon: f64) -> SimulationConfig {
        SimulationConfig {
            paths,
            horizon,
            ..SimulationConfig::default()
        }
    }

    /// `P(inf_{s <= t} (u + c s + sqrt(2D) B_s) <= 0)`.
    fn drifted_passage_cdf(u: f64, c: f64, d: f64, t: f64) -> f64 {
        let sd = (2.0 * d * t).sqrt();
        ln_norm_cdf(-(u + c * t) / sd).exp() + (-c * u / d + ln_norm_cdf((c * t - u) / sd)).exp()
    }

    #[test]
    fn bridge_law_over_one_step() {
        // endpoint from the free law, touch decided by the bridge formula, against the
        // closed-form first-passage probability
        let (a, c, d, dt): (f64, f64, f64, f64) = (0.8, 0.5, 0.5, 1.0);
        let cfg = config(1_000_000, 1.0);
        let vals = cfg.run(|rng| {
            let b = a + c * dt + (2.0 * d * dt).sqrt() * rng.normal();
            f64::from(u8::from(rng.uniform() < bridge_crossing_probability(a, b, d, dt)))
        });
        let est = cfg.estimate(vals.into_iter());
        let want = drifted_passage_cdf(a, c, d, dt);
        assert!(est.agrees(want, 3.0, 0.0), "{est:?} {want}");
    }

    #[test]
    fn no_claims_reduces_to_drifted_passage() {
        let m = ModelParams::new(1.0, 2.0, 1e-9, 1.0, ClaimDistribution::exponential(1.0).unwrap()).unwrap();
        let s = simulate_ruin(&m, &config(100_000, 3.0)).unwrap();
        assert_eq!(s.claim, 0);
        for t in [0.25, 0.5, 1.0, 3.0] {
            let est = s.psi(None, t, RuinCause::Oscillation).unwrap();
            let want = drifted_passage_cdf(1.0, 2.0, 0.5, t);
            assert!(est.agrees(want, 3.0, 0.0), "t={t}: {est:?} {want}");
        }
    }

    #[test]
    fn outcomes_respect_cause_rules() {
        let s = simulate_ruin(&desk(), &config(20_000, 20.0)).unwrap();
        assert_eq!(s.claim + s.oscillation + s.censored, 20_000);
        for p in &s.outcomes {
            match p.outcome {
                Outcome::Oscillation => assert_eq!(p.surplus, 0.0),
                Outcome::Claim => assert!(p.surplus < 0.0 && p.claims >= 1),
                Outcome::Censored => assert_eq!(p.time, 20.0),
            }
        }
        let far = simulate_ruin(&desk().with_reserve(50.0).unwrap(), &config(100_000, 10.0)).unwrap();
        assert_eq!(far.censored, 100_000);
    }

    #[test]
    fn identical_across_thread_counts() {
        let m = desk();
        let cfg = config(10_000, 5.0);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| simulate_ruin(&m, &cfg).unwrap());
        let b = four.install(|| simulate_ruin(&m, &cfg).unwrap());
        assert_eq!(a.outcomes, b.outcomes);
    }

    #[test]
    fn hitting_small_gap_and_mass() {
        let m = desk();
        let near = simulate_hitting(&m, 1.01, &config(10_000, 10.0)).unwrap();
        // Wald: E[tau] = gap / (c - lambda E[X])
        let mean_t = near.mean(|h| h.time);
        assert!(near.hits == 10_000 && mean_t.agrees(0.01, 3.0, 0.0), "{mean_t:?}");
        let far = simulate_hitting(&m, 2.0, &config(20_000, 200.0)).unwrap();
        assert!(far.hit_fraction().value >= 0.999);
    }

    #[test]
    fn hitting_transform_against_root() {
        let m = desk();
        let s = simulate_hitting(&m, 2.0, &config(100_000, 100.0)).unwrap();
        let rho = crate::lundberg::solve_rho(&m, 0.9, 0.2).unwrap().rho;
        let est = s.transform(0.9, 0.2);
        assert!((est.value - (-rho).exp()).abs() <= 3.0 * est.se + est.censoring_bound, "{est:?}");
    }

    #[test]
    fn transform_estimates() {
        let m = desk();
        let cfg = config(100_000, 80.0);
        assert!(estimate_phi(&m, 1.0, 50.0, &cfg).unwrap().value < 1e-2);
        let plain = estimate_phi(&m, 0.9, 0.2, &cfg).unwrap();
        let anti = estimate_phi(&m, 0.9, 0.2, &SimulationConfig { antithetic: true, seed: 7, ..cfg }).unwrap();
        let se = (plain.se * plain.se + anti.se * anti.se).sqrt();
        assert!((plain.value - anti.value).abs() <= 3.0 * se, "{plain:?} {anti:?}");
        assert!(matches!(
            estimate_phi(&m, 1.0, 0.2, &config(1000, 5.0)),
            Err(RuinError::HorizonTooShort { .. })
        ));
    }

    #[test]
    fn martingale_mean() {
        let chk = martingale_check(&desk(), 0.9, 0.2, 1.0, &config(100_000, 1.0)).unwrap();
        assert!(chk.estimate.agrees(chk.target, 3.0, 0.0), "{chk:?}");
    }

    #[test]
    fn refinement_bias_below_noise() {
        let m = desk();
        let a = simulate_ruin(&m, &config(100_000, 2.0)).unwrap();
        let b = simulate_ruin(&m, &SimulationConfig { bridge_tol: 5e-5, ..config(100_000, 2.0) }).unwrap();
        for t in [0.5, 1.0] {
            let x = a.psi(None, t, RuinCause::Oscillation).unwrap();
            let y = b.psi(None, t, RuinCause::Oscillation).unwrap();
            assert!((x.value - y.value).abs() < x.se.max(y.se), "{x:?} {y:?}");
        }
    }

    #[test]
    fn config_rejections() {
        assert!(SimulationConfig { paths: 0, ..Default::default() }.validate().is_err());
        assert!(SimulationConfig { paths: 3, antithetic: true, ..Default::default() }.validate().is_err());
        assert!(SimulationConfig { bridge_tol: 0.0, ..Default::default() }.validate().is_err());
        assert!(simulate_hitting(&desk(), 0.5, &SimulationConfig::default()).is_err());
    }
}
