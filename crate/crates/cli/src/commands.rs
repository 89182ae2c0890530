use std::path::PathBuf;

use clap::Subcommand;
use ruin_core::kernels::{exp_rho_series, g_point, hitting_density};
use ruin_core::lundberg::lundberg_f;
use ruin_core::montecarlo::simulate_ruin;
use ruin_core::preruin::h_vector;
use ruin_core::ruin_density::{omega_vector, phi_transform, psi_vector, RuinCause};
use ruin_core::solve_rho;
use serde::Serialize;

use crate::config::Resolved;
use crate::error::{CliError, Context};
use crate::grid::Grid;
use crate::output::{open, write_csv, Cell, RunStamp, Table};
use crate::validate;

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Positive root of the Lundberg equation, with its residual.
    LundbergRoot {
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Joint density g_t(n, x) of the claim count and surplus change, ignoring ruin.
    Gdensity {
        #[arg(long, default_value = "0:3")]
        n: Grid<usize>,
        #[arg(long, default_value = "0.5,1,2")]
        t: Grid<f64>,
        #[arg(long, default_value = "-1,0,1,2", allow_hyphen_values = true)]
        x: Grid<f64>,
    },
    /// Joint density of (claims, time) at first passage over the level u + x.
    HittingDensity {
        #[arg(long, default_value = "0:3")]
        n: Grid<usize>,
        #[arg(long, default_value = "0.25:2:0.25")]
        t: Grid<f64>,
        #[arg(long, default_value = "1")]
        x: Grid<f64>,
    },
    /// Series expansion of exp(-rho x) against the Lundberg root.
    CheckExprho {
        #[arg(long, default_value = "0.5,1,2")]
        x: Grid<f64>,
        #[arg(long, default_value = "0.1,0.5,1")]
        delta: Grid<f64>,
        #[arg(long, default_value = "0.5,0.9,1")]
        r: Grid<f64>,
    },
    /// Pre-ruin density H(n, t, u, x) from the configured reserve.
    Preruin {
        #[arg(long, default_value = "0:3")]
        n: Grid<usize>,
        #[arg(long, default_value = "0.5,1,2")]
        t: Grid<f64>,
        #[arg(long, default_value = "0.5:4:0.5")]
        x: Grid<f64>,
    },
    /// Ruin-time densities by claim count, split by cause.
    RuinDensity {
        #[arg(long, default_value = "0:3")]
        n: Grid<usize>,
        #[arg(long, default_value = "0.25:3:0.25")]
        t: Grid<f64>,
    },
    /// Cumulative ruin probabilities psi(n, t); `inf` is accepted as a time.
    Psi {
        #[arg(long, default_value = "0:3")]
        n: Grid<usize>,
        #[arg(long, default_value = "0.5,1,2,inf")]
        t: Grid<f64>,
        #[arg(long, default_value = "total")]
        cause: RuinCause,
    },
    /// Joint transform E[r^N e^{-delta T}; T < inf].
    Phi {
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        delta: f64,
    },
    /// Monte Carlo ruin summary; flags override the `[simulation]` block.
    Simulate {
        #[arg(long)]
        #[serde(skip)]
        paths: Option<usize>,
        #[arg(long)]
        #[serde(skip)]
        seed: Option<u64>,
        #[arg(long)]
        #[serde(skip)]
        horizon: Option<f64>,
        #[arg(long)]
        #[serde(skip)]
        bridge_tol: Option<f64>,
        #[arg(long)]
        #[serde(skip)]
        antithetic: Option<bool>,
        /// Per-path outcomes as CSV (path_id, cause, n, t, surplus_at_ruin).
        #[arg(long)]
        #[serde(skip)]
        outcomes: Option<PathBuf>,
    },
    /// Identity suite: series grid, hitting mass and transform, martingale, cause additivity.
    Validate,
}

impl Command {
    /// Folds flag overrides into the configuration before it is hashed.
    pub fn apply_flags(&self, run: &mut Resolved) -> Result<(), CliError> {
        if let Self::Simulate { paths, seed, horizon, bridge_tol, antithetic, .. } = self {
            let s = &mut run.config.simulation;
            s.paths = paths.unwrap_or(s.paths);
            s.seed = seed.unwrap_or(s.seed);
            s.horizon = horizon.unwrap_or(s.horizon);
            s.bridge_tol = bridge_tol.unwrap_or(s.bridge_tol);
            s.antithetic = antithetic.unwrap_or(s.antithetic);
            s.validate().map_err(|e| CliError::Config(format!("simulation flags: {e}")))?;
        }
        Ok(())
    }

    pub fn run(&self, run: &Resolved, stamp: &RunStamp) -> Result<Table, CliError> {
        let (m, spec) = (&run.model, &run.config.quadrature);
        let u = m.u();
        match self {
            Self::LundbergRoot { r, delta } => {
                let root = solve_rho(m, *r, *delta).context(|| format!("lundberg-root at r={r}, delta={delta}"))?;
                let resid = lundberg_f(m, *r, *delta, root.rho).context(|| "lundberg residual".into())?;
                Ok(Table::scalar(
                    &["r", "delta", "rho", "residual"],
                    vec![(*r).into(), (*delta).into(), root.rho.into(), resid.into()],
                ))
            }
            Self::Gdensity { n, t, x } => {
                let mut table = Table::new(&["n", "t", "x", "g", "log_g"]);
                for &n in n.iter() {
                    for &t in t.iter() {
                        for &x in x.iter() {
                            let p = g_point(m, n, t, x).context(|| format!("gdensity at n={n}, t={t}, x={x}"))?;
                            table.push(vec![n.into(), t.into(), x.into(), p.value.into(), p.log_value.into()]);
                        }
                    }
                }
                Ok(table)
            }
            Self::HittingDensity { n, t, x } => {
                let mut table = Table::new(&["n", "t", "x", "density"]);
                for &n in n.iter() {
                    for &t in t.iter() {
                        for &x in x.iter() {
                            let v = hitting_density(m, n, t, u + x, u)
                                .context(|| format!("hitting-density at n={n}, t={t}, x={x}"))?;
                            table.push(vec![n.into(), t.into(), x.into(), v.into()]);
                        }
                    }
                }
                Ok(table)
            }
            Self::CheckExprho { x, delta, r } => {
                let mut table = Table::new(&["x", "delta", "r", "series", "exact", "gap", "error", "n_terms"]);
                for &x in x.iter() {
                    for &delta in delta.iter() {
                        for &r in r.iter() {
                            let at = || format!("check-exprho at x={x}, delta={delta}, r={r}");
                            let rho = solve_rho(m, r, delta).context(at)?.rho;
                            let s = exp_rho_series(m, r, delta, x, spec).context(at)?;
                            let exact = (-rho * x).exp();
                            table.push(vec![
                                x.into(),
                                delta.into(),
                                r.into(),
                                s.value.into(),
                                exact.into(),
                                (s.value - exact).abs().into(),
                                s.error().into(),
                                s.n_terms.into(),
                            ]);
                        }
                    }
                }
                Ok(table)
            }
            Self::Preruin { n, t, x } => {
                let top = n.iter().copied().max().unwrap_or(0);
                let mut table = Table::new(&["n", "t", "x", "h", "error"]);
                for &t in t.iter() {
                    for &x in x.iter() {
                        let v = h_vector(m, t, u, x, top, spec).context(|| format!("preruin at t={t}, x={x}"))?;
                        for &n in n.iter() {
                            table.push(vec![n.into(), t.into(), x.into(), v.values[n].into(), v.errors[n].into()]);
                        }
                    }
                }
                sort_rows(&mut table);
                Ok(table)
            }
            Self::RuinDensity { n, t } => {
                let top = n.iter().copied().max().unwrap_or(0);
                let mut table = Table::new(&["n", "t", "omega_s", "omega_d", "omega"]);
                for &t in t.iter() {
                    let pts = omega_vector(m, t, top, spec).context(|| format!("ruin-density at t={t}"))?;
                    for &n in n.iter() {
                        let p = &pts[n];
                        table.push(vec![n.into(), t.into(), p.omega_s.into(), p.omega_d.into(), p.omega.into()]);
                    }
                }
                sort_rows(&mut table);
                Ok(table)
            }
            Self::Psi { n, t, cause } => {
                let top = n.iter().copied().max().unwrap_or(0);
                let mut table = Table::new(&["n", "t", "cause", "psi", "error"]);
                let label = serde_json::to_value(cause).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
                for &t in t.iter() {
                    let v = psi_vector(m, t, top, *cause, spec).context(|| format!("psi at t={t}, cause={label}"))?;
                    for &n in n.iter() {
                        table.push(vec![n.into(), t.into(), label.as_str().into(), v.values[n].into(), v.errors[n].into()]);
                    }
                }
                sort_rows(&mut table);
                Ok(table)
            }
            Self::Phi { r, delta } => {
                let v = phi_transform(m, *r, *delta, spec).context(|| format!("phi at r={r}, delta={delta}"))?;
                Ok(Table::scalar(
                    &["r", "delta", "phi", "error"],
                    vec![(*r).into(), (*delta).into(), v.value.into(), v.error.into()],
                ))
            }
            Self::Simulate { outcomes, .. } => simulate(run, outcomes.as_ref(), stamp),
            Self::Validate => validate::run(run),
        }
    }
}

/// Orders rows by claim count first, keeping the time order within each count.
fn sort_rows(table: &mut Table) {
    table.rows.sort_by_key(|row| match row[0] {
        Cell::Int(n) => n,
        _ => 0,
    });
}

fn simulate(run: &Resolved, outcomes: Option<&PathBuf>, stamp: &RunStamp) -> Result<Table, CliError> {
    let cfg = &run.config.simulation;
    let sim = simulate_ruin(&run.model, cfg).context(|| "simulate".into())?;
    if let Some(path) = outcomes {
        let mut out = open(Some(path))?;
        let mut table = Table::new(&["path_id", "cause", "n", "t", "surplus_at_ruin"]);
        for (i, p) in sim.outcomes.iter().enumerate() {
            table.push(vec![i.into(), p.outcome.as_str().into(), p.claims.into(), p.time.into(), p.surplus.into()]);
        }
        write_csv(&mut *out, stamp, &table, run.config.output.precision)?;
    }
    let at = |cause| sim.psi(None, cfg.horizon, cause).context(|| "simulate estimate".into());
    let (total, claim, osc) = (at(RuinCause::Total)?, at(RuinCause::Claim)?, at(RuinCause::Oscillation)?);
    Ok(Table::scalar(
        &[
            "paths", "seed", "horizon", "ruined_claim", "ruined_oscillation", "censored", "psi", "psi_se",
            "psi_claim", "psi_claim_se", "psi_oscillation", "psi_oscillation_se",
        ],
        vec![
            cfg.paths.into(),
            cfg.seed.into(),
            cfg.horizon.into(),
            sim.claim.into(),
            sim.oscillation.into(),
            sim.censored.into(),
            total.value.into(),
            total.se.into(),
            claim.value.into(),
            claim.se.into(),
            osc.value.into(),
            osc.se.into(),
        ],
    ))
}
