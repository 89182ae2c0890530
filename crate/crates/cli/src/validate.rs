//! Identity suite run by `ruin validate` on the configured model.

use ruin_core::kernels::{exp_rho_series, hitting_total_mass, hitting_transform};
use ruin_core::montecarlo::martingale_check;
use ruin_core::ruin_density::{psi_balance_vector, psi_vector, RuinCause};
use ruin_core::solve_rho;

use crate::config::Resolved;
use crate::error::{CliError, Context};
use crate::output::Table;

pub const COLUMNS: &[&str] = &["check", "value", "target", "tolerance", "pass"];

fn row(table: &mut Table, check: String, value: f64, target: f64, tolerance: f64) {
    let pass = (value - target).abs() <= tolerance;
    table.push(vec![check.into(), value.into(), target.into(), tolerance.into(), pass.into()]);
}

pub fn run(run: &Resolved) -> Result<Table, CliError> {
    let (m, spec) = (&run.model, &run.config.quadrature);
    let mut table = Table::new(COLUMNS);

    for x in [0.5, 1.0, 2.0] {
        for delta in [0.1, 0.5, 1.0] {
            for r in [0.5, 0.9, 1.0] {
                let at = || format!("exp-rho series at x={x}, delta={delta}, r={r}");
                let rho = solve_rho(m, r, delta).context(at)?.rho;
                let s = exp_rho_series(m, r, delta, x, spec).context(at)?;
                row(&mut table, format!("exp_rho x={x} delta={delta} r={r}"), s.value, (-rho * x).exp(), 1e-5);
            }
        }
    }

    let mass = hitting_total_mass(m, 1.0, spec).context(|| "hitting mass at x=1".into())?;
    row(&mut table, "hitting_mass x=1".into(), mass.value, 1.0, 1e-4);
    let rho = solve_rho(m, 0.9, 0.2).context(|| "lundberg root at r=0.9, delta=0.2".into())?.rho;
    let tr = hitting_transform(m, 0.9, 0.2, 1.0, spec).context(|| "hitting transform".into())?;
    row(&mut table, "hitting_transform x=1 r=0.9 delta=0.2".into(), tr.value, (-rho).exp(), 1e-5);

    let mart = martingale_check(m, 0.9, 0.2, 1.0, &run.config.simulation).context(|| "martingale check".into())?;
    row(&mut table, "martingale r=0.9 delta=0.2 t=1".into(), mart.estimate.value, mart.target, 3.0 * mart.estimate.se);

    for t in [0.5, 1.0, 2.0] {
        let at = || format!("cause additivity at t={t}");
        let split = psi_vector(m, t, 2, RuinCause::Total, spec).context(at)?;
        let whole = psi_balance_vector(m, t, 2, spec).context(at)?;
        for n in 0..=2 {
            let tol = split.errors[n] + whole.errors[n] + spec.rel_tol * whole.values[n].abs();
            row(&mut table, format!("cause_additivity n={n} t={t}"), split.values[n], whole.values[n], tol);
        }
    }
    Ok(table)
}

/// Names of failed checks in a finished report.
pub fn failures(table: &Table) -> Vec<String> {
    table
        .rows
        .iter()
        .filter(|r| matches!(r[4], crate::output::Cell::Bool(false)))
        .map(|r| match &r[0] {
            crate::output::Cell::Text(s) => s.clone(),
            other => format!("{other:?}"),
        })
        .collect()
}
