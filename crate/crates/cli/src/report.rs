//! Consolidated report over the symbolic and numerical checks.

use anyhow::Context;
use bergman_core::expansion::verify_j2;
use bergman_core::fit::{analyze, Check, FitReport};
use bergman_core::manifolds::{ManifoldKind, ModelManifold};
use bergman_core::sweep::default_p_values;
use num_complex::Complex64;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{analysis_options, report_failures, sweep_for};

#[derive(Serialize)]
pub struct Report {
    pub passed: bool,
    pub checks: Vec<Check>,
    pub fits: Vec<FitReport>,
    pub note: &'static str,
}

fn check(id: impl Into<String>, measured: f64, tolerance: f64, description: &str) -> Check {
    Check {
        id: id.into(),
        passed: measured <= tolerance,
        measured,
        tolerance,
        description: description.into(),
    }
}

fn symbolic() -> anyhow::Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in 1..=3 {
        let v = verify_j2(n).with_context(|| format!("symbolic computation at n = {n}"))?;
        out.push(check(
            format!("j2-golden-dim{n}"),
            v.mismatches.len() as f64,
            0.0,
            "monomials where computed and reference J2 differ",
        ));
        for c in &v.checks {
            out.push(Check {
                id: format!("{}-dim{n}", c.id),
                passed: c.passed,
                measured: if c.passed { 0.0 } else { 1.0 },
                tolerance: 0.0,
                description: c.detail.clone(),
            });
        }
    }
    Ok(out)
}

fn cp1_diagonal(c: &RunConfig) -> anyhow::Result<Vec<Check>> {
    let m = ModelManifold::cp1();
    let x0 = m.default_base_point();
    let mut worst: f64 = 0.0;
    for p in default_p_values() {
        let v = m.rescaled_kernel(p, x0, &[0.0, 0.0], &[0.0, 0.0])?.value;
        worst = worst.max((v - (1.0 + 1.0 / p as f64)).norm());
    }
    let r = m
        .numeric_curvature_with_step(x0, c.precision.fd_step)
        .riemann(1, 1, 1, 1);
    Ok(vec![
        check(
            "diagonal-b1",
            worst,
            1e-12,
            "max |rescaled diagonal - (1 + 1/p)| on CP1, p = 25..400",
        ),
        check(
            "numeric-curvature",
            (r - std::f64::consts::PI).norm(),
            1e-6,
            "|R - pi| for the finite-difference CP1 curvature",
        ),
    ])
}

fn reproducing(c: &RunConfig) -> anyhow::Result<Vec<Check>> {
    let (x, y) = (Complex64::new(0.21, -0.35), Complex64::new(-0.4, 0.17));
    let p = 20;
    let mut out = Vec::new();
    for kind in [ManifoldKind::Cp1, ManifoldKind::FlatTorus] {
        let m = ModelManifold::new(kind);
        let want = m.unit_frame_kernel(p, x, y)?;
        let got = m.integrate(c.precision.quadrature_nodes, |w| {
            Ok(m.unit_frame_kernel(p, x, w)? * m.unit_frame_kernel(p, w, y)?)
        })?;
        out.push(check(
            format!("{kind}/reproducing-identity"),
            (got - want).norm() / want.norm().max(1.0),
            1e-8,
            "relative error of the integral of P(x, w) P(w, y) against P(x, y) at p = 20",
        ));
    }
    Ok(out)
}

pub fn build(c: &RunConfig) -> anyhow::Result<Report> {
    let mut checks = symbolic()?;
    checks.extend(cp1_diagonal(c)?);
    checks.extend(reproducing(c)?);
    let mut fits = Vec::new();
    for kind in [ManifoldKind::Cp1, ManifoldKind::FlatTorus] {
        let sweep = sweep_for(c, kind);
        report_failures(&sweep);
        checks.push(check(
            format!("{kind}/chart-failures"),
            sweep.failures.len() as f64,
            0.0,
            "sample points outside the normal chart",
        ));
        let fit = analyze(&sweep.rows, &analysis_options(c))
            .with_context(|| format!("fitting the {kind} sweep"))?;
        checks.extend(fit.checks.iter().map(|k| Check {
            id: format!("{kind}/{}", k.id),
            ..k.clone()
        }));
        fits.push(fit);
    }
    Ok(Report {
        passed: checks.iter().all(|k| k.passed),
        checks,
        fits,
        note: "numerical tolerances are engineering choices; the asymptotic remainder constants are not quantitative",
    })
}
