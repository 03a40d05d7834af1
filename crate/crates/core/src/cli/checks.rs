use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use super::{solve_at, CheckName, Run};
use crate::config::per_component;
use crate::error::{Error, Result};
use crate::exprlang::{self, Expr};
use crate::funcspace::MuFunction;
use crate::relaxation;
use crate::solver::{self, Csr, Load, POINCARE_REL_TOL};
use crate::verify::{self, CheckResult, CheckRow, VerifyError, DQ_RATIO_BOUND};
use crate::FunctionSpace;

const H2_STABILITY: f64 = 0.05;
const ORACLE_TOL: f64 = 0.1;
const CONTINUITY_R2: f64 = 0.98;
const SECOND_ORDER_TOL: f64 = 1e-10;

fn row(check: impl Into<String>, h: f64, norm: f64, ratio: f64, pass: bool) -> CheckRow {
    CheckRow { check: check.into(), h, norm, ratio, pass }
}

fn result(name: CheckName, rows: Vec<CheckRow>, pass: bool, details: serde_json::Value) -> CheckResult {
    CheckResult { name: name.name().into(), pass, rows, details }
}

/// Runs one check. Failures of the check itself (including unmet
/// geometric prerequisites) give a failing result; configuration, solver
/// and I/O errors are returned.
pub fn run_check(run: &Run, check: CheckName) -> Result<CheckResult> {
    let out = match check {
        CheckName::Trace => trace(run),
        CheckName::Dq => dq(run),
        CheckName::H2 => h2(run),
        CheckName::Continuity => continuity(run),
        CheckName::Poincare => poincare(run),
        CheckName::Relax => relax(run),
        CheckName::SecondOrder => second_order(run),
        CheckName::All => unreachable!("expanded by the caller"),
    };
    match out {
        Err(Error::Verify(e)) => Ok(result(check, Vec::new(), false, json!({ "error": e.to_string() }))),
        other => other,
    }
}

fn trace(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let s = solve_at(&run.cfg, None)?;
    let st = &s.structure;
    let h = st.h;
    let coupled: Vec<usize> = (0..st.junctions.len()).filter(|&j| st.junctions[j].coupled).collect();
    if coupled.is_empty() {
        return Err(VerifyError::UncoupledJunction(0).into());
    }
    let field = run.cfg.config.coefficient_field()?;
    let opts = run.cfg.config.solve_options();
    let load = match &v.penalty_rhs {
        Some(spec) => Load::per_component(per_component(spec, st)?),
        None => s.load.clone(),
    };
    let penalized = v
        .penalties
        .iter()
        .map(|&eta| Ok((eta, solver::solve_penalty(st, &field, &load, eta, &opts)?.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut pass = !v.penalties.is_empty();
    let mut details = Vec::new();
    for j in coupled {
        let (a, b) = st.junctions[j].ids;
        let gap = verify::trace_gap(&s.solution, j, v.trace_norm)?;
        rows.push(row(format!("trace:{a}-{b}"), h, gap, f64::NAN, gap == 0.0));
        pass &= gap == 0.0;
        let mut prev = f64::NAN;
        let mut gaps = Vec::new();
        for (eta, u) in &penalized {
            let g = verify::trace_gap(u, j, v.trace_norm)?;
            let ok = prev.is_nan() || g < prev;
            pass &= ok;
            rows.push(row(format!("trace_penalty:{a}-{b}:{eta:e}"), h, g, g / prev, ok));
            gaps.push(g);
            prev = g;
        }
        details.push(json!({ "ids": [a, b], "conforming_gap": gap, "penalties": v.penalties, "penalty_gaps": gaps }));
    }
    Ok(result(CheckName::Trace, rows, pass, json!({ "norm": v.trace_norm, "junctions": details })))
}

fn dq(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let s = solve_at(&run.cfg, None)?;
    let margin = v.dq_margin.unwrap_or_else(|| v.dq_steps.iter().cloned().fold(0.0, f64::max));
    let scan = verify::dq_uniform_bound_scan(&s.solution, v.dq_axis, &v.dq_steps, margin)?;
    let min = scan.rows.iter().map(|r| r.grad_dq_norm).fold(f64::INFINITY, f64::min);
    let rows = scan.rows.iter().map(|r| row("dq", r.h, r.grad_dq_norm, r.grad_dq_norm / min, scan.pass)).collect();
    let mut pass = scan.pass;
    let mut oracle = None;
    if let (Some(exact), Some(last)) = (&s.exact, scan.rows.last()) {
        let o = verify::dq_oracle(&s.structure, exact, v.dq_axis, margin)?;
        let rel = (last.grad_dq_norm - o).abs() / o;
        pass &= rel <= ORACLE_TOL;
        oracle = Some(json!({ "oracle": o, "limit": last.grad_dq_norm, "relative_error": rel }));
    }
    let details = json!({ "scan": scan, "ratio_bound": DQ_RATIO_BOUND, "oracle": oracle });
    Ok(result(CheckName::Dq, rows, pass, details))
}

fn h2(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let coarse = v.h2_levels.first().copied().ok_or_else(|| Error::Config("verify.h2_levels is empty".into()))?;
    let margin = v.h2_margin.unwrap_or(4.0 * coarse);
    let step = v.h2_step.unwrap_or(coarse);
    let mut per_component: Vec<(u32, Vec<f64>, Option<f64>)> = Vec::new();
    let mut indicators = Vec::new();
    for &h in &v.h2_levels {
        let s = solve_at(&run.cfg, Some(h))?;
        for (c, comp) in s.structure.components.iter().enumerate() {
            let ind = verify::h2_indicator(&s.solution, comp.id, margin, step)?;
            if per_component.len() <= c {
                let oracle = match &s.exact {
                    Some(exact) => Some(verify::h2_oracle(&s.structure, comp.id, &exact[c], margin, step)?),
                    None => None,
                };
                per_component.push((comp.id, Vec::new(), oracle));
            }
            per_component[c].1.push(ind.hessian_norm);
            indicators.push(json!({ "h": h, "indicator": ind }));
        }
    }
    let mut rows = Vec::new();
    let mut pass = v.h2_levels.len() >= 2;
    for (id, norms, oracle) in &per_component {
        let max = norms.iter().cloned().fold(0.0, f64::max);
        let min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
        let stable = max <= (1.0 + H2_STABILITY) * min;
        pass &= stable;
        for (h, n) in v.h2_levels.iter().zip(norms) {
            let (ratio, ok) = match oracle {
                Some(o) => (n / o, stable && (n - o).abs() <= ORACLE_TOL * o),
                None => (n / norms[0], stable),
            };
            pass &= ok;
            rows.push(row(format!("h2:{id}"), *h, *n, ratio, ok));
        }
    }
    let oracles: Vec<_> = per_component.iter().map(|(id, _, o)| json!({ "component": id, "oracle": o })).collect();
    let details = json!({ "margin": margin, "step": step, "indicators": indicators, "oracles": oracles });
    Ok(result(CheckName::H2, rows, pass, details))
}

/// Slope, intercept and R² of the least-squares line through (x, y).
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

fn continuity(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let levels = &v.continuity_levels;
    let mut reports = Vec::new();
    for &h in levels {
        reports.push(verify::continuity_modulus(&solve_at(&run.cfg, Some(h))?.solution));
    }
    let mut rows = Vec::new();
    let mut pass = levels.len() >= 3;
    let mut fits = Vec::new();
    for (h, rep) in levels.iter().zip(&reports) {
        for j in &rep.junctions {
            let ok = !j.coupled || j.jump == 0.0;
            pass &= ok;
            rows.push(row(format!("jump:{}-{}", j.ids.0, j.ids.1), *h, j.jump, f64::NAN, ok));
        }
    }
    let n_comp = reports.first().map_or(0, |r| r.components.len());
    for c in 0..n_comp {
        let id = reports[0].components[c].id;
        let moduli: Vec<f64> = reports.iter().map(|r| r.components[c].modulus).collect();
        let (slope, intercept, r2) = linear_fit(levels, &moduli);
        let decreasing = moduli.windows(2).all(|w| w[1] < w[0]);
        let ok = decreasing && r2 >= CONTINUITY_R2;
        pass &= ok;
        for (h, m) in levels.iter().zip(&moduli) {
            rows.push(row(format!("modulus:{id}"), *h, *m, m / h, ok));
        }
        fits.push(json!({ "component": id, "slope": slope, "intercept": intercept, "r2": r2 }));
    }
    let details = json!({ "levels": reports.iter().zip(levels).map(|(r, h)| json!({ "h": h, "report": r })).collect::<Vec<_>>(), "fits": fits });
    Ok(result(CheckName::Continuity, rows, pass, details))
}

fn poincare(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let st = Arc::new(run.cfg.build_structure(None)?);
    let space = FunctionSpace::new(st.clone());
    let relaxed = relaxation::relax(&run.cfg.config.coefficient_field()?, &st)?;
    let load = Load::uniform(Expr::num(0.0), st.components.len());
    let sys = solver::assemble(&space, &relaxed, &load, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    let mut rows = Vec::new();
    let mut pass = v.poincare_samples > 0;
    let mut estimates = Vec::new();
    for k in 0..sys.groups.len() {
        let est = solver::poincare_constant(&sys, k, run.seed.wrapping_add(k as u64))?;
        let mut worst: f64 = 0.0;
        for s in 0..v.poincare_samples {
            let mut w = if s % 2 == 0 {
                let field = exprlang::random_smooth(&mut rng);
                MuFunction::interpolate(&space, &field)?.values
            } else {
                (0..space.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect()
            };
            for (x, c) in w.iter_mut().zip(&sys.groups.chi[k]) {
                *x *= c;
            }
            sys.project_primal(&mut w);
            let mass = quadratic(&sys.m, &w);
            let energy = quadratic(&sys.a, &w);
            if mass > 0.0 {
                worst = worst.max(mass / (est.constant * energy));
            }
        }
        let ok = worst <= 1.0 + POINCARE_REL_TOL;
        pass &= ok;
        rows.push(row(format!("poincare:{k}"), st.h, est.constant, worst, ok));
        estimates.push(json!({ "group": sys.groups.ids[k], "estimate": est, "worst_ratio": worst }));
    }
    let details = json!({ "samples": v.poincare_samples, "groups": estimates });
    Ok(result(CheckName::Poincare, rows, pass, details))
}

fn quadratic(m: &Csr, w: &[f64]) -> f64 {
    m.matvec(w).iter().zip(w).map(|(a, b)| a * b).sum()
}

fn relax(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let suite = relaxation::random_suite(v.relax_cases, run.seed)?;
    let rows = vec![
        row(
            "relax:basis_independence",
            0.0,
            suite.basis_independence,
            suite.basis_independence / 1e-10,
            suite.basis_independence <= 1e-10,
        ),
        row("relax:annihilation", 0.0, suite.annihilation, suite.annihilation / 1e-9, suite.annihilation <= 1e-9),
        row(
            "relax:variational",
            0.0,
            suite.variational_gap,
            suite.variational_gap / 1e-8,
            suite.variational_gap <= 1e-8,
        ),
    ];
    Ok(result(CheckName::Relax, rows, suite.pass, json!(suite)))
}

fn second_order(run: &Run) -> Result<CheckResult> {
    let v = &run.cfg.config.verify;
    let st = run.cfg.build_structure(None)?;
    let mut fields =
        v.second_order_fields.iter().map(|t| exprlang::parse(t)).collect::<std::result::Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
    fields.extend((0..v.second_order_random).map(|_| exprlang::random_smooth(&mut rng)));
    let mut rows = Vec::new();
    let mut pass = !fields.is_empty();
    let mut details = Vec::new();
    for (i, phi) in fields.iter().enumerate() {
        let rep = verify::second_order_residual(phi, &st)?;
        let ok = rep.max_residual <= SECOND_ORDER_TOL;
        pass &= ok;
        rows.push(row(format!("second_order:{i}"), st.h, rep.max_residual, rep.max_residual / SECOND_ORDER_TOL, ok));
        details.push(json!({ "field": phi.to_string(), "report": rep }));
    }
    Ok(result(CheckName::SecondOrder, rows, pass, json!({ "fields": details })))
}
