//! The full oracle battery behind `nodebound verify`.

use std::time::Instant;

use serde::Serialize;

use super::*;
use crate::bounds::{
    covering_bound_monotone, loglog_slope, marion_bound, rademacher_bound, solution_norm_bound, ComplexityParams,
    MarionParams, RadiusCondition, SolutionBoundParams,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

pub const RADEMACHER_CASES: u64 = 50;
pub const TRAJECTORY_CASES: u64 = 1000;
pub const GRADIENT_CASES: u64 = 100;
pub const GRONWALL_CASES: u64 = 100;

fn timed(name: &str, f: impl FnOnce() -> Result<(bool, String), OracleError>) -> OracleCheck {
    let start = Instant::now();
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    OracleCheck { name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs()
}

pub fn bound_golden_values() -> Result<(bool, String), OracleError> {
    let err = |e: crate::bounds::BoundError| OracleError::OutOfRange(e.to_string());
    let v = solution_norm_bound(&SolutionBoundParams::new(1.0, 1.0, 1.0, 2.0, 1.0, 2, 1.0)).map_err(err)?;
    let cover = covering_bound_monotone(1.0, 1.0, 0.25, RadiusCondition::Enforce).map_err(err)?.value;
    let rad = rademacher_bound(&ComplexityParams::new(1.0, 1.0, 1, 100, 1.0)).map_err(err)?.value;
    let ok = rel_close(v, 4.0 * std::f64::consts::E, 1e-12)
        && rel_close(cover, 65536.0 / 18.0, 1e-12)
        && (3.9999..=4.0001).contains(&rad);
    Ok((ok, format!("V = {v:.15}, N = {cover:.6}, R = {rad:.6}")))
}

pub fn combinatorial_identities() -> Result<(bool, String), OracleError> {
    let mut ok = true;
    for n in 0..=MAX_ENUMERATED_N {
        ok &= count_monotone(n)?.count == central_binomial(n)?;
    }
    for n in 0..30 {
        ok &= central_binomial_recurrence_holds(n)?;
    }
    for n in 1..30 {
        ok &= central_binomial_bound(n)?.holds;
    }
    Ok((ok, "monotone counts 0..=8, recurrence 0..30, bound 1..30".into()))
}

pub fn gamma_grid_check() -> Result<(bool, String), OracleError> {
    let grid = gamma_grid();
    let mut failures = 0;
    for &(x, lambda) in &grid {
        if !gamma_ratio_check(x, lambda)?.passed {
            failures += 1;
        }
    }
    Ok((failures == 0, format!("{} points, {failures} failures", grid.len())))
}

pub fn gronwall_cases(cases: u64) -> Result<(bool, String), OracleError> {
    let mut failures = 0;
    let mut worst = f64::INFINITY;
    for kind in GronwallKind::ALL {
        for seed in 0..cases {
            let out = gronwall_check(&random_gronwall_case(kind, seed))?;
            worst = worst.min(out.min_slack);
            if !out.passed {
                failures += 1;
            }
        }
    }
    Ok((failures == 0, format!("{} cases, {failures} failures, min slack {worst:.3e}", 3 * cases)))
}

pub fn covering_soundness() -> Result<(bool, String), OracleError> {
    let mut ok = true;
    let mut parts = Vec::new();
    for grid in [6, 8] {
        let class = StaircaseClass::new(grid, 1.0, 1.0)?.at_midpoints();
        for tau in [0.5, 0.25] {
            let cover = exact_covering_number(&class, tau, CoverStrategy::Auto)?;
            let bound = covering_bound_monotone(1.0, 1.0, tau, RadiusCondition::Enforce)
                .map_err(|e| OracleError::OutOfRange(e.to_string()))?
                .value;
            ok &= (cover.size as f64) <= bound;
            parts.push(format!("N={grid} τ={tau}: {} ≤ {bound:.1}", cover.size));
        }
    }
    Ok((ok, parts.join("; ")))
}

pub fn rademacher_soundness(cases: u64) -> Result<(bool, String), OracleError> {
    let mut violations = 0;
    let mut checked = 0;
    for seed in 0..cases {
        let case = rademacher_case(seed)?;
        if case.bound.is_some() {
            checked += 1;
        }
        if !case.sound() {
            violations += 1;
        }
    }
    Ok((violations == 0, format!("{cases} classes, {checked} meet the precondition, {violations} violations")))
}

pub fn trajectory_soundness(cases: u64) -> Result<(bool, String), OracleError> {
    let (mut norm_fail, mut tv_fail) = (0, 0);
    for seed in 0..cases {
        let case = trajectory_case(seed)?;
        norm_fail += usize::from(!case.norm_sound());
        tv_fail += usize::from(!case.variation_sound());
    }
    Ok((
        norm_fail + tv_fail == 0,
        format!("{cases} models, {norm_fail} norm violations, {tv_fail} variation violations"),
    ))
}

pub const GRADIENT_TOL: f64 = 1e-4;

pub fn gradient_agreement(cases: u64) -> Result<(bool, String), OracleError> {
    let mut worst = 0.0f64;
    for seed in 0..cases {
        worst = worst.max(gradient_case(seed)?.relative_error);
    }
    Ok((worst < GRADIENT_TOL, format!("{cases} losses, worst relative error {worst:.3e}")))
}

pub fn rk4_order() -> Result<(bool, String), OracleError> {
    let order = rk4_convergence_order();
    Ok(((3.8..=4.2).contains(&order), format!("fitted order {order:.4}")))
}

fn unit_marion(n: usize) -> MarionParams {
    MarionParams {
        m: 1,
        r_theta: 1.0,
        k_theta: 1.0,
        k_loss: 1.0,
        k_f: 1.0,
        r_x: 1.0,
        r_y: 1.0,
        m_bound: 1.0,
        n,
        delta: 0.05,
        empirical_risk: 0.0,
    }
}

/// Log-log slopes of the `K_Θ` term of the Lipschitz-parameter bound over
/// `n ∈ {10⁴, …, 10⁷}` and of the Rademacher bound over `n ∈ {10⁶, …, 10⁹}`.
pub fn rate_slopes() -> Result<(f64, f64), OracleError> {
    let err = |e: crate::bounds::BoundError| OracleError::OutOfRange(e.to_string());
    let ns: Vec<f64> = (4..=7).map(|k| 10f64.powi(k)).collect();
    let k_theta: Vec<f64> = ns
        .iter()
        .map(|&n| marion_bound(&unit_marion(n as usize)).map(|r| r.term("k_theta_term").unwrap_or(f64::NAN)))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let ms: Vec<f64> = (6..=9).map(|k| 10f64.powi(k)).collect();
    let rad: Vec<f64> = ms
        .iter()
        .map(|&n| rademacher_bound(&ComplexityParams::new(1.0, 1.0, 1, n as usize, 1.0)).map(|r| r.value))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    let nan = f64::NAN;
    Ok((loglog_slope(&ns, &k_theta).unwrap_or(nan), loglog_slope(&ms, &rad).unwrap_or(nan)))
}

pub fn rate_comparison() -> Result<(bool, String), OracleError> {
    let (k_theta, rad) = rate_slopes()?;
    let ok = (k_theta + 0.25).abs() <= 1e-6 && (-0.55..=-0.45).contains(&rad);
    Ok((ok, format!("K_theta slope {k_theta:.8}, Rademacher slope {rad:.6}")))
}

/// Runs every check; the returned list is in a fixed order.
pub fn run_oracle_suite() -> Vec<OracleCheck> {
    vec![
        timed("bound golden values", bound_golden_values),
        timed("combinatorial identities", combinatorial_identities),
        timed("gamma ratio grid", gamma_grid_check),
        timed("gronwall lemmas", || gronwall_cases(GRONWALL_CASES)),
        timed("covering soundness", covering_soundness),
        timed("rademacher soundness", || rademacher_soundness(RADEMACHER_CASES)),
        timed("trajectory bounds", || trajectory_soundness(TRAJECTORY_CASES)),
        timed("tape gradients", || gradient_agreement(GRADIENT_CASES)),
        timed("rk4 order", rk4_order),
        timed("rate comparison", rate_comparison),
    ]
}

/// Fixed-width pass/fail table.
pub fn format_table(checks: &[OracleCheck]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:<width$}  {:>8.3}s  {}\n", c.name, c.seconds, c.detail));
    }
    out
}
