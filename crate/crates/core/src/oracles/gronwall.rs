//! Numerical checks of the continuous, sum-form and recurrence-form Gronwall
//! inequalities on concrete inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::OracleError;

/// Relative tolerance used when confirming a hypothesis or a conclusion.
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GronwallInput {
    /// `u(t) ≤ α(t) + ∫_0^t β u` on a uniform grid with step `h`, integrals by
    /// left Riemann sums. Conclusion `u(t) ≤ α(t)·exp(∫_0^t β)`.
    Continuous { h: f64, alpha: Vec<f64>, beta: Vec<f64>, u: Vec<f64> },
    /// `y_n ≤ f_n + Σ_{l<n} b_l y_l`. Conclusion
    /// `y_n ≤ f_n + Σ_{l<n} f_l b_l Π_{j=l+1}^{n−1} (1 + b_j)`.
    SequenceSum { y: Vec<f64>, b: Vec<f64>, f: Vec<f64> },
    /// `u_k ≤ a_k u_{k−1} + b_k` for `k ≥ 1`; `a`, `b` are indexed from 1 with
    /// a placeholder at 0. Conclusion
    /// `u_k ≤ (Π_{j≤k} a_j) u_0 + Σ_{j≤k} b_j Π_{i=j+1}^{k} a_i`.
    SequenceRecurrence { u: Vec<f64>, a: Vec<f64>, b: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallOutcome {
    pub passed: bool,
    /// `min_k (RHS_k − LHS_k)`; negative on failure.
    pub min_slack: f64,
    pub worst_index: usize,
}

fn slack_ok(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + TOL * rhs.abs().max(lhs.abs()).max(1.0)
}

fn same_len(lens: &[usize]) -> Result<usize, OracleError> {
    let n = lens[0];
    if n == 0 || lens.iter().any(|&l| l != n) {
        return Err(OracleError::Hypothesis("sequences must be nonempty and of equal length".into()));
    }
    Ok(n)
}

fn outcome(lhs: &[f64], rhs: &[f64]) -> GronwallOutcome {
    let (worst_index, min_slack) = lhs
        .iter()
        .zip(rhs)
        .map(|(l, r)| r - l)
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, s)| if s < acc.1 { (i, s) } else { acc });
    let passed = lhs.iter().zip(rhs).all(|(&l, &r)| slack_ok(l, r));
    GronwallOutcome { passed, min_slack, worst_index }
}

/// Verifies the hypothesis (rejecting inputs that violate it) and then the
/// conclusion.
pub fn gronwall_check(input: &GronwallInput) -> Result<GronwallOutcome, OracleError> {
    match input {
        GronwallInput::Continuous { h, alpha, beta, u } => {
            let n = same_len(&[alpha.len(), beta.len(), u.len()])?;
            if !(*h > 0.0) {
                return Err(OracleError::Hypothesis("h must be positive".into()));
            }
            if beta.iter().any(|&b| b < 0.0) {
                return Err(OracleError::Hypothesis("beta must be nonnegative".into()));
            }
            if alpha.iter().any(|&a| a < 0.0) || alpha.windows(2).any(|w| w[1] < w[0]) {
                return Err(OracleError::Hypothesis("alpha must be nonnegative and nondecreasing".into()));
            }
            let mut integral_bu = 0.0;
            let mut integral_b = 0.0f64;
            let mut rhs = Vec::with_capacity(n);
            for k in 0..n {
                if !slack_ok(u[k], alpha[k] + integral_bu) {
                    return Err(OracleError::Hypothesis(format!("integral inequality fails at node {k}")));
                }
                rhs.push(alpha[k] * integral_b.exp());
                integral_bu += h * beta[k] * u[k];
                integral_b += h * beta[k];
            }
            Ok(outcome(u, &rhs))
        }
        GronwallInput::SequenceSum { y, b, f } => {
            let n = same_len(&[y.len(), b.len(), f.len()])?;
            if y.iter().chain(b).chain(f).any(|&v| v < 0.0) {
                return Err(OracleError::Hypothesis("sequences must be nonnegative".into()));
            }
            let mut rhs = Vec::with_capacity(n);
            for k in 0..n {
                let hyp: f64 = f[k] + (0..k).map(|l| b[l] * y[l]).sum::<f64>();
                if !slack_ok(y[k], hyp) {
                    return Err(OracleError::Hypothesis(format!("sum inequality fails at index {k}")));
                }
                let bound: f64 = f[k]
                    + (0..k).map(|l| f[l] * b[l] * ((l + 1)..k).map(|j| 1.0 + b[j]).product::<f64>()).sum::<f64>();
                rhs.push(bound);
            }
            Ok(outcome(y, &rhs))
        }
        GronwallInput::SequenceRecurrence { u, a, b } => {
            let n = same_len(&[u.len(), a.len(), b.len()])?;
            if a[1..].iter().chain(&b[1..]).any(|&v| v < 0.0) {
                return Err(OracleError::Hypothesis("a and b must be nonnegative".into()));
            }
            let mut rhs = vec![u[0]];
            for k in 1..n {
                if !slack_ok(u[k], a[k] * u[k - 1] + b[k]) {
                    return Err(OracleError::Hypothesis(format!("recurrence fails at index {k}")));
                }
                let lead: f64 = a[1..=k].iter().product::<f64>() * u[0];
                let tail: f64 = (1..=k).map(|j| b[j] * a[j + 1..=k].iter().product::<f64>()).sum();
                rhs.push(lead + tail);
            }
            Ok(outcome(u, &rhs))
        }
    }
}

/// Random inputs that satisfy the respective hypothesis, each `u` pushed a
/// random fraction of the way below its upper limit.
pub fn random_gronwall_case(kind: GronwallKind, seed: u64) -> GronwallInput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..40);
    match kind {
        GronwallKind::Continuous => {
            let h = rng.gen_range(0.01..0.2);
            let mut alpha = Vec::with_capacity(n);
            let mut level = rng.gen_range(0.0..2.0);
            for _ in 0..n {
                level += rng.gen_range(0.0..0.5);
                alpha.push(level);
            }
            let beta: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let mut u = Vec::with_capacity(n);
            let mut integral = 0.0;
            for k in 0..n {
                let cap: f64 = alpha[k] + integral;
                let uk = cap * rng.gen_range(0.0..=1.0);
                integral += h * beta[k] * uk;
                u.push(uk);
            }
            GronwallInput::Continuous { h, alpha, beta, u }
        }
        GronwallKind::SequenceSum => {
            let f: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut y = Vec::with_capacity(n);
            for (k, fk) in f.iter().enumerate() {
                let cap: f64 = fk + (0..k).map(|l| b[l] * y[l]).sum::<f64>();
                y.push(cap * rng.gen_range(0.0..=1.0));
            }
            GronwallInput::SequenceSum { y, b, f }
        }
        GronwallKind::SequenceRecurrence => {
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let mut u = vec![rng.gen_range(0.0..2.0)];
            for k in 1..n {
                let cap = a[k] * u[k - 1] + b[k];
                u.push(cap * rng.gen_range(0.0..=1.0));
            }
            GronwallInput::SequenceRecurrence { u, a, b }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GronwallKind {
    Continuous,
    SequenceSum,
    SequenceRecurrence,
}

impl GronwallKind {
    pub const ALL: [GronwallKind; 3] =
        [GronwallKind::Continuous, GronwallKind::SequenceSum, GronwallKind::SequenceRecurrence];

    pub fn name(self) -> &'static str {
        match self {
            GronwallKind::Continuous => "continuous",
            GronwallKind::SequenceSum => "sequence_sum",
            GronwallKind::SequenceRecurrence => "sequence_recurrence",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_with_equality() {
        let input = GronwallInput::SequenceRecurrence {
            u: vec![0.0, 1.0, 3.0, 7.0],
            a: vec![0.0, 2.0, 2.0, 2.0],
            b: vec![0.0, 1.0, 1.0, 1.0],
        };
        let out = gronwall_check(&input).unwrap();
        assert!(out.passed);
        assert_eq!(out.min_slack, 0.0);
    }

    #[test]
    fn zero_beta_reduces_to_alpha() {
        let alpha = vec![1.0, 1.5, 2.0];
        let input = GronwallInput::Continuous { h: 0.1, alpha: alpha.clone(), beta: vec![0.0; 3], u: alpha };
        let out = gronwall_check(&input).unwrap();
        assert!(out.passed && out.min_slack == 0.0);
    }

    #[test]
    fn hypothesis_violations_are_rejected() {
        let bad = GronwallInput::Continuous { h: 0.1, alpha: vec![2.0, 1.0], beta: vec![0.0; 2], u: vec![0.0; 2] };
        assert!(matches!(gronwall_check(&bad), Err(OracleError::Hypothesis(_))));
        let bad = GronwallInput::SequenceSum { y: vec![5.0], b: vec![1.0], f: vec![1.0] };
        assert!(matches!(gronwall_check(&bad), Err(OracleError::Hypothesis(_))));
    }

    #[test]
    fn random_cases_pass() {
        for kind in GronwallKind::ALL {
            for seed in 0..100 {
                let out = gronwall_check(&random_gronwall_case(kind, seed)).unwrap();
                assert!(out.passed, "{} seed {seed}: {out:?}", kind.name());
            }
        }
    }
}
