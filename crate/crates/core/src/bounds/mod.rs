//! Closed-form bounds: solution norm, covering numbers, Rademacher
//! complexity, the generalization bound for neural ODEs and two comparison
//! bounds from related work. All logarithms are natural unless named `log2`.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::NeuralOdeModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("parameter {name} = {value} is invalid: must be {requirement}")]
    InvalidParameter { name: &'static str, value: f64, requirement: &'static str },
    #[error("precondition {name} violated: {detail}")]
    Precondition { name: &'static str, detail: String },
    #[error(
        "rademacher precondition b >= 36·L·V·d^(3/2)·ln2/n violated: b = {b}, minimal admissible b = {min_b}{}",
        if *weaker_condition_holds { " (the weaker b >= 36·L·V·ln2/n does hold)" } else { "" }
    )]
    RademacherPrecondition { b: f64, min_b: f64, weaker_condition_holds: bool },
    #[error("negative radicand {radicand}: U1 = {u1}, U2 = {u2}, U3 = {u3}")]
    NegativeRadicand { radicand: f64, u1: f64, u2: f64, u3: f64 },
}

fn nonneg(name: &'static str, value: f64) -> Result<f64, BoundError> {
    if value >= 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(BoundError::InvalidParameter { name, value, requirement: "finite and >= 0" })
    }
}

fn positive(name: &'static str, value: f64) -> Result<f64, BoundError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(BoundError::InvalidParameter { name, value, requirement: "finite and > 0" })
    }
}

fn at_least_one(name: &'static str, value: usize) -> Result<f64, BoundError> {
    if value >= 1 {
        Ok(value as f64)
    } else {
        Err(BoundError::InvalidParameter { name, value: value as f64, requirement: ">= 1" })
    }
}

fn probability(name: &'static str, value: f64) -> Result<f64, BoundError> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(BoundError::InvalidParameter { name, value, requirement: "strictly between 0 and 1" })
    }
}

/// `‖A(0)‖ + L_A · L`.
pub fn weight_norm_bound(norm_at_0: f64, lipschitz: f64, horizon: f64) -> Result<f64, BoundError> {
    Ok(nonneg("norm_at_0", norm_at_0)? + nonneg("lipschitz", lipschitz)? * nonneg("horizon", horizon)?)
}

/// Initial norms and time-Lipschitz constants of the weights and biases from
/// which `𝒜` and `𝐁` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightPrimitives {
    pub weight_norm_at_0: f64,
    pub bias_norm_at_0: f64,
    pub weight_lipschitz: f64,
    pub bias_lipschitz: f64,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionBoundParams {
    pub z0_norm: f64,
    pub t: f64,
    pub l_sigma: f64,
    /// `𝒜`; derived from `primitives` when absent.
    #[serde(default)]
    pub weight_bound: Option<f64>,
    /// `𝐁`; derived from `primitives` when absent.
    #[serde(default)]
    pub bias_bound: Option<f64>,
    pub depth: usize,
    pub l_f: f64,
    #[serde(default)]
    pub primitives: Option<WeightPrimitives>,
}

impl SolutionBoundParams {
    pub fn new(z0_norm: f64, t: f64, l_sigma: f64, weight_bound: f64, bias_bound: f64, depth: usize, l_f: f64) -> Self {
        Self {
            z0_norm,
            t,
            l_sigma,
            weight_bound: Some(weight_bound),
            bias_bound: Some(bias_bound),
            depth,
            l_f,
            primitives: None,
        }
    }

    /// Constants of a time-independent (or sine-modulated, since
    /// `|sin t| ≤ 1`) model over its whole horizon.
    pub fn from_model(model: &NeuralOdeModel, z0_norm: f64) -> Self {
        let dynamics = &model.dynamics;
        Self::new(
            z0_norm,
            model.horizon,
            dynamics.activation.lipschitz(),
            dynamics.weight_norm_bound(),
            dynamics.bias_norm_bound(),
            dynamics.depth(),
            model.network_lipschitz(),
        )
    }

    /// `(𝒜, 𝐁)` after derivation and consistency checks.
    pub fn resolved_bounds(&self) -> Result<(f64, f64), BoundError> {
        let derived = match &self.primitives {
            Some(p) => {
                let a = weight_norm_bound(p.weight_norm_at_0, p.weight_lipschitz, p.horizon)?;
                let b = weight_norm_bound(p.bias_norm_at_0, p.bias_lipschitz, p.horizon)?;
                if self.t > p.horizon {
                    return Err(BoundError::Precondition {
                        name: "t <= L",
                        detail: format!("t = {} exceeds horizon {}", self.t, p.horizon),
                    });
                }
                Some((a, b))
            }
            None => None,
        };
        let pick = |name: &'static str, explicit: Option<f64>, derived: Option<f64>| match (explicit, derived) {
            (Some(e), Some(d)) if (e - d).abs() > 1e-12 * e.abs().max(d.abs()).max(1.0) => {
                Err(BoundError::Precondition { name, detail: format!("explicit value {e} disagrees with derived {d}") })
            }
            (Some(e), _) => nonneg(name, e),
            (None, Some(d)) => Ok(d),
            (None, None) => Err(BoundError::Precondition { name, detail: "give the value or the primitives".into() }),
        };
        Ok((
            pick("weight_bound", self.weight_bound, derived.map(|d| d.0))?,
            pick("bias_bound", self.bias_bound, derived.map(|d| d.1))?,
        ))
    }
}

/// `G = ((L_σ𝒜)^N − 1)/(L_σ𝒜 − 1)`, or `N` at `L_σ𝒜 = 1`.
pub fn geometric_factor(l_sigma: f64, weight_bound: f64, depth: usize) -> f64 {
    let r = l_sigma * weight_bound;
    if (r - 1.0).abs() < 1e-12 {
        depth as f64
    } else {
        (r.powi(depth as i32) - 1.0) / (r - 1.0)
    }
}

/// `V = (‖z(0)‖ + t·L_σ·𝐁·G)·exp(t·L_f)`.
pub fn solution_norm_bound(p: &SolutionBoundParams) -> Result<f64, BoundError> {
    let z0 = nonneg("z0_norm", p.z0_norm)?;
    let t = positive("t", p.t)?;
    let l_sigma = positive("l_sigma", p.l_sigma)?;
    let l_f = nonneg("l_f", p.l_f)?;
    at_least_one("depth", p.depth)?;
    let (a, b) = p.resolved_bounds()?;
    let g = geometric_factor(l_sigma, a, p.depth);
    Ok((z0 + t * l_sigma * b * g) * (t * l_f).exp())
}

/// A covering-number bound kept in log space as well.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringBound {
    /// The bound itself; `+∞` when it exceeds `1e308`.
    pub value: f64,
    pub log2: f64,
}

impl CoveringBound {
    fn from_log2(log2: f64) -> Self {
        let value = if log2 > 1e308f64.log2() { f64::INFINITY } else { log2.exp2() };
        Self { value, log2 }
    }
}

/// Whether to enforce the radius condition `τ² ≤ L·V` of the covering
/// bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RadiusCondition {
    #[default]
    Enforce,
    Override,
}

fn check_radius(l: f64, v: f64, tau: f64, condition: RadiusCondition) -> Result<(), BoundError> {
    if condition == RadiusCondition::Enforce && tau * tau > l * v {
        return Err(BoundError::Precondition {
            name: "tau^2 <= L·V",
            detail: format!("tau = {tau} gives tau^2 = {} > L·V = {}", tau * tau, l * v),
        });
    }
    Ok(())
}

/// `2^{4LV/τ}/18` for nondecreasing functions on `[0, L]` with range `[0, V]`.
pub fn covering_bound_monotone(l: f64, v: f64, tau: f64, condition: RadiusCondition) -> Result<CoveringBound, BoundError> {
    let (l, v, tau) = (positive("L", l)?, positive("V", v)?, positive("tau", tau)?);
    check_radius(l, v, tau, condition)?;
    let exponent = 4.0 * l * v / tau;
    let log2 = exponent - 18f64.log2();
    let value = if log2 > 1e308f64.log2() { f64::INFINITY } else { exponent.exp2() / 18.0 };
    Ok(CoveringBound { value, log2 })
}

/// Bounded-variation class: `N_𝓘(τ/2)²` for `d = 1` and
/// `(2^{16LV√d/τ}/324)^d` for `d > 1`, where the radius condition applies to
/// `τ/√d`.
pub fn covering_bound_bv(l: f64, v: f64, tau: f64, d: usize, condition: RadiusCondition) -> Result<CoveringBound, BoundError> {
    let (l, v, tau) = (positive("L", l)?, positive("V", v)?, positive("tau", tau)?);
    let df = at_least_one("d", d)?;
    if d == 1 {
        check_radius(l, v, tau, condition)?;
        let half = covering_bound_monotone(l, v, tau / 2.0, RadiusCondition::Override)?;
        return Ok(CoveringBound { value: half.value * half.value, log2: 2.0 * half.log2 });
    }
    check_radius(l, v, tau / df.sqrt(), condition)?;
    Ok(CoveringBound::from_log2(df * (16.0 * l * v * df.sqrt() / tau - 324f64.log2())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexityParams {
    /// Time horizon `L`.
    pub horizon: f64,
    /// Solution bound `V`.
    pub v: f64,
    pub d: usize,
    pub n: usize,
    /// `sup √E[f²]`; defaults to `V`.
    #[serde(default)]
    pub b: Option<f64>,
}

impl ComplexityParams {
    pub fn new(horizon: f64, v: f64, d: usize, n: usize, b: f64) -> Self {
        Self { horizon, v, d, n, b: Some(b) }
    }

    pub fn b_or_default(&self) -> f64 {
        self.b.unwrap_or(self.v)
    }

    /// `c = L·V·d^{3/2}·ln 2`.
    pub fn c(&self) -> f64 {
        self.horizon * self.v * (self.d as f64).powf(1.5) * LN_2
    }

    fn validate(&self) -> Result<(), BoundError> {
        positive("L", self.horizon)?;
        positive("V", self.v)?;
        at_least_one("d", self.d)?;
        at_least_one("n", self.n)?;
        positive("b", self.b_or_default())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RademacherBound {
    /// `96√(b·c/n) − 576·c/n`.
    pub value: f64,
    /// Optimal Dudley cutoff `144·c/n`.
    pub epsilon_star: f64,
    pub c: f64,
    /// Smallest `b` for which the bound is nonnegative, `36·c/n`.
    pub min_b: f64,
}

pub fn rademacher_bound(p: &ComplexityParams) -> Result<RademacherBound, BoundError> {
    p.validate()?;
    let n = p.n as f64;
    let b = p.b_or_default();
    let c = p.c();
    let min_b = 36.0 * c / n;
    if b < min_b {
        let weaker = 36.0 * p.horizon * p.v * LN_2 / n;
        let weaker_condition_holds = b >= weaker;
        if weaker_condition_holds {
            log::warn!("b = {b} meets 36·L·V·ln2/n = {weaker} but not the dimension-aware minimum {min_b}");
        }
        return Err(BoundError::RademacherPrecondition { b, min_b, weaker_condition_holds });
    }
    let value = if b == min_b { 0.0 } else { 96.0 * (b * c / n).sqrt() - 576.0 * c / n };
    Ok(RademacherBound { value, epsilon_star: 144.0 * c / n, c, min_b })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreconditionCheck {
    pub name: String,
    pub holds: bool,
}

/// A bound split into named additive terms. `total` is the empirical risk
/// plus the sum of `terms`; `constants` holds intermediate quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: String,
    pub empirical_risk: f64,
    pub terms: Vec<BoundTerm>,
    pub total: f64,
    pub constants: Vec<BoundTerm>,
    pub preconditions: Vec<PreconditionCheck>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn assemble(bound: &str, empirical_risk: f64, terms: &[(&str, f64)], constants: &[(&str, f64)], checks: &[&str]) -> Self {
        let named = |items: &[(&str, f64)]| {
            items.iter().map(|&(name, value)| BoundTerm { name: name.to_string(), value }).collect::<Vec<_>>()
        };
        let total = empirical_risk + terms.iter().map(|t| t.1).sum::<f64>();
        Self {
            bound: bound.to_string(),
            empirical_risk,
            terms: named(terms),
            total,
            constants: named(constants),
            preconditions: checks.iter().map(|c| PreconditionCheck { name: c.to_string(), holds: true }).collect(),
            warnings: Vec::new(),
        }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.name == name).map(|t| t.value)
    }

    pub fn constant(&self, name: &str) -> Option<f64> {
        self.constants.iter().find(|t| t.name == name).map(|t| t.value)
    }

    /// Fixed-width text table of the report.
    pub fn to_table(&self) -> String {
        let mut out = format!("{} bound\n", self.bound);
        out += &format!("  {:<24} {:>18.10e}\n", "empirical_risk", self.empirical_risk);
        for t in &self.terms {
            out += &format!("  {:<24} {:>18.10e}\n", t.name, t.value);
        }
        out += &format!("  {:<24} {:>18.10e}\n", "total", self.total);
        for c in &self.constants {
            out += &format!("  ({:<22} {:>18.10e})\n", c.name, c.value);
        }
        for w in &self.warnings {
            out += &format!("  warning: {w}\n");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenBoundParams {
    pub empirical_risk: f64,
    /// Lipschitz constant `μ` of the loss.
    pub mu: f64,
    /// Loss bound `M`.
    pub loss_bound: f64,
    pub delta: f64,
    pub horizon: f64,
    pub v: f64,
    pub d: usize,
    pub n: usize,
    #[serde(default)]
    pub b: Option<f64>,
}

impl GenBoundParams {
    pub fn complexity(&self) -> ComplexityParams {
        ComplexityParams { horizon: self.horizon, v: self.v, d: self.d, n: self.n, b: self.b }
    }
}

/// `R^n + 2μ·rademacher_bound + 3M·√(ln(2/δ)/(2n))`.
pub fn generalization_bound(p: &GenBoundParams) -> Result<BoundReport, BoundError> {
    let risk = nonneg("empirical_risk", p.empirical_risk)?;
    let mu = nonneg("mu", p.mu)?;
    let m = nonneg("loss_bound", p.loss_bound)?;
    let delta = probability("delta", p.delta)?;
    let rad = rademacher_bound(&p.complexity())?;
    let n = p.n as f64;
    let confidence = 3.0 * m * ((2.0 / delta).ln() / (2.0 * n)).sqrt();
    Ok(BoundReport::assemble(
        "generalization",
        risk,
        &[("rademacher_term", 2.0 * mu * rad.value), ("confidence_term", confidence)],
        &[("rademacher_bound", rad.value), ("epsilon_star", rad.epsilon_star), ("c", rad.c), ("min_b", rad.min_b)],
        &["delta in (0,1)", "b >= 36·L·V·d^(3/2)·ln2/n"],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarionParams {
    /// Number of parameter functions `m`.
    pub m: usize,
    pub r_theta: f64,
    pub k_theta: f64,
    pub k_loss: f64,
    pub k_f: f64,
    pub r_x: f64,
    pub r_y: f64,
    /// Bound `M` on the dynamics.
    pub m_bound: f64,
    pub n: usize,
    pub delta: f64,
    #[serde(default)]
    pub empirical_risk: f64,
}

/// `B = 6·K_ℓ·K_f·e^{K_f R_Θ}·(R_X + M·R_Θ·e^{K_f R_Θ} + R_Y)`.
pub fn marion_constant(p: &MarionParams) -> f64 {
    let e = (p.k_f * p.r_theta).exp();
    6.0 * p.k_loss * p.k_f * e * (p.r_x + p.m_bound * p.r_theta * e + p.r_y)
}

/// Bound for ODEs `dH = Σ θ_i(t) f_i(H) dt` with `K_Θ`-Lipschitz parameters.
pub fn marion_bound(p: &MarionParams) -> Result<BoundReport, BoundError> {
    let m = at_least_one("m", p.m)?;
    let r_theta = positive("r_theta", p.r_theta)?;
    for (name, v) in [
        ("k_theta", p.k_theta),
        ("k_loss", p.k_loss),
        ("k_f", p.k_f),
        ("r_x", p.r_x),
        ("r_y", p.r_y),
        ("m_bound", p.m_bound),
        ("empirical_risk", p.empirical_risk),
    ] {
        nonneg(name, v)?;
    }
    let n = at_least_one("n", p.n)?;
    let delta = probability("delta", p.delta)?;
    let min_n = 9.0 * (1.0 / (m * m * r_theta * r_theta)).max(1.0);
    if n < min_n {
        return Err(BoundError::Precondition {
            name: "n >= 9·max(m^-2·R_theta^-2, 1)",
            detail: format!("n = {n} < {min_n}"),
        });
    }
    let log_arg = r_theta * m * n;
    if log_arg <= 1.0 {
        return Err(BoundError::Precondition {
            name: "R_theta·m·n > 1",
            detail: format!("R_theta·m·n = {log_arg}"),
        });
    }
    let b = marion_constant(p);
    Ok(BoundReport::assemble(
        "marion",
        p.empirical_risk,
        &[
            ("capacity_term", b * ((m + 1.0) * log_arg.ln() / n).sqrt()),
            ("k_theta_term", b * m * p.k_theta.sqrt() / n.powf(0.25)),
            ("confidence_term", b * (1.0 / delta).ln().sqrt() / n.sqrt()),
        ],
        &[("B", b)],
        &["delta in (0,1)", "n >= 9·max(m^-2·R_theta^-2, 1)", "R_theta·m·n > 1"],
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NcdeParams {
    pub m_theta: f64,
    pub l_loss: f64,
    pub m_loss: f64,
    pub p: usize,
    pub q: usize,
    pub d: usize,
    pub n: usize,
    pub delta: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Generalization gap bound for neural controlled differential equations
/// with caller-supplied composite constants `M_Θ`, `K₁`, `K₂`.
pub fn ncde_bound(p: &NcdeParams) -> Result<BoundReport, BoundError> {
    let m_theta = nonneg("m_theta", p.m_theta)?;
    let l_loss = nonneg("l_loss", p.l_loss)?;
    let m_loss = nonneg("m_loss", p.m_loss)?;
    let pp = at_least_one("p", p.p)?;
    let q = at_least_one("q", p.q)?;
    let d = at_least_one("d", p.d)?;
    let n = at_least_one("n", p.n)?;
    let delta = probability("delta", p.delta)?;
    let k1 = positive("k1", p.k1)?;
    let k2 = positive("k2", p.k2)?;
    let cq = 8.0 * q + 12.0;
    let u1 = (n.sqrt() * cq * k1).ln();
    let u2 = ((n * pp).sqrt() * cq * k2).ln();
    let u3 = ((n * d * pp).sqrt() * cq * k2).ln();
    let radicand = 2.0 * pp * u1 + (q - 1.0) * pp * (pp + 1.0) * u2 + d * pp * (2.0 + pp) * u3;
    if radicand < 0.0 {
        return Err(BoundError::NegativeRadicand { radicand, u1, u2, u3 });
    }
    Ok(BoundReport::assemble(
        "ncde",
        0.0,
        &[
            ("complexity_term", 24.0 * m_theta * l_loss / 2f64.sqrt() * radicand.sqrt()),
            ("confidence_term", m_loss * ((1.0 / delta).ln() / (2.0 * n)).sqrt()),
        ],
        &[("C_q", cq), ("U1", u1), ("U2", u2), ("U3", u3), ("radicand", radicand)],
        &["delta in (0,1)", "radicand >= 0"],
    ))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 || xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
