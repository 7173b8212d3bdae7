//! The two-sided gamma-ratio inequality
//! `x^{1−λ} ≤ Γ(x+1)/Γ(x+λ) ≤ (x+1)^{1−λ}`.

use statrs::function::gamma::ln_gamma;

use super::OracleError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRatioCheck {
    pub x: f64,
    pub lambda: f64,
    pub lower: f64,
    pub ratio: f64,
    pub upper: f64,
    pub passed: bool,
}

pub fn gamma_ratio_check(x: f64, lambda: f64) -> Result<GammaRatioCheck, OracleError> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(OracleError::OutOfRange(format!("x must be positive, got {x}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(OracleError::OutOfRange(format!("lambda must be in (0, 1), got {lambda}")));
    }
    let lower = x.powf(1.0 - lambda);
    let ratio = (ln_gamma(x + 1.0) - ln_gamma(x + lambda)).exp();
    let upper = (x + 1.0).powf(1.0 - lambda);
    Ok(GammaRatioCheck { x, lambda, lower, ratio, upper, passed: lower <= ratio && ratio <= upper })
}

/// Nine log-spaced `x` in `[0.1, 10]` by `λ ∈ {0.1, …, 0.9}`.
pub fn gamma_grid() -> Vec<(f64, f64)> {
    let xs = (0..9).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 8.0));
    xs.flat_map(|x| (1..=9).map(move |k| (x, k as f64 / 10.0))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_integer_example() {
        let c = gamma_ratio_check(1.0, 0.5).unwrap();
        // Γ(1.5) = √π/2.
        assert!((c.ratio - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert_eq!(c.lower, 1.0);
        assert!((c.upper - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.passed);
    }

    #[test]
    fn near_one_all_three_agree() {
        let c = gamma_ratio_check(2.0, 0.999).unwrap();
        assert!(c.passed);
        assert!((c.lower - c.ratio).abs() < 1e-3 && (c.upper - c.ratio).abs() < 1e-3);
    }

    #[test]
    fn grid_passes() {
        let grid = gamma_grid();
        assert_eq!(grid.len(), 81);
        assert!((grid[0].0 - 0.1).abs() < 1e-15 && (grid[80].0 - 10.0).abs() < 1e-12);
        assert!(grid.iter().all(|&(x, l)| gamma_ratio_check(x, l).unwrap().passed));
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(gamma_ratio_check(0.0, 0.5).is_err());
        assert!(gamma_ratio_check(1.0, 1.0).is_err());
    }
}
