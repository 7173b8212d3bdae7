//! Exact counts behind the staircase covering construction.

use super::OracleError;

/// Largest grid size that is enumerated; beyond it the closed form is used.
pub const MAX_ENUMERATED_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonotoneCount {
    pub count: u128,
    /// False when the count came from the closed form.
    pub enumerated: bool,
}

/// Number of integer sequences `0 ≤ a_0 ≤ … ≤ a_{N−1} ≤ N`.
pub fn count_monotone(n: usize) -> Result<MonotoneCount, OracleError> {
    if n > MAX_ENUMERATED_N {
        return Ok(MonotoneCount { count: central_binomial(n)?, enumerated: false });
    }
    fn walk(remaining: usize, floor: usize, top: usize) -> u128 {
        if remaining == 0 {
            return 1;
        }
        (floor..=top).map(|a| walk(remaining - 1, a, top)).sum()
    }
    Ok(MonotoneCount { count: walk(n, 0, n), enumerated: true })
}

/// Every nondecreasing level sequence of length `n` with levels in `0..=n`,
/// in lexicographic order.
pub fn monotone_sequences(n: usize) -> Vec<Vec<u8>> {
    fn walk(prefix: &mut Vec<u8>, remaining: usize, floor: u8, top: u8, out: &mut Vec<Vec<u8>>) {
        if remaining == 0 {
            out.push(prefix.clone());
            return;
        }
        for a in floor..=top {
            prefix.push(a);
            walk(prefix, remaining - 1, a, top, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    walk(&mut Vec::with_capacity(n), n, 0, n as u8, &mut out);
    out
}

/// `C(2n, n)` in exact integer arithmetic; rejected on overflow.
pub fn central_binomial(n: usize) -> Result<u128, OracleError> {
    let mut c: u128 = 1;
    for i in 1..=n as u128 {
        // C(n+i, i) = C(n+i−1, i−1)·(n+i)/i stays integral.
        c = c
            .checked_mul(n as u128 + i)
            .ok_or(OracleError::Overflow { n })?
            / i;
    }
    Ok(c)
}

/// `(n+1)·C(2n+2, n+1) = (4n+2)·C(2n, n)`.
pub fn central_binomial_recurrence_holds(n: usize) -> Result<bool, OracleError> {
    let next = central_binomial(n + 1)?;
    let cur = central_binomial(n)?;
    let lhs = (n as u128 + 1).checked_mul(next).ok_or(OracleError::Overflow { n: n + 1 })?;
    let rhs = (4 * n as u128 + 2).checked_mul(cur).ok_or(OracleError::Overflow { n })?;
    Ok(lhs == rhs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialBoundCheck {
    pub exact: u128,
    /// `4ⁿ/√(πn)`.
    pub bound: f64,
    pub holds: bool,
}

pub fn central_binomial_bound(n: usize) -> Result<BinomialBoundCheck, OracleError> {
    if n == 0 {
        return Err(OracleError::OutOfRange("the bound needs n >= 1".into()));
    }
    let exact = central_binomial(n)?;
    let bound = 4f64.powi(n as i32) / (std::f64::consts::PI * n as f64).sqrt();
    Ok(BinomialBoundCheck { exact, bound, holds: (exact as f64) <= bound })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerated_counts() {
        assert_eq!(count_monotone(0).unwrap().count, 1);
        assert_eq!(count_monotone(1).unwrap().count, 2);
        assert_eq!(count_monotone(2).unwrap().count, 6);
        assert_eq!(count_monotone(3).unwrap().count, 20);
        assert_eq!(monotone_sequences(2), vec![vec![0, 0], vec![0, 1], vec![0, 2], vec![1, 1], vec![1, 2], vec![2, 2]]);
        let big = count_monotone(9).unwrap();
        assert!(!big.enumerated);
        assert_eq!(big.count, 48620);
    }

    #[test]
    fn central_binomial_examples() {
        assert_eq!(central_binomial(0).unwrap(), 1);
        assert_eq!(central_binomial(5).unwrap(), 252);
        assert_eq!(central_binomial(6).unwrap(), 924);
        assert_eq!(6 * 924, 22 * 252);
        assert!(central_binomial_recurrence_holds(5).unwrap());
        let b = central_binomial_bound(6).unwrap();
        assert!(b.holds && (b.bound - 943.43).abs() < 0.01);
        assert_eq!(central_binomial(30).unwrap(), 118_264_581_564_861_424);
    }

    #[test]
    fn overflow_is_rejected() {
        assert!(central_binomial(60).is_ok());
        assert!(matches!(central_binomial(70), Err(OracleError::Overflow { .. })));
    }
}
