//! Largest singular value by power iteration on `MᵀM`.

use super::matrix::{norm, Matrix};
use super::NumericsError;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 10_000;

/// Converged (or best-effort) leading singular triple.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralNorm {
    pub sigma: f64,
    /// Left singular vector `u` (length `rows`).
    pub left: Vec<f64>,
    /// Right singular vector `v` (length `cols`).
    pub right: Vec<f64>,
    pub iterations: usize,
    /// False when `max_iter` ran out before the relative change dropped
    /// below `tol`; `sigma` then carries the best estimate seen.
    pub converged: bool,
}

/// Estimates `‖m‖₂` by power iteration started from the normalized
/// all-ones vector.
///
/// Each estimate is `‖M v‖` for a unit `v`, so the result never exceeds the
/// true spectral norm. Iteration stops once the relative change of the
/// estimate is at most `tol` and the right vector moved by at most `tol`. If
/// `M·1 = 0` for a nonzero `M`, the iteration restarts from the basis vector
/// of the column with the largest norm.
pub fn spectral_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<SpectralNorm, NumericsError> {
    power_iteration(m, None, tol, max_iter, true)
}

/// Like [`spectral_norm`] but started from `start` (when it has the right
/// length and is not in the kernel) and stopped on the relative change of
/// the value alone. Suited to tracking a slowly changing matrix.
pub fn spectral_norm_warm(
    m: &Matrix,
    start: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralNorm, NumericsError> {
    power_iteration(m, start, tol, max_iter, false)
}

fn power_iteration(
    m: &Matrix,
    start: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
    settle_vector: bool,
) -> Result<SpectralNorm, NumericsError> {
    if !(tol > 0.0) {
        return Err(NumericsError::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    if max_iter == 0 {
        return Err(NumericsError::InvalidArgument("max_iter must be at least 1".into()));
    }
    let (rows, cols) = m.shape();
    if m.as_slice().iter().all(|&x| x == 0.0) {
        return Ok(SpectralNorm {
            sigma: 0.0,
            left: vec![0.0; rows],
            right: vec![0.0; cols],
            iterations: 0,
            converged: true,
        });
    }

    let mut v = match start {
        Some(s) if s.len() == cols && norm(s) > 0.0 => {
            let n = norm(s);
            s.iter().map(|x| x / n).collect()
        }
        _ => vec![1.0 / (cols as f64).sqrt(); cols],
    };
    let mut mv = m.matvec(&v);
    let mut sigma = norm(&mv);
    if sigma == 0.0 {
        let best_col = (0..cols)
            .map(|j| (j, (0..rows).map(|i| m.get(i, j).powi(2)).sum::<f64>()))
            .fold((0, -1.0), |acc, (j, s)| if s > acc.1 { (j, s) } else { acc })
            .0;
        v = vec![0.0; cols];
        v[best_col] = 1.0;
        mv = m.matvec(&v);
        sigma = norm(&mv);
    }

    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let u: Vec<f64> = mv.iter().map(|x| x / sigma).collect();
        let w = m.matvec_t(&u);
        let wn = norm(&w);
        let next_v: Vec<f64> = w.iter().map(|x| x / wn).collect();
        let next_mv = m.matvec(&next_v);
        let next_sigma = norm(&next_mv);
        let change = (next_sigma - sigma).abs();
        let drift = if settle_vector {
            next_v.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        } else {
            0.0
        };
        if next_sigma >= sigma {
            v = next_v;
            mv = next_mv;
            sigma = next_sigma;
        }
        if change <= tol * sigma && drift <= tol {
            converged = true;
            break;
        }
    }

    let left = mv.iter().map(|x| x / sigma).collect();
    Ok(SpectralNorm { sigma, left, right: v, iterations, converged })
}
