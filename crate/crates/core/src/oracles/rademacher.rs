//! Empirical Rademacher complexity of a finite sampled class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OracleError, SampledFunctionClass};

/// Sample sizes up to this are enumerated over all sign patterns.
pub const EXACT_MAX_SAMPLE: usize = 16;
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RademacherEstimate {
    pub value: f64,
    /// Zero for exact enumeration.
    pub std_error: f64,
    pub exact: bool,
}

fn sup_correlation(class: &SampledFunctionClass, signs: &[f64]) -> f64 {
    let n = signs.len() as f64;
    class
        .members
        .iter()
        .map(|f| f.iter().zip(signs).map(|(v, s)| v * s).sum::<f64>() / n)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E_σ[sup_f (1/n) Σ σ_i f(x_i)]`, exact for `n ≤ 16` and otherwise a
/// Monte Carlo mean over `trials` sign draws.
pub fn mc_rademacher(class: &SampledFunctionClass, trials: usize, seed: u64) -> Result<RademacherEstimate, OracleError> {
    if class.is_empty() {
        return Err(OracleError::EmptyClass);
    }
    let n = class.sample_size();
    if n <= EXACT_MAX_SAMPLE {
        let patterns = 1usize << n;
        let mut signs = vec![0.0; n];
        let mut total = 0.0;
        for mask in 0..patterns {
            for (i, s) in signs.iter_mut().enumerate() {
                *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
            }
            total += sup_correlation(class, &signs);
        }
        return Ok(RademacherEstimate { value: total / patterns as f64, std_error: 0.0, exact: true });
    }
    if trials < MIN_TRIALS {
        return Err(OracleError::OutOfRange(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut signs = vec![0.0; n];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..trials {
        for s in signs.iter_mut() {
            *s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        }
        let v = sup_correlation(class, &signs);
        sum += v;
        sum_sq += v * v;
    }
    let t = trials as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    Ok(RademacherEstimate { value: mean, std_error: (var / t).sqrt(), exact: false })
}
