use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Moment accumulators for one parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> Self {
        let zeros: Vec<Matrix> = params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect();
        Self { config, first: zeros.clone(), second: zeros, step: 0 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected Adam update applied in place.
    pub fn step(&mut self, params: &mut [Matrix], grads: &[Matrix]) -> Result<(), NumericsError> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(NumericsError::InvalidArgument(format!(
                "adam expects {} parameters, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != m.shape() || g.shape() != m.shape() {
                return Err(NumericsError::ShapeMismatch { expected: m.shape(), found: g.shape() });
            }
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.first.iter_mut().zip(self.second.iter_mut())) {
            let p = p.as_mut_slice();
            let m = m.as_mut_slice();
            let v = v.as_mut_slice();
            for (i, &gi) in g.as_slice().iter().enumerate() {
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let update = lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
                if update != 0.0 {
                    p[i] -= update;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut params = vec![Matrix::filled(2, 2, 0.7)];
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::default(), &params);
        state.step(&mut params, &[Matrix::zeros(2, 2)]).unwrap();
        assert_eq!(params, before);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_moves_by_about_lr() {
        let mut params = vec![Matrix::row_vector(&[1.0, -2.0, 0.0]).unwrap()];
        let grads = vec![Matrix::row_vector(&[0.3, -5.0, 1e-3]).unwrap()];
        let mut state = AdamState::new(AdamConfig::with_lr(0.01), &params);
        state.step(&mut params, &grads).unwrap();
        let moved: Vec<f64> = params[0].as_slice().iter().zip([1.0, -2.0, 0.0]).map(|(a, b)| b - a).collect();
        for (d, g) in moved.iter().zip(grads[0].as_slice()) {
            assert!(d.abs() <= 0.01 * (1.0 + 1e-6));
            assert!((d.abs() - 0.01).abs() < 1e-4);
            assert_eq!(d.signum(), g.signum());
        }
    }

    #[test]
    fn zero_learning_rate_is_bit_identical() {
        let mut params = vec![Matrix::row_vector(&[-0.0, 1e-300, 3.5]).unwrap()];
        let before = params.clone();
        let mut state = AdamState::new(AdamConfig::with_lr(0.0), &params);
        for _ in 0..5 {
            state.step(&mut params, &[Matrix::row_vector(&[1.0, -2.0, 0.5]).unwrap()]).unwrap();
        }
        let bits = |m: &Matrix| m.as_slice().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&params[0]), bits(&before[0]));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let mut params = vec![Matrix::zeros(2, 2)];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        assert!(state.step(&mut params, &[Matrix::zeros(1, 2)]).is_err());
        assert!(state.step(&mut params, &[]).is_err());
    }
}
