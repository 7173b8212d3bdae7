//! Classical fixed-step fourth-order Runge-Kutta.

use serde::{Deserialize, Serialize};

use super::matrix::{Matrix, Vector};
use super::NumericsError;

/// State types the solver can advance.
pub trait OdeState: Clone {
    /// `self + alpha * other`.
    fn axpy(&self, alpha: f64, other: &Self) -> Self;
    fn all_finite(&self) -> bool;
}

impl OdeState for Vector {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "state dimension mismatch");
        self.iter().zip(other).map(|(a, b)| a + alpha * b).collect()
    }

    fn all_finite(&self) -> bool {
        self.iter().all(|x| x.is_finite())
    }
}

impl OdeState for Matrix {
    fn axpy(&self, alpha: f64, other: &Self) -> Self {
        Matrix::axpy(self, alpha, other)
    }

    fn all_finite(&self) -> bool {
        self.is_finite()
    }
}

/// Discretized solution path on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S = Vector> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub step: f64,
}

impl<S> Trajectory<S> {
    /// Number of steps `K` (one less than the node count).
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn last(&self) -> &S {
        self.states.last().expect("trajectory always holds the initial state")
    }
}

/// Integrates `dz/dt = f(z, t)` over `t_span` with `steps` uniform RK4 steps.
///
/// The update is accumulated as `z + h/6 k1 + h/3 k2 + h/3 k3 + h/6 k4`;
/// the taped solver in `model` uses the same order so both paths agree.
pub fn rk4_solve<S, F>(mut f: F, z0: S, t_span: (f64, f64), steps: usize) -> Result<Trajectory<S>, NumericsError>
where
    S: OdeState,
    F: FnMut(&S, f64) -> S,
{
    let (ta, tb) = t_span;
    if steps == 0 {
        return Err(NumericsError::InvalidArgument("steps must be at least 1".into()));
    }
    if !(tb > ta) || !ta.is_finite() || !tb.is_finite() {
        return Err(NumericsError::InvalidArgument(format!("invalid time span [{ta}, {tb}]")));
    }
    if !z0.all_finite() {
        return Err(NumericsError::NonFiniteState { step: 0 });
    }
    let h = (tb - ta) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(ta);
    states.push(z0);
    for k in 0..steps {
        let t = ta + k as f64 * h;
        let z = &states[k];
        let k1 = f(z, t);
        let k2 = f(&z.axpy(0.5 * h, &k1), t + 0.5 * h);
        let k3 = f(&z.axpy(0.5 * h, &k2), t + 0.5 * h);
        let k4 = f(&z.axpy(h, &k3), t + h);
        let next = z
            .axpy(h / 6.0, &k1)
            .axpy(h / 3.0, &k2)
            .axpy(h / 3.0, &k3)
            .axpy(h / 6.0, &k4);
        if !next.all_finite() {
            return Err(NumericsError::NonFiniteState { step: k + 1 });
        }
        times.push(ta + (k + 1) as f64 * h);
        states.push(next);
    }
    Ok(Trajectory { times, states, step: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_keeps_state_constant() {
        let traj = rk4_solve(|z: &Vector, _| vec![0.0; z.len()], vec![1.0, 2.0], (0.0, 1.0), 7).unwrap();
        assert_eq!(traj.states.len(), 8);
        assert!(traj.states.iter().all(|s| s == &vec![1.0, 2.0]));
    }

    #[test]
    fn exponential_growth_matches_e() {
        let traj = rk4_solve(|z: &Vector, _| z.clone(), vec![1.0], (0.0, 1.0), 20).unwrap();
        assert!((traj.last()[0] - std::f64::consts::E).abs() < 1e-6);
        assert!((traj.step - 0.05).abs() < 1e-15);
    }

    #[test]
    fn halving_the_step_divides_error_by_about_sixteen() {
        let err = |steps| {
            let traj = rk4_solve(|z: &Vector, _| z.clone(), vec![1.0], (0.0, 1.0), steps).unwrap();
            (traj.last()[0] - std::f64::consts::E).abs()
        };
        let ratio = err(10) / err(20);
        assert!((ratio - 16.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn reports_divergence_step() {
        let res = rk4_solve(|z: &Vector, _| z.iter().map(|x| x * x * 1e200).collect(), vec![1e10], (0.0, 1.0), 5);
        assert!(matches!(res, Err(NumericsError::NonFiniteState { step: 1 })));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(rk4_solve(|z: &Vector, _| z.clone(), vec![1.0], (0.0, 1.0), 0).is_err());
        assert!(rk4_solve(|z: &Vector, _| z.clone(), vec![1.0], (1.0, 1.0), 3).is_err());
    }
}
