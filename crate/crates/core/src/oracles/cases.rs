//! Seeded random test cases that tie the bound formulas and the training
//! substrate to independent numerical evidence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mc_rademacher, total_variation, OracleError, StaircaseClass};
use crate::bounds::{rademacher_bound, solution_norm_bound, BoundError, ComplexityParams, SolutionBoundParams};
use crate::experiments::Targets;
use crate::model::{AffineMap, MlpDynamics, NeuralOdeModel, TimeModulation};
use crate::numerics::{norm, rk4_solve, Activation, GradientTape, Matrix};
use crate::training::{loss, penalized_loss, LossKind};

/// Largest subset of a staircase class used per Rademacher case.
const RADEMACHER_MAX_MEMBERS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct RademacherCase {
    pub horizon: f64,
    pub v: f64,
    pub grid: usize,
    pub n: usize,
    pub b: f64,
    pub members: usize,
    pub empirical: f64,
    /// `None` when the bound's precondition on `b` fails.
    pub bound: Option<f64>,
}

impl RademacherCase {
    /// Holds trivially when the precondition fails.
    pub fn sound(&self) -> bool {
        self.bound.is_none_or(|b| self.empirical <= b)
    }
}

/// A random subset of a staircase class on `[0, L]` with range `V`, sampled
/// at `n ≤ 12` random points, against the `d = 1` bound with `b` set to the
/// largest empirical L2 norm in the subset.
pub fn rademacher_case(seed: u64) -> Result<RademacherCase, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = rng.gen_range(0.05..=0.25);
    let v = rng.gen_range(0.5..=2.0);
    let grid = rng.gen_range(2..=8);
    let n = rng.gen_range(4..=12);
    let staircase = StaircaseClass::new(grid, horizon, v)?;
    let points: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=horizon)).collect();
    let full = staircase.sampled(&points);
    let mut indices: Vec<usize> = (0..full.len()).collect();
    indices.shuffle(&mut rng);
    indices.truncate(rng.gen_range(1..=RADEMACHER_MAX_MEMBERS.min(full.len())));
    let class = full.subset(&indices);
    let b = class.sup_l2();
    let empirical = mc_rademacher(&class, 0, seed)?.value;
    let bound = match rademacher_bound(&ComplexityParams::new(horizon, v, 1, n, b)) {
        Ok(r) => Some(r.value),
        Err(BoundError::RademacherPrecondition { .. }) => None,
        Err(e) => return Err(OracleError::OutOfRange(e.to_string())),
    };
    Ok(RademacherCase { horizon, v, grid, n, b, members: class.len(), empirical, bound })
}

/// A random model: depth ≤ 3, widths ≤ 8, weights and biases `U(−1, 1)`.
pub fn random_model(rng: &mut impl Rng, maps: bool, steps: usize) -> NeuralOdeModel {
    let uniform = |rng: &mut dyn rand::RngCore, r: usize, c: usize| {
        Matrix::from_raw(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..=1.0)).collect())
    };
    let bias = |rng: &mut dyn rand::RngCore, n: usize| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect::<Vec<f64>>();
    let depth = rng.gen_range(1..=3);
    let state = rng.gen_range(1..=8);
    let mut widths = vec![state];
    widths.extend((1..depth).map(|_| rng.gen_range(1..=8)));
    widths.push(state);
    let (weights, biases) = widths.windows(2).map(|p| (uniform(rng, p[1], p[0]), bias(rng, p[1]))).unzip();
    let activation = *[Activation::Relu, Activation::Tanh, Activation::Identity].choose(rng).expect("nonempty");
    let dynamics = MlpDynamics::new(weights, biases, activation, rng.gen()).expect("consistent widths");
    let modulation = if rng.gen() { TimeModulation::Sine } else { TimeModulation::None };
    let (input_map, output_map) = if maps {
        let p = rng.gen_range(1..=4);
        let q = rng.gen_range(1..=3);
        let input = AffineMap::new(uniform(rng, state, p), bias(rng, state)).expect("consistent");
        let output = AffineMap::new(uniform(rng, q, state), bias(rng, q)).expect("consistent");
        (Some(input), Some(output))
    } else {
        (None, None)
    };
    NeuralOdeModel::new(input_map, dynamics, modulation, output_map, 1.0, steps).expect("valid model")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCase {
    pub sup_norm: f64,
    pub v_bound: f64,
    pub total_variation: f64,
    /// `max_k ‖f(z(t_k), t_k)‖`.
    pub max_speed: f64,
    pub horizon: f64,
}

impl TrajectoryCase {
    pub fn norm_sound(&self) -> bool {
        self.sup_norm <= self.v_bound * (1.0 + 1e-12)
    }

    pub fn variation_sound(&self) -> bool {
        self.total_variation <= 1.1 * self.max_speed * self.horizon
    }
}

pub const TRAJECTORY_STEPS: usize = 50;

/// Solves a random model from a random `z0` and compares the discrete path
/// with the solution-norm bound and the speed-times-horizon variation bound.
pub fn trajectory_case(seed: u64) -> Result<TrajectoryCase, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = random_model(&mut rng, false, TRAJECTORY_STEPS);
    let z0: Vec<f64> = (0..model.input_dim()).map(|_| rng.gen_range(-2.0..=2.0)).collect();
    let (_, traj) = model.forward(&z0).map_err(|e| OracleError::OutOfRange(e.to_string()))?;
    let v_bound = solution_norm_bound(&SolutionBoundParams::from_model(&model, norm(&z0)))
        .map_err(|e| OracleError::OutOfRange(e.to_string()))?;
    let sup_norm = traj.states.iter().map(|z| norm(z)).fold(0.0, f64::max);
    let mut max_speed = 0.0f64;
    for (z, &t) in traj.states.iter().zip(&traj.times) {
        let f = model.eval_dynamics(z, t).map_err(|e| OracleError::OutOfRange(e.to_string()))?;
        max_speed = max_speed.max(norm(&f));
    }
    Ok(TrajectoryCase { sup_norm, v_bound, total_variation: total_variation(&traj), max_speed, horizon: model.horizon })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCase {
    pub parameters: usize,
    /// `‖g_tape − g_fd‖ / ‖g_fd‖`, or the absolute error when `g_fd = 0`.
    pub relative_error: f64,
}

const FD_STEP: f64 = 1e-6;

/// Compares tape gradients of a random training loss (MSE or cross entropy,
/// with or without the spectral penalty) with central finite differences.
pub fn gradient_case(seed: u64) -> Result<GradientCase, OracleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = random_model(&mut rng, true, 4);
    let rows = rng.gen_range(1..=4);
    let p = model.input_dim();
    let q = model.output_dim();
    let x = Matrix::from_raw(rows, p, (0..rows * p).map(|_| rng.gen_range(-1.0..=1.0)).collect());
    let (kind, targets) = if q >= 2 && rng.gen() {
        let labels = (0..rows).map(|_| rng.gen_range(0..q)).collect();
        (LossKind::CrossEntropy, Targets::Classes { labels, classes: q })
    } else {
        let t = Matrix::from_raw(rows, q, (0..rows * q).map(|_| rng.gen_range(-1.0..=1.0)).collect());
        (LossKind::Mse, Targets::Values(t))
    };
    let lambda = if rng.gen() { 0.0 } else { rng.gen_range(0.01..=0.5) };
    let err = |e: &dyn std::fmt::Display| OracleError::OutOfRange(e.to_string());

    let mut tape = GradientTape::new();
    let forward = model.record(&mut tape, &x).map_err(|e| err(&e))?;
    let out = penalized_loss(&mut tape, &forward, &targets, kind, lambda).map_err(|e| err(&e))?;
    let grads = tape.backward(out).map_err(|e| err(&e))?.into_vec();

    let objective = |m: &NeuralOdeModel| -> Result<f64, OracleError> {
        let pred = m.predict_batch(&x).map_err(|e| err(&e))?;
        let base = loss(&pred, &targets, kind).map_err(|e| err(&e))?;
        let penalty = if lambda == 0.0 { 0.0 } else { lambda * m.dynamics.weight_norm_bound() };
        Ok(base + penalty)
    };

    let params = model.parameters();
    let mut diff_sq = 0.0;
    let mut fd_sq = 0.0;
    let mut count = 0;
    for (pi, param) in params.iter().enumerate() {
        for e in 0..param.as_slice().len() {
            let mut shifted = params.clone();
            shifted[pi].as_mut_slice()[e] += FD_STEP;
            model.set_parameters(&shifted).map_err(|e| err(&e))?;
            let up = objective(&model)?;
            shifted[pi].as_mut_slice()[e] -= 2.0 * FD_STEP;
            model.set_parameters(&shifted).map_err(|e| err(&e))?;
            let down = objective(&model)?;
            let fd = (up - down) / (2.0 * FD_STEP);
            let g = grads[pi].as_slice()[e];
            diff_sq += (g - fd) * (g - fd);
            fd_sq += fd * fd;
            count += 1;
        }
    }
    model.set_parameters(&params).map_err(|e| err(&e))?;
    let relative_error = if fd_sq > 0.0 { (diff_sq / fd_sq).sqrt() } else { diff_sq.sqrt() };
    Ok(GradientCase { parameters: count, relative_error })
}

/// Fitted order of RK4 on `z' = z`, `z(0) = 1` over `[0, 1]`: the log-log
/// slope of the final error against the step size for 10, 20, 40, 80 steps.
pub fn rk4_convergence_order() -> f64 {
    let steps = [10usize, 20, 40, 80];
    let (hs, errs): (Vec<f64>, Vec<f64>) = steps
        .iter()
        .map(|&k| {
            let traj = rk4_solve(|z: &Vec<f64>, _t| z.clone(), vec![1.0], (0.0, 1.0), k).expect("valid span");
            (1.0 / k as f64, (traj.last()[0] - std::f64::consts::E).abs())
        })
        .unzip();
    crate::bounds::loglog_slope(&hs, &errs).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_is_fourth_order() {
        let order = rk4_convergence_order();
        assert!((3.8..=4.2).contains(&order), "{order}");
    }

    #[test]
    fn cases_are_deterministic() {
        assert_eq!(rademacher_case(3).unwrap(), rademacher_case(3).unwrap());
        assert_eq!(trajectory_case(3).unwrap(), trajectory_case(3).unwrap());
    }

    #[test]
    fn a_few_cases_hold() {
        for seed in 0..10 {
            assert!(rademacher_case(seed).unwrap().sound());
            let t = trajectory_case(seed).unwrap();
            assert!(t.norm_sound() && t.variation_sound(), "{t:?}");
            let g = gradient_case(seed).unwrap();
            assert!(g.relative_error < 1e-4, "{g:?}");
        }
    }
}
