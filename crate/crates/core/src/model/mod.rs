//! The neural ODE hypothesis class: MLP dynamics `f(z, t)` with optional
//! sinusoidal time modulation, affine input/output maps, forward prediction
//! through RK4, and Lipschitz measurements of the dynamics.

mod file;
mod taped;

pub use file::ModelFile;
pub use taped::TapedForward;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{norm, rk4_solve, spectral_norm, Activation, Matrix, NumericsError, Trajectory, Vector};
use crate::numerics::{DEFAULT_MAX_ITER, DEFAULT_TOL};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("time grid needs at least 2 strictly increasing nodes")]
    InvalidGrid,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("model file: {0}")]
    File(String),
}

/// How time enters the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeModulation {
    /// Time-independent weights.
    #[default]
    None,
    /// The activation entering the last layer is multiplied by `sin(t)`.
    Sine,
}

impl std::str::FromStr for TimeModulation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Self::None),
            "sine" => Ok(Self::Sine),
            other => Err(format!("unknown modulation `{other}` (expected none or sine)")),
        }
    }
}

/// `x ↦ W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub weight: Matrix,
    pub bias: Vector,
}

impl AffineMap {
    pub fn new(weight: Matrix, bias: Vector) -> Result<Self, ModelError> {
        if bias.len() != weight.rows() {
            return Err(ModelError::DimensionMismatch { expected: weight.rows(), found: bias.len() });
        }
        Ok(Self { weight, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Applies the map to every row of `x`.
    pub fn apply_batch(&self, x: &Matrix) -> Matrix {
        x.matmul_nt(&self.weight).add_row_broadcast(&self.bias)
    }
}

/// `σ(A_N σ(… σ(A_1 z + b_1) …) + b_N)`.
///
/// With `final_activation = false` the last layer is affine, which is how
/// the experiment models are built; `σ` is 1-Lipschitz with `σ(0) = 0`, so
/// the solution-norm bound covers both shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpDynamics {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
    pub activation: Activation,
    pub final_activation: bool,
}

impl MlpDynamics {
    pub fn new(
        weights: Vec<Matrix>,
        biases: Vec<Vector>,
        activation: Activation,
        final_activation: bool,
    ) -> Result<Self, ModelError> {
        let dynamics = Self { weights, biases, activation, final_activation };
        dynamics.validate()?;
        Ok(dynamics)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.weights.is_empty() {
            return Err(ModelError::InvalidArchitecture("dynamics need at least one layer".into()));
        }
        if self.biases.len() != self.weights.len() {
            return Err(ModelError::InvalidArchitecture(format!(
                "{} weight matrices but {} bias vectors",
                self.weights.len(),
                self.biases.len()
            )));
        }
        for pair in self.weights.windows(2) {
            if pair[0].rows() != pair[1].cols() {
                return Err(ModelError::DimensionMismatch { expected: pair[0].rows(), found: pair[1].cols() });
            }
        }
        for (w, b) in self.weights.iter().zip(&self.biases) {
            if w.rows() != b.len() {
                return Err(ModelError::DimensionMismatch { expected: w.rows(), found: b.len() });
            }
        }
        let last = self.weights.last().expect("nonempty");
        if last.rows() != self.state_dim() {
            return Err(ModelError::InvalidArchitecture(format!(
                "dynamics map R^{} to R^{}; the state dimension must be preserved",
                self.state_dim(),
                last.rows()
            )));
        }
        Ok(())
    }

    /// Number of layers `N`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    pub fn state_dim(&self) -> usize {
        self.weights[0].cols()
    }

    fn activated(&self, layer: usize) -> bool {
        layer + 1 < self.depth() || self.final_activation
    }

    /// Evaluates the dynamics on every row of `z` at time `t`.
    pub fn eval_batch(&self, z: &Matrix, t: f64, modulation: TimeModulation) -> Matrix {
        let last = self.depth() - 1;
        let mut h = z.clone();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            if i == last && modulation == TimeModulation::Sine {
                h = h.scale(t.sin());
            }
            h = h.matmul_nt(w).add_row_broadcast(b);
            if self.activated(i) && self.activation != Activation::Identity {
                let act = self.activation;
                h = h.map(|x| act.apply(x));
            }
        }
        h
    }

    /// `L_σ^N · Π_i ‖A_i‖₂`, an upper bound on the Lipschitz constant in `z`.
    pub fn lipschitz(&self) -> f64 {
        let ls = self.activation.lipschitz().powi(self.depth() as i32);
        self.weights
            .iter()
            .map(|w| spectral_norm(w, DEFAULT_TOL, DEFAULT_MAX_ITER).map(|s| s.sigma).unwrap_or(0.0))
            .fold(ls, |acc, s| acc * s)
    }

    /// `𝒜 = max_i ‖A_i‖₂`.
    pub fn weight_norm_bound(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| spectral_norm(w, DEFAULT_TOL, DEFAULT_MAX_ITER).map(|s| s.sigma).unwrap_or(0.0))
            .fold(0.0, f64::max)
    }

    /// `𝐁 = max_i ‖b_i‖`.
    pub fn bias_norm_bound(&self) -> f64 {
        self.biases.iter().map(|b| norm(b)).fold(0.0, f64::max)
    }
}

/// Layer widths and options for building a freshly initialized model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub state_dim: usize,
    /// Widths of the hidden layers inside the dynamics (`N - 1` entries).
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    /// Without an input map the state is the input (`state_dim == input_dim`).
    pub input_map: bool,
    /// Without an output map the prediction is `z(L)`.
    pub output_map: bool,
    pub activation: Activation,
    pub final_activation: bool,
    pub modulation: TimeModulation,
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralOdeModel {
    pub input_map: Option<AffineMap>,
    pub dynamics: MlpDynamics,
    pub modulation: TimeModulation,
    pub output_map: Option<AffineMap>,
    /// Time horizon `L`; the solve runs over `[0, L]`.
    pub horizon: f64,
    pub steps: usize,
}

/// `U(-1/√fan_in, 1/√fan_in)` for weights and biases alike.
fn uniform_layer(rng: &mut impl Rng, out: usize, fan_in: usize) -> (Matrix, Vector) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let w: Vec<f64> = (0..out * fan_in).map(|_| rng.gen_range(-bound..=bound)).collect();
    let b: Vec<f64> = (0..out).map(|_| rng.gen_range(-bound..=bound)).collect();
    (Matrix::from_raw(out, fan_in, w), b)
}

impl NeuralOdeModel {
    pub fn new(
        input_map: Option<AffineMap>,
        dynamics: MlpDynamics,
        modulation: TimeModulation,
        output_map: Option<AffineMap>,
        horizon: f64,
        steps: usize,
    ) -> Result<Self, ModelError> {
        let model = Self { input_map, dynamics, modulation, output_map, horizon, steps };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.dynamics.validate()?;
        let d = self.dynamics.state_dim();
        if let Some(map) = &self.input_map {
            if map.out_dim() != d {
                return Err(ModelError::DimensionMismatch { expected: d, found: map.out_dim() });
            }
        }
        if let Some(map) = &self.output_map {
            if map.in_dim() != d {
                return Err(ModelError::DimensionMismatch { expected: d, found: map.in_dim() });
            }
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(ModelError::InvalidArchitecture(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(ModelError::InvalidArchitecture("steps must be at least 1".into()));
        }
        Ok(())
    }

    /// Random initialization in the style of a default dense layer.
    pub fn init(arch: &Architecture, rng: &mut impl Rng) -> Result<Self, ModelError> {
        if !arch.input_map && arch.input_dim != arch.state_dim {
            return Err(ModelError::InvalidArchitecture("without an input map input_dim must equal state_dim".into()));
        }
        if !arch.output_map && arch.output_dim != arch.state_dim {
            return Err(ModelError::InvalidArchitecture("without an output map output_dim must equal state_dim".into()));
        }
        let input_map = arch.input_map.then(|| {
            let (w, b) = uniform_layer(rng, arch.state_dim, arch.input_dim);
            AffineMap { weight: w, bias: b }
        });
        let mut widths = vec![arch.state_dim];
        widths.extend(&arch.hidden);
        widths.push(arch.state_dim);
        let (weights, biases) = widths.windows(2).map(|p| uniform_layer(rng, p[1], p[0])).unzip();
        let dynamics = MlpDynamics::new(weights, biases, arch.activation, arch.final_activation)?;
        let output_map = arch.output_map.then(|| {
            let (w, b) = uniform_layer(rng, arch.output_dim, arch.state_dim);
            AffineMap { weight: w, bias: b }
        });
        Self::new(input_map, dynamics, arch.modulation, output_map, arch.horizon, arch.steps)
    }

    pub fn input_dim(&self) -> usize {
        self.input_map.as_ref().map_or(self.dynamics.state_dim(), AffineMap::in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.output_map.as_ref().map_or(self.dynamics.state_dim(), AffineMap::out_dim)
    }

    /// `f(z, t)` for a single state.
    pub fn eval_dynamics(&self, z: &[f64], t: f64) -> Result<Vector, ModelError> {
        let d = self.dynamics.state_dim();
        if z.len() != d {
            return Err(ModelError::DimensionMismatch { expected: d, found: z.len() });
        }
        let zm = Matrix::from_raw(1, d, z.to_vec());
        Ok(self.dynamics.eval_batch(&zm, t, self.modulation).into_vec())
    }

    /// Initial state `z(0)` for every row of `x`.
    pub fn initial_state(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        if x.cols() != self.input_dim() {
            return Err(ModelError::DimensionMismatch { expected: self.input_dim(), found: x.cols() });
        }
        Ok(match &self.input_map {
            Some(map) => map.apply_batch(x),
            None => x.clone(),
        })
    }

    fn read_out(&self, z: &Matrix) -> Matrix {
        match &self.output_map {
            Some(map) => map.apply_batch(z),
            None => z.clone(),
        }
    }

    /// Solves the ODE for a whole batch at once and returns the batched
    /// state trajectory (one row per sample at every node).
    pub fn solve_batch(&self, x: &Matrix) -> Result<Trajectory<Matrix>, ModelError> {
        let z0 = self.initial_state(x)?;
        let traj = rk4_solve(
            |z: &Matrix, t| self.dynamics.eval_batch(z, t, self.modulation),
            z0,
            (0.0, self.horizon),
            self.steps,
        )?;
        Ok(traj)
    }

    /// Predictions for every row of `x`.
    pub fn predict_batch(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        let traj = self.solve_batch(x)?;
        Ok(self.read_out(traj.last()))
    }

    /// Prediction `h_θ(x)` read out from `z(L)`, plus the state trajectory.
    pub fn forward(&self, x: &[f64]) -> Result<(Vector, Trajectory), ModelError> {
        let xm = Matrix::from_raw(1, x.len(), x.to_vec());
        let traj = self.solve_batch(&xm)?;
        let pred = self.read_out(traj.last()).into_vec();
        let states = traj.states.into_iter().map(Matrix::into_vec).collect();
        Ok((pred, Trajectory { times: traj.times, states, step: traj.step }))
    }

    /// `L̂_f` of the dynamics.
    pub fn network_lipschitz(&self) -> f64 {
        self.dynamics.lipschitz()
    }

    /// Estimates the Lipschitz constant in time of the effective weights
    /// `W(t_k)`: `max_k ‖W(t_{k+1}) − W(t_k)‖₂ / (t_{k+1} − t_k)` over the
    /// layers. Only the modulated last layer varies in time.
    pub fn weight_path_lipschitz(&self, grid: &[f64]) -> Result<f64, ModelError> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ModelError::InvalidGrid);
        }
        match self.modulation {
            TimeModulation::None => Ok(0.0),
            TimeModulation::Sine => {
                let last = self.dynamics.weights.last().expect("nonempty");
                let s = spectral_norm(last, DEFAULT_TOL, DEFAULT_MAX_ITER)?.sigma;
                Ok(grid
                    .windows(2)
                    .map(|w| s * (w[1].sin() - w[0].sin()).abs() / (w[1] - w[0]))
                    .fold(0.0, f64::max))
            }
        }
    }

    /// Trainable parameters in a fixed order: input map, dynamics layers,
    /// output map; each layer contributes its weight then its bias as a
    /// `1 x out` row.
    pub fn parameters(&self) -> Vec<Matrix> {
        let mut out = Vec::new();
        let push = |out: &mut Vec<Matrix>, w: &Matrix, b: &Vector| {
            out.push(w.clone());
            out.push(Matrix::from_raw(1, b.len(), b.clone()));
        };
        if let Some(m) = &self.input_map {
            push(&mut out, &m.weight, &m.bias);
        }
        for (w, b) in self.dynamics.weights.iter().zip(&self.dynamics.biases) {
            push(&mut out, w, b);
        }
        if let Some(m) = &self.output_map {
            push(&mut out, &m.weight, &m.bias);
        }
        out
    }

    /// Inverse of [`NeuralOdeModel::parameters`].
    pub fn set_parameters(&mut self, params: &[Matrix]) -> Result<(), ModelError> {
        let expected = self.parameters();
        if params.len() != expected.len() {
            return Err(ModelError::DimensionMismatch { expected: expected.len(), found: params.len() });
        }
        for (p, e) in params.iter().zip(&expected) {
            if p.shape() != e.shape() {
                return Err(ModelError::Numerics(NumericsError::ShapeMismatch { expected: e.shape(), found: p.shape() }));
            }
        }
        let mut it = params.iter();
        let mut take = |w: &mut Matrix, b: &mut Vector| {
            *w = it.next().expect("checked length").clone();
            *b = it.next().expect("checked length").as_slice().to_vec();
        };
        if let Some(m) = &mut self.input_map {
            take(&mut m.weight, &mut m.bias);
        }
        for (w, b) in self.dynamics.weights.iter_mut().zip(self.dynamics.biases.iter_mut()) {
            take(w, b);
        }
        if let Some(m) = &mut self.output_map {
            take(&mut m.weight, &mut m.bias);
        }
        Ok(())
    }

    /// Positions of the dynamics weight matrices within [`Self::parameters`].
    pub fn dynamics_weight_indices(&self) -> Vec<usize> {
        let offset = if self.input_map.is_some() { 2 } else { 0 };
        (0..self.dynamics.depth()).map(|i| offset + 2 * i).collect()
    }
}

#[cfg(test)]
mod tests;
