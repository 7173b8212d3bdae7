use super::{ModelError, NeuralOdeModel, TimeModulation};
use crate::numerics::{GradientTape, Matrix, NumericsError, Var};

/// Handles produced by recording a batched forward pass.
#[derive(Debug, Clone)]
pub struct TapedForward {
    pub prediction: Var,
    /// Parameter leaves, in [`NeuralOdeModel::parameters`] order.
    pub params: Vec<Var>,
    /// The dynamics weight matrices `A_1..A_N`.
    pub dynamics_weights: Vec<Var>,
}

struct Layer {
    weight: Var,
    bias: Var,
}

impl NeuralOdeModel {
    /// Records the unrolled RK4 solve for the batch `x` on `tape`.
    ///
    /// The recorded arithmetic is the same as [`NeuralOdeModel::predict_batch`],
    /// so the taped prediction equals the plain one bit for bit.
    pub fn record(&self, tape: &mut GradientTape, x: &Matrix) -> Result<TapedForward, ModelError> {
        if x.cols() != self.input_dim() {
            return Err(ModelError::DimensionMismatch { expected: self.input_dim(), found: x.cols() });
        }
        let mut params = Vec::new();
        let mut leaf = |tape: &mut GradientTape, m: &Matrix| {
            let v = tape.param(m.clone());
            params.push(v);
            v
        };
        let values = self.parameters();
        let mut values = values.iter();
        let mut next_layer = |tape: &mut GradientTape| {
            let weight = leaf(tape, values.next().expect("parameter count"));
            let bias = leaf(tape, values.next().expect("parameter count"));
            Layer { weight, bias }
        };

        let input = self.input_map.as_ref().map(|_| next_layer(tape));
        let layers: Vec<Layer> = (0..self.dynamics.depth()).map(|_| next_layer(tape)).collect();
        let output = self.output_map.as_ref().map(|_| next_layer(tape));

        let xv = tape.input(x.clone());
        let mut z = match &input {
            Some(l) => {
                let h = tape.matmul_t(xv, l.weight);
                tape.add_bias(h, l.bias)
            }
            None => xv,
        };

        let h = self.horizon / self.steps as f64;
        for k in 0..self.steps {
            let t = k as f64 * h;
            let k1 = self.record_dynamics(tape, &layers, z, t);
            let z2 = tape.axpy(z, 0.5 * h, k1);
            let k2 = self.record_dynamics(tape, &layers, z2, t + 0.5 * h);
            let z3 = tape.axpy(z, 0.5 * h, k2);
            let k3 = self.record_dynamics(tape, &layers, z3, t + 0.5 * h);
            let z4 = tape.axpy(z, h, k3);
            let k4 = self.record_dynamics(tape, &layers, z4, t + h);
            let acc = tape.axpy(z, h / 6.0, k1);
            let acc = tape.axpy(acc, h / 3.0, k2);
            let acc = tape.axpy(acc, h / 3.0, k3);
            z = tape.axpy(acc, h / 6.0, k4);
            if !tape.value(z).is_finite() {
                return Err(NumericsError::NonFiniteState { step: k + 1 }.into());
            }
        }

        let prediction = match &output {
            Some(l) => {
                let y = tape.matmul_t(z, l.weight);
                tape.add_bias(y, l.bias)
            }
            None => z,
        };
        Ok(TapedForward { prediction, params, dynamics_weights: layers.iter().map(|l| l.weight).collect() })
    }

    fn record_dynamics(&self, tape: &mut GradientTape, layers: &[Layer], z: Var, t: f64) -> Var {
        let last = layers.len() - 1;
        let mut h = z;
        for (i, layer) in layers.iter().enumerate() {
            if i == last && self.modulation == TimeModulation::Sine {
                h = tape.scale(h, t.sin());
            }
            h = tape.matmul_t(h, layer.weight);
            h = tape.add_bias(h, layer.bias);
            if i < last || self.dynamics.final_activation {
                h = tape.activation(h, self.dynamics.activation);
            }
        }
        h
    }
}
