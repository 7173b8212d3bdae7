//! JSON model serialization.
//!
//! ```json
//! {
//!   "depth": 2,
//!   "dims": [2, 2, 50, 2],
//!   "activation": "relu",
//!   "final_activation": false,
//!   "modulation": "sine",
//!   "weights": {"input": null, "dynamics": [[[..]], [[..]]], "output": null},
//!   "biases": {"input": null, "dynamics": [[..], [..]], "output": null},
//!   "span": [0.0, 1.0],
//!   "steps": 20
//! }
//! ```
//!
//! `dims` is `[input_dim, state_dim, hidden widths.., output_dim]`.

use serde::{Deserialize, Serialize};

use super::{AffineMap, MlpDynamics, ModelError, NeuralOdeModel, TimeModulation};
use crate::numerics::{Activation, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerWeights {
    pub input: Option<Vec<Vec<f64>>>,
    pub dynamics: Vec<Vec<Vec<f64>>>,
    pub output: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBiases {
    pub input: Option<Vec<f64>>,
    pub dynamics: Vec<Vec<f64>>,
    pub output: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub depth: usize,
    pub dims: Vec<usize>,
    pub activation: Activation,
    #[serde(default = "default_true")]
    pub final_activation: bool,
    pub modulation: TimeModulation,
    pub weights: LayerWeights,
    pub biases: LayerBiases,
    pub span: [f64; 2],
    pub steps: usize,
}

fn default_true() -> bool {
    true
}

impl From<&NeuralOdeModel> for ModelFile {
    fn from(model: &NeuralOdeModel) -> Self {
        let dyn_ = &model.dynamics;
        let mut dims = vec![model.input_dim(), dyn_.state_dim()];
        dims.extend(dyn_.weights[..dyn_.depth() - 1].iter().map(Matrix::rows));
        dims.push(model.output_dim());
        ModelFile {
            depth: dyn_.depth(),
            dims,
            activation: dyn_.activation,
            final_activation: dyn_.final_activation,
            modulation: model.modulation,
            weights: LayerWeights {
                input: model.input_map.as_ref().map(|m| m.weight.to_rows()),
                dynamics: dyn_.weights.iter().map(Matrix::to_rows).collect(),
                output: model.output_map.as_ref().map(|m| m.weight.to_rows()),
            },
            biases: LayerBiases {
                input: model.input_map.as_ref().map(|m| m.bias.clone()),
                dynamics: dyn_.biases.clone(),
                output: model.output_map.as_ref().map(|m| m.bias.clone()),
            },
            span: [0.0, model.horizon],
            steps: model.steps,
        }
    }
}

fn affine(w: Option<&Vec<Vec<f64>>>, b: Option<&Vec<f64>>, which: &str) -> Result<Option<AffineMap>, ModelError> {
    match (w, b) {
        (None, None) => Ok(None),
        (Some(w), Some(b)) => Ok(Some(AffineMap::new(Matrix::from_rows(w)?, b.clone())?)),
        _ => Err(ModelError::File(format!("{which} map needs both weights and biases"))),
    }
}

impl TryFrom<&ModelFile> for NeuralOdeModel {
    type Error = ModelError;

    fn try_from(file: &ModelFile) -> Result<Self, ModelError> {
        if file.span[0] != 0.0 {
            return Err(ModelError::File(format!("span must start at 0, got {}", file.span[0])));
        }
        if file.weights.dynamics.len() != file.depth {
            return Err(ModelError::File(format!(
                "depth is {} but {} dynamics weight matrices were given",
                file.depth,
                file.weights.dynamics.len()
            )));
        }
        let weights = file.weights.dynamics.iter().map(|w| Matrix::from_rows(w)).collect::<Result<Vec<_>, _>>()?;
        let dynamics = MlpDynamics::new(weights, file.biases.dynamics.clone(), file.activation, file.final_activation)?;
        let model = NeuralOdeModel::new(
            affine(file.weights.input.as_ref(), file.biases.input.as_ref(), "input")?,
            dynamics,
            file.modulation,
            affine(file.weights.output.as_ref(), file.biases.output.as_ref(), "output")?,
            file.span[1],
            file.steps,
        )?;
        let expected = ModelFile::from(&model).dims;
        if expected != file.dims {
            return Err(ModelError::File(format!("dims {:?} do not match the weights ({expected:?})", file.dims)));
        }
        Ok(model)
    }
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model file serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        serde_json::from_str(s).map_err(|e| ModelError::File(e.to_string()))
    }
}

impl NeuralOdeModel {
    pub fn to_json(&self) -> String {
        ModelFile::from(self).to_json()
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        NeuralOdeModel::try_from(&ModelFile::from_json(s)?)
    }
}
