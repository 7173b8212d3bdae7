//! The `train` subcommand.

use std::path::PathBuf;

use nodebound::experiments::{derive_seed, gen_blobs_dataset, gen_linear_dataset, gen_sin_dataset, load_idx};
use nodebound::model::ModelFile;
use nodebound::training::train;
use nodebound::{Activation, Architecture, Dataset, ExperimentRecord, LossKind, NeuralOdeModel, Targets, TimeModulation, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Sin,
    Linear,
    Blobs,
    Idx,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainRun {
    pub data: DataSource,
    pub n_train: usize,
    pub n_eval: usize,
    /// Blob dimension; ignored by the other sources.
    pub blob_dim: usize,
    pub blob_separation: f64,
    /// State dimension; an input map is added when it differs from the input.
    pub state_dim: Option<usize>,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub final_activation: bool,
    pub modulation: TimeModulation,
    pub horizon: f64,
    pub steps: usize,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for TrainRun {
    fn default() -> Self {
        Self {
            data: DataSource::Linear,
            n_train: 100,
            n_eval: 20,
            blob_dim: 20,
            blob_separation: 2.0,
            state_dim: None,
            hidden: vec![50],
            activation: Activation::Relu,
            final_activation: false,
            modulation: TimeModulation::None,
            horizon: 1.0,
            steps: 10,
            epochs: 50,
            lr: 0.01,
            batch_size: 0,
            lambda: 0.0,
            seed: 0,
        }
    }
}

/// IDX files for `data = "idx"`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IdxInputs {
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
}

pub fn load_dataset(run: &TrainRun, idx: &IdxInputs) -> Result<Dataset, Failure> {
    let n = run.n_train + run.n_eval;
    let seed = derive_seed(run.seed, "train/data", 0);
    match run.data {
        DataSource::Sin => gen_sin_dataset(n, seed, 0.0),
        DataSource::Linear => gen_linear_dataset(n, seed),
        DataSource::Blobs => gen_blobs_dataset(n, run.blob_dim, run.blob_separation, seed),
        DataSource::Idx => match (&idx.images, &idx.labels) {
            (Some(images), Some(labels)) => load_idx(images, labels, Some(n)),
            _ => return Err(Failure::invalid("data = idx needs --images and --labels")),
        },
    }
    .map_err(Failure::from_display)
}

pub struct Trained {
    pub model: NeuralOdeModel,
    pub record: ExperimentRecord,
}

pub fn run(run: &TrainRun, data: &Dataset) -> Result<Trained, Failure> {
    if run.n_train == 0 || run.n_eval == 0 || data.len() < run.n_train + run.n_eval {
        return Err(Failure::invalid(format!(
            "need n_train + n_eval = {} + {} samples (both positive), dataset has {}",
            run.n_train,
            run.n_eval,
            data.len()
        )));
    }
    let (train_set, rest) = data.split_at(run.n_train);
    let (eval_set, _) = rest.split_at(run.n_eval);
    let input_dim = data.input_dim();
    let state_dim = run.state_dim.unwrap_or(input_dim);
    let (output_dim, loss) = match &data.targets {
        Targets::Values(m) => (m.cols(), LossKind::Mse),
        Targets::Classes { classes, .. } => (*classes, LossKind::CrossEntropy),
    };
    let arch = Architecture {
        input_dim,
        state_dim,
        hidden: run.hidden.clone(),
        output_dim,
        input_map: state_dim != input_dim,
        output_map: loss == LossKind::CrossEntropy || output_dim != state_dim,
        activation: run.activation,
        final_activation: run.final_activation,
        modulation: run.modulation,
        horizon: run.horizon,
        steps: run.steps,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run.seed, "train/init", 0));
    let mut model = NeuralOdeModel::init(&arch, &mut rng).map_err(Failure::from_display)?;
    let config = TrainConfig {
        epochs: run.epochs,
        lr: run.lr,
        batch_size: run.batch_size,
        loss,
        lambda: run.lambda,
        seed: derive_seed(run.seed, "train/shuffle", 0),
        steps: run.steps,
    };
    let record = train(&mut model, &train_set, &eval_set, &config).map_err(Failure::from_display)?;
    Ok(Trained { model, record })
}

pub fn model_json(model: &NeuralOdeModel) -> String {
    let mut text = ModelFile::from(model).to_json();
    text.push('\n');
    text
}
