//! Empirical-risk minimization with an optional spectral Lipschitz penalty.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiments::{Dataset, Targets};
use crate::model::{ModelError, NeuralOdeModel, TapedForward};
use crate::numerics::{spectral_norm_warm, AdamConfig, AdamState, GradientTape, Matrix, NumericsError, Var};

/// Power-iteration settings used for the penalty and its gradient.
const PENALTY_TOL: f64 = 1e-10;
const PENALTY_MAX_ITER: usize = 2_000;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("prediction shape {pred:?} does not match target shape {target:?}")]
    ShapeMismatch { pred: (usize, usize), target: (usize, usize) },
    #[error("loss kind {kind:?} cannot be used with these targets")]
    TargetKind { kind: LossKind },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Mini-batch size; 0 means full batch.
    pub batch_size: usize,
    pub loss: LossKind,
    /// Penalty weight `λ`.
    pub lambda: f64,
    /// Seeds the mini-batch shuffling.
    pub seed: u64,
    /// RK4 steps used while training and evaluating.
    pub steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, lr: 0.01, batch_size: 0, loss: LossKind::Mse, lambda: 0.0, seed: 0, steps: 20 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(TrainError::InvalidConfig(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(TrainError::InvalidConfig(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.steps == 0 {
            return Err(TrainError::InvalidConfig("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// One CSV row; field order is the on-disk column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub seed: u64,
    pub epoch: usize,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub gen_gap: f64,
    pub lipschitz: f64,
    pub weight_path_lipschitz: f64,
    pub lambda: f64,
    pub hidden_units: usize,
    #[serde(skip)]
    pub train_accuracy: Option<f64>,
    #[serde(skip)]
    pub eval_accuracy: Option<f64>,
}

pub const RECORD_CSV_HEADER: &str =
    "seed,epoch,train_loss,eval_loss,gen_gap,lipschitz,weight_path_lipschitz,lambda,hidden_units";

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub seed: u64,
    pub config: TrainConfig,
    pub rows: Vec<EpochRow>,
    /// Epoch at which the loss became non-finite; rows stop before it.
    pub diverged_at: Option<usize>,
}

impl ExperimentRecord {
    pub fn final_row(&self) -> Option<&EpochRow> {
        self.rows.last()
    }

    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), TrainError> {
        write_rows_csv(&self.rows, out)
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Writes rows of possibly several records under one header.
pub fn write_rows_csv<'a, W: Write>(rows: impl IntoIterator<Item = &'a EpochRow>, out: W) -> Result<(), TrainError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RECORD_CSV_HEADER.split(',')).map_err(|e| TrainError::Csv(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| TrainError::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| TrainError::Csv(e.to_string()))
}

fn check_kind(targets: &Targets, kind: LossKind) -> Result<(), TrainError> {
    match (targets, kind) {
        (Targets::Values(_), LossKind::Mse) | (Targets::Classes { .. }, LossKind::CrossEntropy) => Ok(()),
        _ => Err(TrainError::TargetKind { kind }),
    }
}

/// Mean squared error over all entries, or mean negative log-softmax of the
/// labelled class.
pub fn loss(pred: &Matrix, targets: &Targets, kind: LossKind) -> Result<f64, TrainError> {
    check_kind(targets, kind)?;
    if targets.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    match targets {
        Targets::Values(t) => {
            if t.shape() != pred.shape() {
                return Err(TrainError::ShapeMismatch { pred: pred.shape(), target: t.shape() });
            }
            Ok(crate::numerics::tape::mse_value(pred, t))
        }
        Targets::Classes { labels, classes } => {
            if pred.rows() != labels.len() || pred.cols() != *classes {
                return Err(TrainError::ShapeMismatch { pred: pred.shape(), target: (labels.len(), *classes) });
            }
            Ok(crate::numerics::tape::cross_entropy_value(pred, labels))
        }
    }
}

/// Records `loss + λ · max_i ‖A_i‖₂` on the tape. With `λ = 0` the penalty is
/// not recorded at all.
pub fn penalized_loss(
    tape: &mut GradientTape,
    forward: &TapedForward,
    targets: &Targets,
    kind: LossKind,
    lambda: f64,
) -> Result<Var, TrainError> {
    check_kind(targets, kind)?;
    if targets.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let pred = tape.value(forward.prediction).shape();
    let base = match targets {
        Targets::Values(t) => {
            if t.shape() != pred {
                return Err(TrainError::ShapeMismatch { pred, target: t.shape() });
            }
            let tv = tape.input(t.clone());
            tape.mse(forward.prediction, tv)
        }
        Targets::Classes { labels, classes } => {
            if pred != (labels.len(), *classes) {
                return Err(TrainError::ShapeMismatch { pred, target: (labels.len(), *classes) });
            }
            tape.cross_entropy(forward.prediction, labels)
        }
    };
    if lambda == 0.0 {
        return Ok(base);
    }
    let norms = forward
        .dynamics_weights
        .iter()
        .map(|&w| tape.spectral_norm(w, PENALTY_TOL, PENALTY_MAX_ITER))
        .collect::<Result<Vec<_>, _>>()?;
    let max = tape.max(&norms);
    Ok(tape.axpy(base, lambda, max))
}

/// The penalty term `max_i ‖A_i‖₂` for a model, outside any tape.
pub fn lipschitz_penalty(model: &NeuralOdeModel) -> f64 {
    model.dynamics.weight_norm_bound()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Fraction of argmax-correct predictions (classification only); ties go
    /// to the lowest class index.
    pub accuracy: Option<f64>,
}

pub fn evaluate(model: &NeuralOdeModel, data: &Dataset, kind: LossKind) -> Result<Evaluation, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    let pred = model.predict_batch(&data.inputs)?;
    let l = loss(&pred, &data.targets, kind)?;
    Ok(Evaluation { loss: l, accuracy: accuracy(&pred, &data.targets) })
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-epoch Lipschitz measurement that warm-starts each layer's power
/// iteration from the previous epoch's right singular vector.
struct LipschitzTracker {
    starts: Vec<Option<Vec<f64>>>,
}

const TRACK_TOL: f64 = 1e-11;
const TRACK_MAX_ITER: usize = 20_000;

impl LipschitzTracker {
    fn new(model: &NeuralOdeModel) -> Self {
        Self { starts: vec![None; model.dynamics.depth()] }
    }

    fn measure(&mut self, model: &NeuralOdeModel) -> Result<f64, TrainError> {
        let dynamics = &model.dynamics;
        let mut product = dynamics.activation.lipschitz().powi(dynamics.depth() as i32);
        for (w, start) in dynamics.weights.iter().zip(&mut self.starts) {
            let s = spectral_norm_warm(w, start.as_deref(), TRACK_TOL, TRACK_MAX_ITER)?;
            product *= s.sigma;
            *start = Some(s.right);
        }
        Ok(product)
    }
}

/// Width of the widest dynamics layer.
pub fn hidden_units(model: &NeuralOdeModel) -> usize {
    model.dynamics.weights.iter().map(Matrix::rows).max().unwrap_or(0)
}

struct StepOutcome {
    objective: f64,
    /// Unpenalized loss and accuracy of the batch before the update.
    base: Evaluation,
}

/// One optimization step on a batch.
fn train_step(
    model: &mut NeuralOdeModel,
    adam: &mut AdamState,
    batch: &Dataset,
    config: &TrainConfig,
) -> Result<StepOutcome, TrainError> {
    let mut tape = GradientTape::new();
    let forward = model.record(&mut tape, &batch.inputs)?;
    let base = Evaluation {
        loss: loss(tape.value(forward.prediction), &batch.targets, config.loss)?,
        accuracy: accuracy(tape.value(forward.prediction), &batch.targets),
    };
    let objective_var = penalized_loss(&mut tape, &forward, &batch.targets, config.loss, config.lambda)?;
    let objective = tape.scalar(objective_var);
    if objective.is_finite() {
        let grads = tape.backward(objective_var)?.into_vec();
        let mut params = model.parameters();
        adam.step(&mut params, &grads)?;
        model.set_parameters(&params)?;
    }
    Ok(StepOutcome { objective, base })
}

fn accuracy(pred: &Matrix, targets: &Targets) -> Option<f64> {
    match targets {
        Targets::Classes { labels, .. } => {
            let correct = labels.iter().enumerate().filter(|&(i, &label)| argmax(pred.row(i)) == label).count();
            Some(correct as f64 / labels.len() as f64)
        }
        Targets::Values(_) => None,
    }
}

fn is_divergence(err: &TrainError) -> bool {
    matches!(
        err,
        TrainError::Model(ModelError::Numerics(NumericsError::NonFiniteState { .. }))
            | TrainError::Numerics(NumericsError::NonFiniteState { .. })
    )
}

/// `Ok(None)` on divergence.
fn finite_or_diverged(result: Result<Evaluation, TrainError>) -> Result<Option<Evaluation>, TrainError> {
    match result {
        Ok(e) if e.loss.is_finite() => Ok(Some(e)),
        Ok(_) => Ok(None),
        Err(e) if is_divergence(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Trains `model` in place with Adam and returns one row per epoch.
///
/// Reported losses exclude the penalty. Runs are deterministic in
/// `config.seed` and the initial model. In full-batch mode the training loss
/// of epoch `e` is read off the forward pass of step `e + 1`, which computes
/// exactly what a separate evaluation would.
pub fn train(
    model: &mut NeuralOdeModel,
    train_set: &Dataset,
    eval_set: &Dataset,
    config: &TrainConfig,
) -> Result<ExperimentRecord, TrainError> {
    config.validate()?;
    if train_set.is_empty() || eval_set.is_empty() {
        return Err(TrainError::EmptyBatch);
    }
    check_kind(&train_set.targets, config.loss)?;
    check_kind(&eval_set.targets, config.loss)?;
    model.steps = config.steps;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &model.parameters());
    let n = train_set.len();
    let full_batch = config.batch_size == 0 || config.batch_size >= n;
    let batch = if full_batch { n } else { config.batch_size };
    let grid: Vec<f64> = (0..=model.steps).map(|k| k as f64 * model.horizon / model.steps as f64).collect();
    let width = hidden_units(model);
    let mut tracker = LipschitzTracker::new(model);

    let mut record = ExperimentRecord { seed: config.seed, config: config.clone(), rows: Vec::new(), diverged_at: None };
    // Row whose training loss is still to be filled in (full batch only).
    let mut pending: Option<EpochRow> = None;
    let mut order: Vec<usize> = (0..n).collect();
    let complete = |mut row: EpochRow, train: Evaluation| {
        row.train_loss = train.loss;
        row.train_accuracy = train.accuracy;
        row.gen_gap = row.eval_loss - row.train_loss;
        row
    };

    for epoch in 1..=config.epochs {
        if !full_batch {
            order.shuffle(&mut rng);
        }
        let mut diverged = false;
        for chunk in order.chunks(batch) {
            let outcome = if full_batch {
                train_step(model, &mut adam, train_set, config)
            } else {
                train_step(model, &mut adam, &train_set.select(chunk), config)
            };
            let outcome = match outcome {
                Ok(o) => o,
                Err(e) if is_divergence(&e) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            if let Some(row) = pending.take() {
                if !outcome.base.loss.is_finite() {
                    record.diverged_at = Some(row.epoch);
                    return Ok(record);
                }
                record.rows.push(complete(row, outcome.base));
            }
            if !outcome.objective.is_finite() {
                diverged = true;
                break;
            }
        }
        if diverged {
            record.diverged_at = Some(pending.as_ref().map_or(epoch, |r| r.epoch));
            return Ok(record);
        }

        let Some(ev) = finite_or_diverged(evaluate(model, eval_set, config.loss))? else {
            record.diverged_at = Some(epoch);
            return Ok(record);
        };
        let row = EpochRow {
            seed: config.seed,
            epoch,
            train_loss: f64::NAN,
            eval_loss: ev.loss,
            gen_gap: f64::NAN,
            lipschitz: tracker.measure(model)?,
            weight_path_lipschitz: model.weight_path_lipschitz(&grid)?,
            lambda: config.lambda,
            hidden_units: width,
            train_accuracy: None,
            eval_accuracy: ev.accuracy,
        };
        if full_batch && epoch < config.epochs {
            pending = Some(row);
            continue;
        }
        let Some(tr) = finite_or_diverged(evaluate(model, train_set, config.loss))? else {
            record.diverged_at = Some(epoch);
            return Ok(record);
        };
        record.rows.push(complete(row, tr));
    }
    Ok(record)
}

#[cfg(test)]
mod tests;
