//! The three experiment protocols. Trials run in parallel on the global
//! rayon pool; results are assembled in (sweep value, trial) order.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{box_stats, spearman, BoxStats};
use super::{gen_blobs_dataset, gen_linear_dataset, gen_sin_dataset, Dataset, ExperimentError, Targets};
use crate::model::{Architecture, NeuralOdeModel, TimeModulation};
use crate::numerics::Activation;
use crate::training::{train, ExperimentRecord, LossKind, TrainConfig, TrainError};

/// 64-bit FNV-1a.
fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// `base + fnv1a(role) + trial`, wrapping.
pub fn derive_seed(base: u64, role: &str, trial: usize) -> u64 {
    base.wrapping_add(fnv1a(role)).wrapping_add(trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WidthSweepConfig {
    pub widths: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub steps: usize,
    pub horizon: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub noise_sd: f64,
}

impl Default for WidthSweepConfig {
    fn default() -> Self {
        Self {
            widths: (1..=9).map(|k| 100 * k).collect(),
            trials: 5,
            seed: 0,
            epochs: 100,
            lr: 0.01,
            steps: 3,
            horizon: 1.0,
            n_train: 100,
            n_test: 30,
            noise_sd: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LambdaSweepConfig {
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub steps: usize,
    pub horizon: f64,
    pub hidden: usize,
    pub n_train: usize,
    pub n_val: usize,
}

impl Default for LambdaSweepConfig {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 0.01, 0.1, 1.0],
            trials: 20,
            seed: 0,
            epochs: 50,
            lr: 0.01,
            steps: 10,
            horizon: 1.0,
            hidden: 50,
            n_train: 100,
            n_val: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LipGapConfig {
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub horizon: f64,
    pub hidden: usize,
    pub n_train: usize,
    pub n_test: usize,
}

impl Default for LipGapConfig {
    fn default() -> Self {
        Self { seed: 0, epochs: 10, lr: 1e-3, batch_size: 128, steps: 4, horizon: 1.0, hidden: 64, n_train: 2000, n_test: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub sweep_value: f64,
    pub trial: usize,
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub sweep_value: f64,
    pub gap: BoxStats,
    pub eval_loss: BoxStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Converged runs only.
    pub points: Vec<SweepPoint>,
    /// `(sweep value, trial)` of runs that diverged.
    pub divergent: Vec<(f64, usize)>,
    pub summaries: Vec<SweepSummary>,
    /// Spearman correlation between the sweep value and the per-value mean of
    /// the swept metric; `None` when undefined.
    pub correlation: Option<f64>,
}

pub const SWEEP_CSV_HEADER: &str = "sweep_value,trial,final_gap,final_lipschitz";
pub const SUMMARY_CSV_HEADER: &str =
    "sweep_value,count,gap_min,gap_q1,gap_median,gap_q3,gap_max,gap_mean,eval_min,eval_q1,eval_median,eval_q3,eval_max,eval_mean";

fn csv_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Train(TrainError::Csv(e.to_string()))
}

impl SweepResult {
    fn assemble(values: &[f64], outcomes: Vec<(f64, usize, ExperimentRecord)>, metric: fn(&SweepSummary) -> f64) -> Self {
        let mut points = Vec::new();
        let mut divergent = Vec::new();
        for (sweep_value, trial, record) in outcomes {
            if record.diverged() || record.rows.is_empty() {
                divergent.push((sweep_value, trial));
            } else {
                points.push(SweepPoint { sweep_value, trial, record });
            }
        }
        let summaries: Vec<SweepSummary> = values
            .iter()
            .filter_map(|&v| {
                let finals: Vec<_> =
                    points.iter().filter(|p| p.sweep_value == v).filter_map(|p| p.record.final_row()).collect();
                let gaps: Vec<f64> = finals.iter().map(|r| r.gen_gap).collect();
                let evals: Vec<f64> = finals.iter().map(|r| r.eval_loss).collect();
                Some(SweepSummary { sweep_value: v, gap: box_stats(&gaps)?, eval_loss: box_stats(&evals)? })
            })
            .collect();
        let xs: Vec<f64> = summaries.iter().map(|s| s.sweep_value).collect();
        let ys: Vec<f64> = summaries.iter().map(metric).collect();
        let correlation = spearman(&xs, &ys);
        Self { points, divergent, summaries, correlation }
    }

    pub fn summary_for(&self, value: f64) -> Option<&SweepSummary> {
        self.summaries.iter().find(|s| s.sweep_value == value)
    }

    /// Per-epoch rows of every converged run under one header.
    pub fn write_records_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        crate::training::write_rows_csv(self.points.iter().flat_map(|p| &p.record.rows), out)?;
        Ok(())
    }

    pub fn write_sweep_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_CSV_HEADER.split(',')).map_err(csv_err)?;
        for p in &self.points {
            let last = p.record.final_row().expect("converged runs have rows");
            w.serialize((p.sweep_value, p.trial, last.gen_gap, last.lipschitz)).map_err(csv_err)?;
        }
        w.flush().map_err(csv_err)
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SUMMARY_CSV_HEADER.split(',')).map_err(csv_err)?;
        for s in &self.summaries {
            let (g, e) = (&s.gap, &s.eval_loss);
            w.serialize((
                s.sweep_value,
                g.count,
                g.min,
                g.q1,
                g.median,
                g.q3,
                g.max,
                g.mean,
                e.min,
                e.q1,
                e.median,
                e.q3,
                e.max,
                e.mean,
            ))
            .map_err(csv_err)?;
        }
        w.flush().map_err(csv_err)
    }
}

fn run_jobs<F>(values: &[f64], trials: usize, job: F) -> Result<Vec<(f64, usize, ExperimentRecord)>, ExperimentError>
where
    F: Fn(f64, usize) -> Result<ExperimentRecord, ExperimentError> + Sync,
{
    let jobs: Vec<(f64, usize)> = values.iter().flat_map(|&v| (0..trials).map(move |t| (v, t))).collect();
    jobs.into_par_iter().map(|(v, t)| job(v, t).map(|r| (v, t, r))).collect()
}

/// Hidden-width sweep on the sine task: input map `2 → w`, dynamics
/// `ReLU(Wz + b)`, output map `w → 1`. Each trial uses the same train and
/// test sets for every width. The correlation is against mean test MSE.
pub fn sweep_width(config: &WidthSweepConfig) -> Result<SweepResult, ExperimentError> {
    if config.widths.is_empty() || config.widths.contains(&0) {
        return Err(ExperimentError::InvalidSweep("widths must be nonempty and positive".into()));
    }
    if config.trials == 0 {
        return Err(ExperimentError::InvalidSweep("trials must be at least 1".into()));
    }
    let values: Vec<f64> = config.widths.iter().map(|&w| w as f64).collect();
    let outcomes = run_jobs(&values, config.trials, |value, trial| {
        let width = value as usize;
        let train_set = gen_sin_dataset(config.n_train, derive_seed(config.seed, "width/train", trial), config.noise_sd)?;
        let test_set = gen_sin_dataset(config.n_test, derive_seed(config.seed, "width/test", trial), config.noise_sd)?;
        let arch = Architecture {
            input_dim: 2,
            state_dim: width,
            hidden: vec![],
            output_dim: 1,
            input_map: true,
            output_map: true,
            activation: Activation::Relu,
            final_activation: true,
            modulation: TimeModulation::None,
            horizon: config.horizon,
            steps: config.steps,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("width/init/{width}"), trial));
        let mut model = NeuralOdeModel::init(&arch, &mut rng)?;
        let tc = TrainConfig {
            epochs: config.epochs,
            lr: config.lr,
            batch_size: 0,
            loss: LossKind::Mse,
            lambda: 0.0,
            seed: derive_seed(config.seed, "width/shuffle", trial),
            steps: config.steps,
        };
        Ok(train(&mut model, &train_set, &test_set, &tc)?)
    })?;
    Ok(SweepResult::assemble(&values, outcomes, |s| s.eval_loss.mean))
}

/// Penalty sweep on the linear task with sine-modulated dynamics
/// `W₂ (sin t · ReLU(W₁ z + b₁)) + b₂` and no input or output maps. Every `λ`
/// sees the same data and initialization within a trial. The correlation is
/// against mean gap.
pub fn sweep_lambda(config: &LambdaSweepConfig) -> Result<SweepResult, ExperimentError> {
    if config.lambdas.is_empty() || config.lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite()) {
        return Err(ExperimentError::InvalidSweep("lambdas must be nonempty, finite and nonnegative".into()));
    }
    if config.trials == 0 {
        return Err(ExperimentError::InvalidSweep("trials must be at least 1".into()));
    }
    let arch = Architecture {
        input_dim: 2,
        state_dim: 2,
        hidden: vec![config.hidden],
        output_dim: 2,
        input_map: false,
        output_map: false,
        activation: Activation::Relu,
        final_activation: false,
        modulation: TimeModulation::Sine,
        horizon: config.horizon,
        steps: config.steps,
    };
    let outcomes = run_jobs(&config.lambdas, config.trials, |lambda, trial| {
        let data = gen_linear_dataset(config.n_train + config.n_val, derive_seed(config.seed, "lambda/data", trial))?;
        let (train_set, val_set) = data.split_at(config.n_train);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "lambda/init", trial));
        let mut model = NeuralOdeModel::init(&arch, &mut rng)?;
        let tc = TrainConfig {
            epochs: config.epochs,
            lr: config.lr,
            batch_size: 0,
            loss: LossKind::Mse,
            lambda,
            seed: derive_seed(config.seed, "lambda/shuffle", trial),
            steps: config.steps,
        };
        Ok(train(&mut model, &train_set, &val_set, &tc)?)
    })?;
    Ok(SweepResult::assemble(&config.lambdas, outcomes, |s| s.gap.mean))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipGapResult {
    pub record: ExperimentRecord,
    /// Network Lipschitz constant before any update.
    pub initial_lipschitz: f64,
    /// Test error minus train error, per epoch.
    pub error_gaps: Vec<f64>,
    pub lipschitz: Vec<f64>,
    /// Spearman correlation between the two series; `None` when undefined.
    pub correlation: Option<f64>,
}

pub const LIP_GAP_CSV_HEADER: &str = "epoch,lipschitz,train_error,test_error,error_gap,train_loss,test_loss";

impl LipGapResult {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), ExperimentError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(LIP_GAP_CSV_HEADER.split(',')).map_err(csv_err)?;
        for (row, gap) in self.record.rows.iter().zip(&self.error_gaps) {
            let train_err = 1.0 - row.train_accuracy.unwrap_or(f64::NAN);
            let test_err = 1.0 - row.eval_accuracy.unwrap_or(f64::NAN);
            w.serialize((row.epoch, row.lipschitz, train_err, test_err, gap, row.train_loss, row.eval_loss))
                .map_err(csv_err)?;
        }
        w.flush().map_err(csv_err)
    }
}

/// Classification run with dynamics `W₂ tanh(W₁ z + b₁) + b₂` on the raw
/// input state and a linear classifier on `z(L)`. The first `n_train` rows
/// train, the next `n_test` rows test. Training runs one epoch at a time so
/// the correlation covers every epoch.
/// Input dimension of the synthetic stand-in for an image dataset.
pub const BLOB_DIM: usize = 100;
/// Distance between the two blob means.
pub const BLOB_SEPARATION: f64 = 2.0;

/// Two-class Gaussian blobs sized for `config` (`n_train + n_test` rows).
pub fn blob_fallback_dataset(config: &LipGapConfig) -> Result<Dataset, ExperimentError> {
    gen_blobs_dataset(
        config.n_train + config.n_test,
        BLOB_DIM,
        BLOB_SEPARATION,
        derive_seed(config.seed, "lipgap/data", 0),
    )
}

pub fn lip_gap_run(dataset: &Dataset, config: &LipGapConfig) -> Result<LipGapResult, ExperimentError> {
    let Targets::Classes { classes, .. } = dataset.targets else {
        return Err(ExperimentError::InvalidDataset("lip-gap needs class labels".into()));
    };
    if config.n_train == 0 || config.n_test == 0 || config.n_train + config.n_test > dataset.len() {
        return Err(ExperimentError::InvalidDataset(format!(
            "need {} + {} samples, dataset has {}",
            config.n_train,
            config.n_test,
            dataset.len()
        )));
    }
    let train_set = dataset.select(&(0..config.n_train).collect::<Vec<_>>());
    let test_set = dataset.select(&(config.n_train..config.n_train + config.n_test).collect::<Vec<_>>());
    let dim = dataset.input_dim();
    let arch = Architecture {
        input_dim: dim,
        state_dim: dim,
        hidden: vec![config.hidden],
        output_dim: classes,
        input_map: false,
        output_map: true,
        activation: Activation::Tanh,
        final_activation: false,
        modulation: TimeModulation::None,
        horizon: config.horizon,
        steps: config.steps,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "lipgap/init", 0));
    let mut model = NeuralOdeModel::init(&arch, &mut rng)?;
    let initial_lipschitz = model.network_lipschitz();
    let tc = TrainConfig {
        epochs: config.epochs,
        lr: config.lr,
        batch_size: config.batch_size,
        loss: LossKind::CrossEntropy,
        lambda: 0.0,
        seed: derive_seed(config.seed, "lipgap/shuffle", 0),
        steps: config.steps,
    };
    let record = train(&mut model, &train_set, &test_set, &tc)?;
    let error_gaps: Vec<f64> = record
        .rows
        .iter()
        .map(|r| r.train_accuracy.unwrap_or(f64::NAN) - r.eval_accuracy.unwrap_or(f64::NAN))
        .collect();
    let lipschitz: Vec<f64> = record.rows.iter().map(|r| r.lipschitz).collect();
    let correlation = spearman(&lipschitz, &error_gaps);
    Ok(LipGapResult { record, initial_lipschitz, error_gaps, lipschitz, correlation })
}
