use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::experiments::{gen_blobs_dataset, gen_linear_dataset, Provenance};
use crate::model::{Architecture, MlpDynamics, TimeModulation};
use crate::numerics::Activation;

fn values(rows: &[Vec<f64>]) -> Targets {
    Targets::Values(Matrix::from_rows(rows).unwrap())
}

fn diag_model(diags: &[[f64; 2]]) -> NeuralOdeModel {
    let weights = diags.iter().map(|d| Matrix::from_diag(d)).collect();
    let biases = diags.iter().map(|_| vec![0.0; 2]).collect();
    let dynamics = MlpDynamics::new(weights, biases, Activation::Tanh, true).unwrap();
    NeuralOdeModel::new(None, dynamics, TimeModulation::None, None, 1.0, 4).unwrap()
}

fn linear_arch(hidden: usize) -> Architecture {
    Architecture {
        input_dim: 2,
        state_dim: 2,
        hidden: vec![hidden],
        output_dim: 2,
        input_map: false,
        output_map: false,
        activation: Activation::Relu,
        final_activation: false,
        modulation: TimeModulation::Sine,
        horizon: 1.0,
        steps: 10,
    }
}

fn linear_setup(seed: u64) -> (NeuralOdeModel, Dataset, Dataset) {
    let (train_set, eval_set) = gen_linear_dataset(120, seed).unwrap().split_at(100);
    let model = NeuralOdeModel::init(&linear_arch(50), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    (model, train_set, eval_set)
}

fn config(epochs: usize, lambda: f64) -> TrainConfig {
    TrainConfig { epochs, lr: 0.01, batch_size: 0, loss: LossKind::Mse, lambda, seed: 3, steps: 10 }
}

#[test]
fn mse_examples() {
    let t = values(&[vec![1.0, 1.0]]);
    assert_eq!(loss(&Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap(), &t, LossKind::Mse).unwrap(), 0.0);
    assert_eq!(loss(&Matrix::zeros(1, 2), &t, LossKind::Mse).unwrap(), 1.0);
}

#[test]
fn cross_entropy_of_uniform_logits() {
    let t = Targets::Classes { labels: vec![1], classes: 2 };
    let l = loss(&Matrix::zeros(1, 2), &t, LossKind::CrossEntropy).unwrap();
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
}

#[test]
fn loss_rejects_bad_inputs() {
    let empty = Targets::Classes { labels: vec![], classes: 2 };
    assert!(matches!(loss(&Matrix::zeros(1, 2), &empty, LossKind::CrossEntropy), Err(TrainError::EmptyBatch)));
    let t = values(&[vec![1.0, 1.0]]);
    assert!(matches!(loss(&Matrix::zeros(1, 3), &t, LossKind::Mse), Err(TrainError::ShapeMismatch { .. })));
    assert!(matches!(loss(&Matrix::zeros(1, 2), &t, LossKind::CrossEntropy), Err(TrainError::TargetKind { .. })));
}

#[test]
fn zero_lambda_adds_nothing() {
    let model = diag_model(&[[3.0, 1.0]]);
    let x = Matrix::from_rows(&[vec![0.5, -0.2]]).unwrap();
    let t = values(&[vec![1.0, 0.0]]);
    let mut tape = GradientTape::new();
    let fwd = model.record(&mut tape, &x).unwrap();
    let before = tape.len();
    let v = penalized_loss(&mut tape, &fwd, &t, LossKind::Mse, 0.0).unwrap();
    assert_eq!(tape.len(), before + 2);
    let plain = loss(&model.predict_batch(&x).unwrap(), &t, LossKind::Mse).unwrap();
    assert_eq!(tape.scalar(v), plain);
}

fn penalty_parts(model: &NeuralOdeModel, lambda: f64) -> (f64, Vec<Matrix>) {
    let x = Matrix::from_rows(&[vec![0.5, -0.2], vec![0.1, 0.3]]).unwrap();
    let t = values(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let mut tape = GradientTape::new();
    let fwd = model.record(&mut tape, &x).unwrap();
    let v = penalized_loss(&mut tape, &fwd, &t, LossKind::Mse, lambda).unwrap();
    (tape.scalar(v), tape.backward(v).unwrap().into_vec())
}

#[test]
fn spectral_penalty_value_and_gradient() {
    let model = diag_model(&[[3.0, 1.0]]);
    let (base, g0) = penalty_parts(&model, 0.0);
    let (pen, g1) = penalty_parts(&model, 0.1);
    assert!((pen - base - 0.3).abs() < 1e-12);
    let diff = g1[0].sub(&g0[0]);
    let expected = Matrix::from_rows(&[vec![0.1, 0.0], vec![0.0, 0.0]]).unwrap();
    assert!(diff.sub(&expected).frobenius_norm() < 1e-12);
    assert_eq!(g1[1], g0[1]);
}

#[test]
fn penalty_uses_the_largest_layer_only() {
    let model = diag_model(&[[2.0, 1.0], [5.0, 1.0]]);
    let (base, g0) = penalty_parts(&model, 1.0);
    let (pen, g1) = penalty_parts(&model, 2.0);
    assert!((pen - base - 5.0).abs() < 1e-12);
    assert_eq!(g1[0], g0[0]);
    assert!(g1[2].sub(&g0[2]).frobenius_norm() > 0.5);
}

#[test]
fn penalty_lipschitz_matches_weight_bound() {
    let model = diag_model(&[[2.0, 1.0], [5.0, 1.0]]);
    assert!((lipschitz_penalty(&model) - 5.0).abs() < 1e-12);
}

#[test]
fn record_has_one_row_per_epoch_and_consistent_gap() {
    let (mut model, tr, ev) = linear_setup(1);
    let rec = train(&mut model, &tr, &ev, &config(3, 0.0)).unwrap();
    assert_eq!(rec.rows.len(), 3);
    assert!(!rec.diverged());
    for (i, row) in rec.rows.iter().enumerate() {
        assert_eq!(row.epoch, i + 1);
        assert_eq!(row.gen_gap, row.eval_loss - row.train_loss);
        assert_eq!(row.hidden_units, 50);
        assert!(row.weight_path_lipschitz > 0.0);
    }
    let last = rec.final_row().unwrap();
    assert_eq!(last.train_loss, evaluate(&model, &tr, LossKind::Mse).unwrap().loss);
    assert_eq!(last.eval_loss, evaluate(&model, &ev, LossKind::Mse).unwrap().loss);
    assert!((last.lipschitz - model.network_lipschitz()).abs() < 1e-9 * last.lipschitz);
}

#[test]
fn full_batch_train_loss_matches_direct_evaluation() {
    let (model0, tr, ev) = linear_setup(2);
    let mut short = model0.clone();
    let rec3 = train(&mut short, &tr, &ev, &config(3, 0.0)).unwrap();
    let mut long = model0;
    let rec5 = train(&mut long, &tr, &ev, &config(5, 0.0)).unwrap();
    assert_eq!(rec3.rows[..], rec5.rows[..3]);
}

#[test]
fn same_seed_gives_identical_csv() {
    let run = || {
        let (mut model, tr, ev) = linear_setup(4);
        let cfg = TrainConfig { batch_size: 32, ..config(4, 0.1) };
        train(&mut model, &tr, &ev, &cfg).unwrap().to_csv_string()
    };
    let a = run();
    assert_eq!(a, run());
    assert!(a.starts_with(&format!("{RECORD_CSV_HEADER}\n")));
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn linear_reference_run_fits() {
    let (mut model, tr, ev) = linear_setup(0);
    let rec = train(&mut model, &tr, &ev, &config(50, 0.0)).unwrap();
    assert!(rec.final_row().unwrap().train_loss < 0.1, "{:?}", rec.final_row());
}

#[test]
fn strong_penalty_shrinks_the_largest_singular_value() {
    let run = |lambda| {
        let (mut model, tr, ev) = linear_setup(5);
        train(&mut model, &tr, &ev, &config(30, lambda)).unwrap();
        model.dynamics.weight_norm_bound()
    };
    assert!(run(10.0) < run(0.0));
}

#[test]
fn evaluate_examples() {
    let (model, tr, _) = linear_setup(6);
    let pred = model.predict_batch(&tr.inputs).unwrap();
    let own = Dataset::new(tr.inputs.clone(), Targets::Values(pred.clone()), Provenance::SyntheticLinear, None).unwrap();
    assert_eq!(evaluate(&model, &own, LossKind::Mse).unwrap().loss, 0.0);
    let e = evaluate(&model, &tr, LossKind::Mse).unwrap();
    assert_eq!(e.loss, loss(&pred, &tr.targets, LossKind::Mse).unwrap());
    assert_eq!(e.accuracy, None);

    let blobs = gen_blobs_dataset(40, 3, 1.0, 0).unwrap();
    let dynamics = MlpDynamics::new(vec![Matrix::zeros(3, 3)], vec![vec![0.0; 3]], Activation::Tanh, true).unwrap();
    let out = crate::model::AffineMap::new(Matrix::zeros(2, 3), vec![0.7, 0.7]).unwrap();
    let constant = NeuralOdeModel::new(None, dynamics, TimeModulation::None, Some(out), 1.0, 2).unwrap();
    assert_eq!(evaluate(&constant, &blobs, LossKind::CrossEntropy).unwrap().accuracy, Some(0.5));
}

#[test]
fn divergence_truncates_the_record() {
    let arch = Architecture { activation: Activation::Relu, final_activation: true, modulation: TimeModulation::None, ..linear_arch(8) };
    let mut model = NeuralOdeModel::init(&arch, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let (tr, ev) = gen_linear_dataset(30, 0).unwrap().split_at(20);
    let cfg = TrainConfig { lr: 1e6, ..config(20, 0.0) };
    let rec = train(&mut model, &tr, &ev, &cfg).unwrap();
    assert!(rec.diverged());
    assert!(rec.rows.len() < 20);
    assert_eq!(rec.rows.len() + 1, rec.diverged_at.unwrap());
}

#[test]
fn config_validation() {
    assert!(config(0, 0.0).validate().is_err());
    assert!(TrainConfig { lr: 0.0, ..config(1, 0.0) }.validate().is_err());
    assert!(config(1, -1.0).validate().is_err());
    assert!(config(1, 0.0).validate().is_ok());
}
