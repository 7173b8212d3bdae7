use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::GradientTape;

fn scalar_model(a: f64, b: f64, act: Activation, modulation: TimeModulation) -> NeuralOdeModel {
    let dynamics = MlpDynamics::new(vec![Matrix::filled(1, 1, a)], vec![vec![b]], act, true).unwrap();
    NeuralOdeModel::new(None, dynamics, modulation, None, 1.0, 20).unwrap()
}

fn two_layer(w1: Matrix, w2: Matrix, act: Activation, modulation: TimeModulation) -> NeuralOdeModel {
    let b1 = vec![0.0; w1.rows()];
    let b2 = vec![0.0; w2.rows()];
    let dynamics = MlpDynamics::new(vec![w1, w2], vec![b1, b2], act, true).unwrap();
    NeuralOdeModel::new(None, dynamics, modulation, None, 1.0, 20).unwrap()
}

fn small_arch(modulation: TimeModulation) -> Architecture {
    Architecture {
        input_dim: 3,
        state_dim: 4,
        hidden: vec![5],
        output_dim: 2,
        input_map: true,
        output_map: true,
        activation: Activation::Tanh,
        final_activation: false,
        modulation,
        horizon: 1.0,
        steps: 6,
    }
}

#[test]
fn zero_weights_give_zero_dynamics() {
    let m = two_layer(Matrix::zeros(3, 2), Matrix::zeros(2, 3), Activation::Tanh, TimeModulation::None);
    assert_eq!(m.eval_dynamics(&[0.4, -2.0], 0.3).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn single_affine_layer() {
    let m = scalar_model(2.0, 1.0, Activation::Identity, TimeModulation::None);
    assert_eq!(m.eval_dynamics(&[3.0], 0.0).unwrap(), vec![7.0]);
}

#[test]
fn sine_modulation_vanishes_at_time_zero() {
    let w1 = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 3.0]]).unwrap();
    let w2 = Matrix::from_rows(&[vec![2.0, 1.0], vec![-1.0, 4.0]]).unwrap();
    let m = two_layer(w1, w2, Activation::Relu, TimeModulation::Sine);
    assert_eq!(m.eval_dynamics(&[1.0, 2.0], 0.0).unwrap(), vec![0.0, 0.0]);
    assert_ne!(m.eval_dynamics(&[1.0, 2.0], 1.0).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn rejects_wrong_state_dimension() {
    let m = scalar_model(1.0, 0.0, Activation::Tanh, TimeModulation::None);
    assert!(matches!(m.eval_dynamics(&[1.0, 2.0], 0.0), Err(ModelError::DimensionMismatch { expected: 1, found: 2 })));
    assert!(m.forward(&[1.0, 2.0]).is_err());
}

#[test]
fn zero_dynamics_forward_is_identity() {
    let m = two_layer(Matrix::zeros(4, 2), Matrix::zeros(2, 4), Activation::Tanh, TimeModulation::None);
    let (pred, traj) = m.forward(&[0.25, -1.5]).unwrap();
    assert_eq!(pred, vec![0.25, -1.5]);
    assert_eq!(traj.states.len(), m.steps + 1);
}

#[test]
fn linear_growth_reaches_e_times_x() {
    let m = scalar_model(1.0, 0.0, Activation::Identity, TimeModulation::None);
    let (pred, traj) = m.forward(&[2.0]).unwrap();
    assert!((pred[0] - 2.0 * std::f64::consts::E).abs() < 1e-6);
    assert_eq!(traj.times.len(), 21);
}

#[test]
fn lipschitz_is_product_of_spectral_norms() {
    let m = two_layer(Matrix::from_diag(&[2.0]), Matrix::from_diag(&[3.0]), Activation::Tanh, TimeModulation::None);
    assert!((m.network_lipschitz() - 6.0).abs() < 1e-12);
    let z = two_layer(Matrix::zeros(3, 2), Matrix::from_diag(&[1.0, 1.0, 1.0]).select_rows(&[0, 1]), Activation::Tanh, TimeModulation::None);
    assert_eq!(z.network_lipschitz(), 0.0);
    let i = scalar_model(1.0, 0.0, Activation::Identity, TimeModulation::None);
    assert!((i.network_lipschitz() - 1.0).abs() < 1e-12);
}

#[test]
fn weight_path_lipschitz_tracks_modulation() {
    let grid: Vec<f64> = (0..100).map(|k| k as f64 / 99.0).collect();
    let w2 = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, -1.0]]).unwrap();
    let fixed = two_layer(Matrix::identity(2), w2.clone(), Activation::Relu, TimeModulation::None);
    assert_eq!(fixed.weight_path_lipschitz(&grid).unwrap(), 0.0);

    let s = spectral_norm(&w2, 1e-12, 10_000).unwrap().sigma;
    let sine = two_layer(Matrix::identity(2), w2.clone(), Activation::Relu, TimeModulation::Sine);
    let est = sine.weight_path_lipschitz(&grid).unwrap();
    let max_slope = grid.windows(2).map(|w| (w[1].sin() - w[0].sin()).abs() / (w[1] - w[0])).fold(0.0, f64::max);
    assert!(est <= s * max_slope * (1.0 + 1e-12));
    assert!(est <= s);
    assert!(est > 0.99 * s);

    let doubled = two_layer(Matrix::identity(2), w2.scale(2.0), Activation::Relu, TimeModulation::Sine);
    assert!((doubled.weight_path_lipschitz(&grid).unwrap() - 2.0 * est).abs() < 1e-12);
    assert!(matches!(sine.weight_path_lipschitz(&[0.5]), Err(ModelError::InvalidGrid)));
}

#[test]
fn taped_forward_matches_plain_forward_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for modulation in [TimeModulation::None, TimeModulation::Sine] {
        let m = NeuralOdeModel::init(&small_arch(modulation), &mut rng).unwrap();
        let x = Matrix::new(2, 3, vec![0.1, -0.5, 2.0, 1.0, 0.0, -1.0]).unwrap();
        let mut tape = GradientTape::new();
        let taped = m.record(&mut tape, &x).unwrap();
        assert_eq!(tape.value(taped.prediction), &m.predict_batch(&x).unwrap());
        assert_eq!(taped.params.len(), m.parameters().len());
        assert_eq!(taped.dynamics_weights.len(), 2);
    }
}

#[test]
fn parameters_roundtrip_through_setter() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut m = NeuralOdeModel::init(&small_arch(TimeModulation::Sine), &mut rng).unwrap();
    let mut params = m.parameters();
    params[2] = params[2].scale(2.0);
    m.set_parameters(&params).unwrap();
    assert_eq!(m.parameters(), params);
    assert_eq!(m.dynamics_weight_indices(), vec![2, 4]);
    assert!(m.set_parameters(&params[1..]).is_err());
}

#[test]
fn json_roundtrip_preserves_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = NeuralOdeModel::init(&small_arch(TimeModulation::Sine), &mut rng).unwrap();
    let json = m.to_json();
    let back = NeuralOdeModel::from_json(&json).unwrap();
    assert_eq!(back, m);
    let file = ModelFile::from(&m);
    assert_eq!(file.dims, vec![3, 4, 5, 2]);
    assert_eq!(file.depth, 2);
}

#[test]
fn json_rejects_inconsistent_files() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let m = NeuralOdeModel::init(&small_arch(TimeModulation::None), &mut rng).unwrap();
    let mut file = ModelFile::from(&m);
    file.dims = vec![3, 4, 6, 2];
    assert!(NeuralOdeModel::try_from(&file).is_err());
    let mut file = ModelFile::from(&m);
    file.depth = 3;
    assert!(NeuralOdeModel::try_from(&file).is_err());
    assert!(ModelFile::from_json(r#"{"depth": 1, "bogus": 2}"#).is_err());
}
