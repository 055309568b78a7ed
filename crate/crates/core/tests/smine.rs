mod common;

use common::{max_gradient_error, random_batch};
use slicedmi::gaussian::{gaussian_smi_mc, GaussianSpec};
use slicedmi::smine::{
    feature_extract, feature_extract_from, model_gradient, softmax, train_smine, DvModel, FeatureMaps, Linear,
    Optimizer, TrainConfig,
};
use slicedmi::synthetic::{generate, Scenario, ScenarioKind};
use slicedmi::{SeededRng, SmiError};

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = SeededRng::new(2024);
    for trial in 0..10 {
        let input_dim = 2 + trial % 5;
        let hidden = 3 + 2 * trial;
        let model = DvModel::init(input_dim, hidden, &mut rng).unwrap();
        let pos = random_batch(8 + trial, input_dim, &mut rng);
        let neg = random_batch(6 + 2 * trial, input_dim, &mut rng);
        let err = max_gradient_error(&model, &pos, &neg);
        assert!(err <= 1e-4, "trial {trial}: relative error {err:e}");
    }
}

#[test]
fn partition_gradient_uses_softmax_weights() {
    // For the output bias the joint term contributes 1 and the partition term
    // -Σ softmax = -1; for w2 it is the softmax-weighted hidden activation.
    let mut rng = SeededRng::new(5);
    let model = DvModel::init(3, 4, &mut rng).unwrap();
    let pos = random_batch(7, 3, &mut rng);
    let neg = random_batch(9, 3, &mut rng);
    let g = model_gradient(&model, &pos, &neg).unwrap();
    assert!(g.bias_2.abs() < 1e-15);
    let w = softmax(&model.forward(&neg).unwrap());
    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    let hidden = |z: &[f64], j: usize| {
        (model.bias_1[j] + (0..3).map(|i| model.weights_1[j * 3 + i] * z[i]).sum::<f64>()).tanh()
    };
    for j in 0..4 {
        let direct = pos.iter_rows().map(|z| hidden(z, j)).sum::<f64>() / 7.0
            - neg.iter_rows().zip(&w).map(|(z, wi)| wi * hidden(z, j)).sum::<f64>();
        assert!((g.weights_2[j] - direct).abs() < 1e-14);
    }
}

fn quick(seed: u64) -> TrainConfig {
    TrainConfig { seed, epochs: 60, folds: 1, hidden: 32, ..TrainConfig::default() }
}

#[test]
fn training_is_deterministic_and_validated() {
    let spec = GaussianSpec::scalar(0.5).unwrap();
    let (x, y) = spec.sample(600, &mut SeededRng::new(1)).unwrap();
    let cfg = TrainConfig { epochs: 3, batch_size: 64, ..quick(3) };
    let a = train_smine(&x, &y, &cfg).unwrap();
    assert_eq!(a, train_smine(&x, &y, &cfg).unwrap());
    assert_eq!(a.curve.len(), 3);
    assert!(matches!(train_smine(&x, &y, &TrainConfig { batch_size: 601, ..cfg }), Err(SmiError::InsufficientSamples { .. })));
    assert!(matches!(train_smine(&x, &y, &TrainConfig { learning_rate: 0.0, ..cfg }), Err(SmiError::InvalidConfig(_))));
    assert!(matches!(train_smine(&x, &y, &TrainConfig { folds: 6, ..cfg }), Err(SmiError::InvalidConfig(_))));
}

#[test]
fn divergence_is_reported_with_epoch() {
    let spec = GaussianSpec::scalar(0.99).unwrap();
    let (x, y) = spec.sample(500, &mut SeededRng::new(2)).unwrap();
    let cfg = TrainConfig { epochs: 5, batch_size: 50, learning_rate: 1e308, optimizer: Optimizer::Sgd, ..quick(0) };
    let err = train_smine(&x, &y, &cfg).unwrap_err();
    assert!(matches!(err, SmiError::TrainingDiverged { .. }), "{err}");
}

#[test]
fn estimate_stays_below_oracle() {
    let spec = GaussianSpec::new(
        vec![vec![1.0, 0.2], vec![0.2, 1.0]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![0.6, 0.1], vec![0.0, 0.3]],
    )
    .unwrap();
    let oracle = gaussian_smi_mc(&spec, 100_000, 17).unwrap().value;
    for seed in 0..5 {
        let (x, y) = spec.sample(5000, &mut SeededRng::new(100 + seed)).unwrap();
        let run = train_smine(&x, &y, &TrainConfig { seed, epochs: 80, ..TrainConfig::default() }).unwrap();
        assert!(run.estimate <= oracle + 0.05, "seed {seed}: {} vs oracle {oracle}", run.estimate);
        assert!(run.estimate > 0.0, "seed {seed}: {}", run.estimate);
    }
}

#[test]
fn unsliced_matches_sliced_in_one_dimension() {
    let spec = GaussianSpec::scalar(0.7).unwrap();
    let (x, y) = spec.sample(10_000, &mut SeededRng::new(8)).unwrap();
    let cfg = TrainConfig { seed: 8, epochs: 100, folds: 1, ..TrainConfig::default() };
    let sliced = train_smine(&x, &y, &cfg).unwrap().estimate;
    let plain = train_smine(&x, &y, &TrainConfig { slicing: false, ..cfg }).unwrap().estimate;
    assert!((sliced - plain).abs() <= 0.05, "sliced {sliced} vs plain {plain}");
}

#[test]
fn scalar_feature_sign_does_not_matter() {
    let spec = GaussianSpec::scalar(0.7).unwrap();
    let (x, y) = spec.sample(4000, &mut SeededRng::new(9)).unwrap();
    let cfg = TrainConfig { epochs: 80, folds: 5, ..quick(9) };
    let start = |a: f64| FeatureMaps { a_x: Linear::new(1, 1, vec![a]).unwrap(), a_y: Linear::new(0, 1, vec![]).unwrap() };
    let plus = feature_extract_from(&x, &y, start(0.8), &cfg).unwrap();
    let minus = feature_extract_from(&x, &y, start(-0.8), &cfg).unwrap();
    assert!((plus.estimate - minus.estimate).abs() <= 0.05, "{} vs {}", plus.estimate, minus.estimate);
    assert_eq!(plus.maps.unwrap().a_x.rows, 1);
}

#[test]
fn feature_ranks_are_checked() {
    let (x, y) = generate(&Scenario { kind: ScenarioKind::FeatureNeedle { d: 4 }, n: 500, seed: 0 }).unwrap();
    assert!(matches!(feature_extract(&x, &y, 5, 0, &quick(0)), Err(SmiError::InvalidConfig(_))));
    assert!(matches!(feature_extract(&x, &y, 2, 2, &quick(0)), Err(SmiError::InvalidConfig(_))));
    assert!(matches!(feature_extract(&x, &y, 0, 0, &quick(0)), Err(SmiError::InvalidConfig(_))));
}

#[test]
fn independent_features_have_no_information() {
    let mut rng = SeededRng::new(4);
    let (x, y) = (random_batch(4000, 3, &mut rng), random_batch(4000, 3, &mut rng));
    let run = feature_extract(&x, &y, 3, 2, &TrainConfig { epochs: 60, ..quick(4) }).unwrap();
    assert!(run.estimate <= 0.05, "{}", run.estimate);
    let maps = run.maps.unwrap();
    assert_eq!((maps.a_x.rows, maps.a_x.cols, maps.a_y.rows, maps.a_y.cols), (3, 3, 2, 3));
    assert_eq!(FeatureMaps::from_text(&maps.to_text()).unwrap(), maps);
    assert_eq!(DvModel::from_text(&run.model.to_text()).unwrap(), run.model);
}
