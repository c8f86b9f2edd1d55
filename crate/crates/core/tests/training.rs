use chegn::data::{synth_generate, Dataset};
use chegn::nn::{GraphLayerRegistry, Mode};
use chegn::train::{
    accumulate_gradients, argmax, cross_validate, fit_final, load_checkpoint, nll_loss, predict, prepare,
    save_checkpoint, train_items, EnsembleModel, Optimizer, OptimizerSettings, Sgd, TrainingConfig,
};
use ndarray::Axis;
use proptest::prelude::*;

fn quick_config(seed: u64) -> TrainingConfig {
    TrainingConfig {
        epochs: 10,
        folds: 3,
        seed,
        ..TrainingConfig::default()
    }
}

fn synth(n: usize, seed: u64) -> Dataset {
    synth_generate(n, 10, 2, 3.0, seed).unwrap().dataset
}

#[test]
fn zero_epochs_returns_an_untrained_model() {
    let data = synth(20, 1);
    let all: Vec<usize> = (0..20).collect();
    let prepared = prepare(&data, &all, 0.7).unwrap();
    let config = TrainingConfig {
        epochs: 0,
        ..quick_config(1)
    };
    let (mut trained, history) = train_items(&prepared.dataset, &prepared.graph, &config, &all, 0).unwrap();
    assert!(history.records.is_empty());
    let mut fresh = EnsembleModel::new(
        config.model_spec(&prepared.dataset),
        &GraphLayerRegistry::default(),
        config.seed,
        0,
    )
    .unwrap();
    let a: Vec<Vec<f64>> = trained.graph_parameters().iter().map(|p| p.value.to_vec()).collect();
    let b: Vec<Vec<f64>> = fresh.graph_parameters().iter().map(|p| p.value.to_vec()).collect();
    assert_eq!(a, b);
}

#[test]
fn identical_seeds_give_identical_histories() {
    let data = synth(40, 2);
    let all: Vec<usize> = (0..40).collect();
    let prepared = prepare(&data, &all, 0.7).unwrap();
    let config = quick_config(2);
    let (_, first) = train_items(&prepared.dataset, &prepared.graph, &config, &all, 0).unwrap();
    let (_, second) = train_items(&prepared.dataset, &prepared.graph, &config, &all, 0).unwrap();
    assert_eq!(first.to_csv(), second.to_csv());
    let other = TrainingConfig {
        seed: 3,
        ..config
    };
    let (_, third) = train_items(&prepared.dataset, &prepared.graph, &other, &all, 0).unwrap();
    assert_ne!(first.to_csv(), third.to_csv());
}

#[test]
fn cross_validation_tests_every_sample_once() {
    let data = synth(47, 4);
    let report = cross_validate(&data, &quick_config(4)).unwrap();
    let mut seen = vec![0; 47];
    for fold in &report.folds {
        assert_eq!(fold.predictions.len(), fold.test_items.len());
        for &i in &fold.test_items {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    assert_eq!(report.pooled.total(), 47);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let data = synth(30, 5);
    let config = quick_config(5);
    let mut fitted = fit_final(&data, &config).unwrap();
    let all: Vec<usize> = (0..30).collect();
    let before = predict(&mut fitted.model, &fitted.prepared.graph, &fitted.prepared.dataset, &all).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    save_checkpoint(&path, &mut fitted.model, &fitted.prepared.normalizer, &fitted.prepared.graph).unwrap();
    let spec = config.model_spec(&data);
    let mut restored = EnsembleModel::new(spec.clone(), &GraphLayerRegistry::default(), 99, 7).unwrap();
    let (normalizer, graph) = load_checkpoint(&path, &mut restored).unwrap();
    let mut normalized = data.clone();
    normalized.samples = normalizer.apply(&data.samples).unwrap();
    let after = predict(&mut restored, &graph, &normalized, &all).unwrap();
    assert_eq!(before, after);

    let mut other = spec;
    other.orders = vec![2; 4];
    let mut mismatched = EnsembleModel::new(other, &GraphLayerRegistry::default(), 0, 0).unwrap();
    assert!(load_checkpoint(&path, &mut mismatched).is_err());
}

#[test]
fn eval_on_training_data_matches_last_history_row() {
    let data = synth(40, 6);
    let config = quick_config(6);
    let mut fitted = fit_final(&data, &config).unwrap();
    let all: Vec<usize> = (0..40).collect();
    let predictions = predict(&mut fitted.model, &fitted.prepared.graph, &fitted.prepared.dataset, &all).unwrap();
    let correct = predictions.iter().zip(&data.targets).filter(|(p, t)| p == t).count();
    let accuracy = correct as f64 / 40.0;
    assert!(accuracy >= fitted.history.last().unwrap().train_accuracy - 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn argmax_ignores_strictly_increasing_maps(
        logits in proptest::collection::vec(-5.0f64..5.0, 2..8),
        scale in 0.01f64..10.0,
        shift in -100.0f64..100.0,
        map in 0usize..3,
    ) {
        let f = |v: f64| match map {
            0 => scale * v + shift,
            1 => (scale * v).exp(),
            _ => (scale * v).tanh().atan() + v * 1e-3,
        };
        let mapped: Vec<f64> = logits.iter().map(|&v| f(v)).collect();
        prop_assert_eq!(argmax(&logits), argmax(&mapped));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// A tiny plain gradient step never increases the loss it was taken on.
    #[test]
    fn tiny_step_does_not_increase_loss(seed in 0u64..1000) {
        let data = synth(12, seed);
        let all: Vec<usize> = (0..12).collect();
        let prepared = prepare(&data, &all, 0.7).unwrap();
        let config = TrainingConfig { dropout: 0.0, ..TrainingConfig::default() };
        let spec = config.model_spec(&prepared.dataset);
        let mut model = EnsembleModel::new(spec, &GraphLayerRegistry::default(), seed, 0).unwrap();
        let settings = OptimizerSettings { learning_rate: 1e-6, weight_decay: 0.0 };
        let (mut graph_opt, mut conv_opt) = (Sgd::new(settings), Sgd::new(settings));
        let total = |model: &mut EnsembleModel| {
            let x = prepared.dataset.samples.select(Axis(0), &all);
            let g = model.forward_graph(&prepared.graph, &x, &[], Mode::Train).unwrap();
            let c = model.forward_conv(&x, &[]).unwrap();
            0.9 * nll_loss(&g, &data.targets).unwrap() + 0.1 * nll_loss(&c, &data.targets).unwrap()
        };
        let before = total(&mut model);
        accumulate_gradients(&mut model, &prepared.graph, &prepared.dataset, &all, &all, 0.9).unwrap();
        graph_opt.step(&mut model.graph_parameters()).unwrap();
        conv_opt.step(&mut model.conv_parameters()).unwrap();
        let after = total(&mut model);
        prop_assert!(after <= before + 1e-12, "{} -> {}", before, after);
    }
}
