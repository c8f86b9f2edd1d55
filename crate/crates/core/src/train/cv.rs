use ndarray::Axis;
use rayon::prelude::*;

use super::kfold::{kfold_split, FoldPlan};
use super::metrics::{compute_metrics, Metrics};
use super::model::EnsembleModel;
use super::trainer::{predict, train_items, History, TrainingConfig};
use crate::data::{Dataset, NormAxis, Normalizer, TaskKind};
use crate::graph::{FeatureMatrix, GraphContext};
use crate::Result;

/// The preprocessing a model depends on: the graph and the normalization,
/// both fitted on training data.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub graph: GraphContext,
    pub normalizer: Normalizer,
    /// The whole dataset, normalized with the fitted statistics.
    pub dataset: Dataset,
}

/// Rows are `(sample, feature)` pairs, columns are nodes.
pub fn node_feature_matrix(dataset: &Dataset, samples: &[usize]) -> Result<FeatureMatrix> {
    let x = dataset.samples.select(Axis(0), samples);
    let (s, n, f) = x.dim();
    let values = x
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((s * f, n))
        .expect("contiguous");
    FeatureMatrix::new(values, dataset.node_names.clone())
}

/// Fits graph and normalization on the given signals. Sample tasks
/// standardize each node; node and edge tasks standardize each feature
/// position across nodes so per-node levels survive.
pub fn prepare(dataset: &Dataset, samples: &[usize], threshold: f64) -> Result<Prepared> {
    let graph = GraphContext::from_features(&node_feature_matrix(dataset, samples)?, threshold)?;
    let axis = match dataset.task {
        TaskKind::SampleClass => NormAxis::Nodes,
        _ => NormAxis::Features,
    };
    let normalizer = Normalizer::fit(&dataset.samples.select(Axis(0), samples), axis)?;
    let mut normalized = dataset.clone();
    normalized.samples = normalizer.apply(&dataset.samples)?;
    Ok(Prepared {
        graph,
        normalizer,
        dataset: normalized,
    })
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub test_items: Vec<usize>,
    pub predictions: Vec<usize>,
    pub metrics: Metrics,
    pub history: History,
}

#[derive(Debug, Clone)]
pub struct CvReport {
    pub plan: FoldPlan,
    pub folds: Vec<FoldResult>,
    pub pooled: Metrics,
}

fn run_fold(dataset: &Dataset, config: &TrainingConfig, plan: &FoldPlan, fold: usize) -> Result<FoldResult> {
    let train = plan.train_indices(fold);
    let test = plan.test_indices(fold);
    let signals: Vec<usize> = match dataset.task {
        TaskKind::SampleClass => train.clone(),
        _ => (0..dataset.num_samples()).collect(),
    };
    let prepared = prepare(dataset, &signals, config.threshold)?;
    let (mut model, history) = train_items(&prepared.dataset, &prepared.graph, config, &train, fold as u64)?;
    let predictions = predict(&mut model, &prepared.graph, &prepared.dataset, &test)?;
    let targets: Vec<usize> = test.iter().map(|&i| dataset.targets[i]).collect();
    let metrics = compute_metrics(&predictions, &targets, dataset.num_classes())?;
    Ok(FoldResult {
        fold,
        test_items: test,
        predictions,
        metrics,
        history,
    })
}

/// K-fold cross-validation over the labeled items. Folds train in parallel;
/// results are collected in fold order.
///
/// For sample tasks the graph and normalization come from the training
/// fold only. Node and edge tasks hold out labels, not signals, so every
/// signal is used for the graph.
pub fn cross_validate(dataset: &Dataset, config: &TrainingConfig) -> Result<CvReport> {
    config.validate()?;
    let plan = kfold_split(dataset.num_items(), config.folds, config.seed)?;
    let folds = (0..config.folds)
        .into_par_iter()
        .map(|f| run_fold(dataset, config, &plan, f))
        .collect::<Result<Vec<_>>>()?;
    let pooled = Metrics::pooled(&folds.iter().map(|f| f.metrics.clone()).collect::<Vec<_>>())?;
    Ok(CvReport { plan, folds, pooled })
}

#[derive(Debug)]
pub struct Fitted {
    pub model: EnsembleModel,
    pub prepared: Prepared,
    pub history: History,
}

/// Trains one model on every item, on a random stream distinct from the
/// cross-validation folds.
pub fn fit_final(dataset: &Dataset, config: &TrainingConfig) -> Result<Fitted> {
    config.validate()?;
    let signals: Vec<usize> = (0..dataset.num_samples()).collect();
    let prepared = prepare(dataset, &signals, config.threshold)?;
    let items: Vec<usize> = (0..dataset.num_items()).collect();
    let (model, history) = train_items(&prepared.dataset, &prepared.graph, config, &items, config.folds as u64)?;
    Ok(Fitted {
        model,
        prepared,
        history,
    })
}
