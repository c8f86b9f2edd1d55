use std::fmt::Write as _;

use ndarray::{Array2, Array3, Axis};
use rand::seq::SliceRandom;

use super::loss::{ensemble_loss, nll_backward, nll_loss};
use super::model::{EnsembleModel, ModelSpec, CONV_KERNELS, EDGE_HIDDEN};
use super::optim::{OptimizerRegistry, OptimizerSettings};
use crate::data::{Dataset, TaskKind};
use crate::graph::GraphContext;
use crate::nn::{GraphLayerRegistry, Mode};
use crate::rng::rng_for;
use crate::{Error, Result};

/// Rows per forward pass when evaluating.
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub variant: String,
    /// Graph layer widths; `None` picks [`ModelSpec::default_widths`].
    pub widths: Option<Vec<usize>>,
    pub orders: Vec<usize>,
    pub self_loops: bool,
    pub dropout: f64,
    pub alpha: f64,
    pub graph_optimizer: String,
    pub conv_optimizer: String,
    pub graph_lr: f64,
    pub conv_lr: f64,
    pub weight_decay: f64,
    pub threshold: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub seed: u64,
    /// Stop once training accuracy has stayed at or above this value for
    /// `early_stop_patience` consecutive epochs. Patience 0 disables it.
    pub early_stop_accuracy: f64,
    pub early_stop_patience: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            variant: "cheb".into(),
            widths: None,
            orders: vec![3; 4],
            self_loops: true,
            dropout: 0.5,
            alpha: 0.9,
            graph_optimizer: "adam".into(),
            conv_optimizer: "adam".into(),
            graph_lr: 1e-3,
            conv_lr: 1e-4,
            weight_decay: 4e-4,
            threshold: crate::graph::DEFAULT_THRESHOLD,
            epochs: 200,
            batch_size: 32,
            folds: 10,
            seed: 0,
            early_stop_accuracy: 0.999,
            early_stop_patience: 20,
        }
    }
}

impl TrainingConfig {
    /// Error messages name the configuration key at fault.
    pub fn validate(&self) -> Result<()> {
        let layers = GraphLayerRegistry::default();
        if !layers.contains(&self.variant) {
            return Err(Error::invalid(format!(
                "variant must be one of {}, got '{}'",
                layers.names().join(", "),
                self.variant
            )));
        }
        let optimizers = OptimizerRegistry::default();
        for (key, name) in [
            ("training.graph_optimizer", &self.graph_optimizer),
            ("training.conv_optimizer", &self.conv_optimizer),
        ] {
            if !optimizers.contains(name) {
                return Err(Error::invalid(format!(
                    "{key} must be one of {}, got '{name}'",
                    optimizers.names().join(", ")
                )));
            }
        }
        for (key, v) in [("training.graph_lr", self.graph_lr), ("training.conv_lr", self.conv_lr)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{key} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::invalid(format!(
                "training.weight_decay must be ≥ 0, got {}",
                self.weight_decay
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("training.alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::invalid(format!(
                "graph.threshold must be in [0, 1), got {}",
                self.threshold
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("model.dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::invalid("model.orders must be a non-empty list of orders ≥ 1"));
        }
        if let Some(w) = &self.widths {
            if w.len() != self.orders.len() {
                return Err(Error::invalid(format!(
                    "model.widths has {} entries but model.orders has {}",
                    w.len(),
                    self.orders.len()
                )));
            }
        }
        if self.folds < 2 {
            return Err(Error::invalid(format!("training.folds must be ≥ 2, got {}", self.folds)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("training.batch_size must be ≥ 1"));
        }
        if !(0.0..=1.0).contains(&self.early_stop_accuracy) {
            return Err(Error::invalid(format!(
                "training.early_stop_accuracy must be in [0, 1], got {}",
                self.early_stop_accuracy
            )));
        }
        Ok(())
    }

    pub fn model_spec(&self, dataset: &Dataset) -> ModelSpec {
        let widths = self.widths.clone().unwrap_or_else(|| {
            let mut w = ModelSpec::default_widths(dataset.task, dataset.num_classes());
            w.resize(self.orders.len(), *w.last().expect("non-empty"));
            w
        });
        ModelSpec {
            task: dataset.task,
            nodes: dataset.num_nodes(),
            features: dataset.num_features(),
            classes: dataset.num_classes(),
            variant: self.variant.clone(),
            widths,
            orders: self.orders.clone(),
            self_loops: self.self_loops,
            dropout: self.dropout,
            conv_kernels: CONV_KERNELS,
            edge_hidden: EDGE_HIDDEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_graph: f64,
    pub loss_conv: f64,
    pub loss_total: f64,
    pub train_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss_graph,loss_conv,loss_total,train_accuracy\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.epoch, r.loss_graph, r.loss_conv, r.loss_total, r.train_accuracy
            )
            .unwrap();
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Edges fed to the model for one batch, which output rows carry a label,
/// and those labels.
struct BatchLabels {
    edges: Vec<(usize, usize)>,
    rows: Vec<usize>,
    targets: Vec<usize>,
}

fn batch_labels(dataset: &Dataset, units: &[usize], items: &[usize]) -> BatchLabels {
    let b = units.len();
    match dataset.task {
        TaskKind::SampleClass => BatchLabels {
            edges: Vec::new(),
            rows: (0..b).collect(),
            targets: units.iter().map(|&i| dataset.targets[i]).collect(),
        },
        TaskKind::NodeClass => {
            let n = dataset.num_nodes();
            let rows = (0..b).flat_map(|s| items.iter().map(move |&v| s * n + v)).collect();
            let targets = (0..b).flat_map(|_| items.iter().map(|&v| dataset.targets[v])).collect();
            BatchLabels {
                edges: Vec::new(),
                rows,
                targets,
            }
        }
        TaskKind::EdgeClass => BatchLabels {
            edges: items.iter().map(|&e| dataset.edges[e]).collect(),
            rows: (0..b * items.len()).collect(),
            targets: (0..b).flat_map(|_| items.iter().map(|&e| dataset.targets[e])).collect(),
        },
    }
}

/// Loss on the labeled rows, and its gradient scattered back to all rows.
fn row_loss(log_probs: &Array2<f64>, labels: &BatchLabels, scale: f64) -> Result<(f64, Array2<f64>)> {
    let picked = log_probs.select(Axis(0), &labels.rows);
    let loss = nll_loss(&picked, &labels.targets)?;
    let g = nll_backward(&picked, &labels.targets, scale)?;
    let mut full = Array2::zeros(log_probs.raw_dim());
    for (k, &r) in labels.rows.iter().enumerate() {
        full.row_mut(r).assign(&g.row(k));
    }
    Ok((loss, full))
}

/// One forward/backward pass of both branches on a batch. Gradients are
/// accumulated, not applied. Returns `(loss_graph, loss_conv)`.
pub fn accumulate_gradients(
    model: &mut EnsembleModel,
    graph: &GraphContext,
    dataset: &Dataset,
    units: &[usize],
    items: &[usize],
    alpha: f64,
) -> Result<(f64, f64)> {
    let x = dataset.samples.select(Axis(0), units);
    let labels = batch_labels(dataset, units, items);
    let lp = model.forward_graph(graph, &x, &labels.edges, Mode::Train)?;
    let (loss_graph, g) = row_loss(&lp, &labels, alpha)?;
    model.backward_graph(graph, &g)?;
    let lc = model.forward_conv(&x, &labels.edges)?;
    let (loss_conv, g) = row_loss(&lc, &labels, 1.0 - alpha)?;
    model.backward_conv(&g)?;
    Ok((loss_graph, loss_conv))
}

/// Graph-branch log-probabilities per item in eval mode. For node and edge
/// tasks the log-probabilities are summed over every signal of `samples`.
pub fn predict_log_probs(
    model: &mut EnsembleModel,
    graph: &GraphContext,
    samples: &Array3<f64>,
    dataset: &Dataset,
    items: &[usize],
) -> Result<Array2<f64>> {
    let c = model.spec().classes;
    let s = samples.dim().0;
    let n = samples.dim().1;
    match dataset.task {
        TaskKind::SampleClass => {
            let mut out = Array2::zeros((items.len(), c));
            for (k, chunk) in items.chunks(EVAL_CHUNK).enumerate() {
                let x = samples.select(Axis(0), chunk);
                let lp = model.forward_graph(graph, &x, &[], Mode::Eval)?;
                out.slice_mut(ndarray::s![k * EVAL_CHUNK..k * EVAL_CHUNK + chunk.len(), ..])
                    .assign(&lp);
            }
            Ok(out)
        }
        TaskKind::NodeClass | TaskKind::EdgeClass => {
            let edges: Vec<(usize, usize)> = match dataset.task {
                TaskKind::EdgeClass => items.iter().map(|&e| dataset.edges[e]).collect(),
                _ => Vec::new(),
            };
            let per_signal = if dataset.task == TaskKind::EdgeClass { edges.len() } else { n };
            let chunk = (EVAL_CHUNK / per_signal.max(1)).max(1);
            let mut total = Array2::zeros((per_signal, c));
            let signals: Vec<usize> = (0..s).collect();
            for part in signals.chunks(chunk) {
                let x = samples.select(Axis(0), part);
                let lp = model.forward_graph(graph, &x, &edges, Mode::Eval)?;
                for b in 0..part.len() {
                    total += &lp.slice(ndarray::s![b * per_signal..(b + 1) * per_signal, ..]);
                }
            }
            Ok(match dataset.task {
                TaskKind::NodeClass => total.select(Axis(0), items),
                _ => total,
            })
        }
    }
}

/// Predicted class per item of `dataset` (samples, nodes or edges).
pub fn predict(
    model: &mut EnsembleModel,
    graph: &GraphContext,
    dataset: &Dataset,
    items: &[usize],
) -> Result<Vec<usize>> {
    if let Some(i) = items.iter().find(|&&i| i >= dataset.num_items()) {
        return Err(Error::invalid(format!("item {i} out of range")));
    }
    let lp = predict_log_probs(model, graph, &dataset.samples, dataset, items)?;
    Ok(lp.rows().into_iter().map(|r| argmax(r.as_slice().expect("row"))).collect())
}

/// Trains on every labeled item of `dataset`.
pub fn train_model(
    dataset: &Dataset,
    graph: &GraphContext,
    config: &TrainingConfig,
) -> Result<(EnsembleModel, History)> {
    let items: Vec<usize> = (0..dataset.num_items()).collect();
    train_items(dataset, graph, config, &items, 0)
}

/// Trains on the listed items. `stream` selects the random streams, so
/// folds get independent but reproducible initialization, dropout and
/// batch order.
pub fn train_items(
    dataset: &Dataset,
    graph: &GraphContext,
    config: &TrainingConfig,
    items: &[usize],
    stream: u64,
) -> Result<(EnsembleModel, History)> {
    config.validate()?;
    if items.is_empty() {
        return Err(Error::invalid("no training items"));
    }
    if graph.nodes() != dataset.num_nodes() {
        return Err(Error::invalid(format!(
            "graph has {} nodes but the dataset has {}",
            graph.nodes(),
            dataset.num_nodes()
        )));
    }
    let mut model = EnsembleModel::new(config.model_spec(dataset), &GraphLayerRegistry::default(), config.seed, stream)?;
    let optimizers = OptimizerRegistry::default();
    let mut graph_opt = optimizers.build(
        &config.graph_optimizer,
        OptimizerSettings {
            learning_rate: config.graph_lr,
            weight_decay: config.weight_decay,
        },
    )?;
    let mut conv_opt = optimizers.build(
        &config.conv_optimizer,
        OptimizerSettings {
            learning_rate: config.conv_lr,
            weight_decay: config.weight_decay,
        },
    )?;
    let mut units: Vec<usize> = match dataset.task {
        TaskKind::SampleClass => items.to_vec(),
        _ => (0..dataset.num_samples()).collect(),
    };
    let targets: Vec<usize> = items.iter().map(|&i| dataset.targets[i]).collect();
    let mut order_rng = rng_for(config.seed, "batches", stream);
    let mut history = History::default();
    let mut streak = 0;
    for epoch in 1..=config.epochs {
        units.shuffle(&mut order_rng);
        let (mut sum_g, mut sum_c, mut weight) = (0.0, 0.0, 0.0);
        for batch in units.chunks(config.batch_size) {
            let (lg, lc) = accumulate_gradients(&mut model, graph, dataset, batch, items, config.alpha)?;
            if !(lg.is_finite() && lc.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    detail: format!("non-finite loss (graph {lg}, conv {lc})"),
                });
            }
            graph_opt.step(&mut model.graph_parameters())?;
            conv_opt.step(&mut model.conv_parameters())?;
            let w = batch.len() as f64;
            sum_g += lg * w;
            sum_c += lc * w;
            weight += w;
        }
        let (loss_graph, loss_conv) = (sum_g / weight, sum_c / weight);
        let predictions = predict(&mut model, graph, dataset, items)?;
        let correct = predictions.iter().zip(&targets).filter(|(p, t)| p == t).count();
        let train_accuracy = correct as f64 / items.len() as f64;
        history.records.push(EpochRecord {
            epoch,
            loss_graph,
            loss_conv,
            loss_total: ensemble_loss(loss_graph, loss_conv, config.alpha),
            train_accuracy,
        });
        if config.early_stop_patience > 0 {
            streak = if train_accuracy >= config.early_stop_accuracy { streak + 1 } else { 0 };
            if streak >= config.early_stop_patience {
                break;
            }
        }
    }
    Ok((model, history))
}
