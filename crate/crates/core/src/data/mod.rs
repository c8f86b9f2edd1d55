//! Datasets, loaders and synthetic generators.
//!
//! Every dataset is a stack of graph signals `samples × nodes × features`
//! sharing one node set. What a label attaches to depends on the task:
//!
//! - [`TaskKind::SampleClass`]: one label per signal (DataCo rows, where the
//!   nodes are the transaction features).
//! - [`TaskKind::NodeClass`]: one label per node, constant across signals
//!   (SupplyGraph products; the signals are time windows).
//! - [`TaskKind::EdgeClass`]: one label per listed node pair.

mod dataco;
mod normalize;
mod supplygraph;
mod synth;
mod window;

pub use dataco::{load_dataco, DataCoLoad, DataCoOptions, DATACO_CATEGORICAL, DATACO_FEATURES, DATACO_TARGET};
pub use normalize::{zscore_normalize, NormAxis, Normalizer, ZScore};
pub use supplygraph::{
    load_supplygraph, write_supplygraph, EdgeKind, EdgeList, SupplyGraphSeries, EDGE_FILES, SIGNAL_FILES,
};
pub use synth::{synth_communities, synth_generate, CommunityOptions, SynthCommunities, SynthSamples};
pub use window::{window_series, window_signals};

use ndarray::{Array3, Axis};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    SampleClass,
    NodeClass,
    EdgeClass,
}

impl TaskKind {
    /// Node and edge tasks share one set of labeled items across all
    /// signals; sample tasks do not.
    pub fn is_transductive(self) -> bool {
        !matches!(self, TaskKind::SampleClass)
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// `samples × nodes × features`.
    pub samples: Array3<f64>,
    pub node_names: Vec<String>,
    pub task: TaskKind,
    /// One class index per labeled item (sample, node or edge).
    pub targets: Vec<usize>,
    /// `(src, dst)` pairs; non-empty only for edge tasks.
    pub edges: Vec<(usize, usize)>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        samples: Array3<f64>,
        node_names: Vec<String>,
        task: TaskKind,
        targets: Vec<usize>,
        edges: Vec<(usize, usize)>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let ds = Self {
            samples: samples.as_standard_layout().into_owned(),
            node_names,
            task,
            targets,
            edges,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let (s, n, f) = self.samples.dim();
        if s == 0 || n == 0 || f == 0 {
            return Err(Error::invalid(format!("dataset has an empty dimension: {s}×{n}×{f}")));
        }
        if self.node_names.len() != n {
            return Err(Error::invalid(format!("{} node names for {n} nodes", self.node_names.len())));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        let items = match self.task {
            TaskKind::SampleClass => s,
            TaskKind::NodeClass => n,
            TaskKind::EdgeClass => self.edges.len(),
        };
        if self.targets.len() != items {
            return Err(Error::invalid(format!(
                "{} targets for {items} labeled items",
                self.targets.len()
            )));
        }
        if self.task != TaskKind::EdgeClass && !self.edges.is_empty() {
            return Err(Error::invalid("edge list given for a non-edge task"));
        }
        if let Some(&(a, b)) = self.edges.iter().find(|(a, b)| *a >= n || *b >= n) {
            return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
        }
        let c = self.class_names.len();
        if c < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {c}")));
        }
        if let Some(t) = self.targets.iter().find(|&&t| t >= c) {
            return Err(Error::invalid(format!("target {t} out of range for {c} classes")));
        }
        Ok(())
    }

    pub fn num_samples(&self) -> usize {
        self.samples.dim().0
    }

    pub fn num_nodes(&self) -> usize {
        self.samples.dim().1
    }

    pub fn num_features(&self) -> usize {
        self.samples.dim().2
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    /// Number of labeled items: samples, nodes or edges.
    pub fn num_items(&self) -> usize {
        self.targets.len()
    }

    /// Keeps the listed samples (sample tasks) in the given order.
    pub fn select_samples(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(i) = indices.iter().find(|&&i| i >= self.num_samples()) {
            return Err(Error::invalid(format!("sample index {i} out of range")));
        }
        let samples = self.samples.select(Axis(0), indices);
        let targets = match self.task {
            TaskKind::SampleClass => indices.iter().map(|&i| self.targets[i]).collect(),
            _ => self.targets.clone(),
        };
        Dataset::new(
            samples,
            self.node_names.clone(),
            self.task,
            targets,
            self.edges.clone(),
            self.class_names.clone(),
        )
    }
}

/// Dense class indices for arbitrary labels: integer labels are sorted
/// numerically, anything else keeps first-appearance order.
pub fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<i64>> = raw.iter().map(|s| s.trim().parse::<i64>().ok()).collect();
    let keys: Vec<String> = match &numeric {
        Some(values) => values.iter().map(|v| v.to_string()).collect(),
        None => raw.iter().map(|s| s.trim().to_string()).collect(),
    };
    let names: Vec<String> = match numeric {
        Some(mut values) => {
            values.sort_unstable();
            values.dedup();
            values.iter().map(|v| v.to_string()).collect()
        }
        None => {
            let mut seen: Vec<String> = Vec::new();
            for k in &keys {
                if !seen.contains(k) {
                    seen.push(k.clone());
                }
            }
            seen
        }
    };
    let codes = keys
        .iter()
        .map(|k| names.iter().position(|n| n == k).expect("label collected above"))
        .collect();
    (codes, names)
}
