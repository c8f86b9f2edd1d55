//! Run configuration: a TOML document, dotted-key overrides, and the
//! resolved copy written next to every run.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chegn::data::{DATACO_CATEGORICAL, DATACO_FEATURES, DATACO_TARGET};
use chegn::train::TrainingConfig;
use serde::{Deserialize, Serialize};

/// Overrides the output root for every run when set.
pub const OUTPUT_ROOT_ENV: &str = "CHEGN_OUTPUT_ROOT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    DatacoRisk,
    SgProduct,
    SgProductEdges,
    SgPlantEdges,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthKind {
    Sample,
    Node,
    Edge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub task: Task,
    pub variant: String,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub data: DataSection,
    pub synthetic: SyntheticSection,
    pub graph: GraphSection,
    pub model: ModelSection,
    pub training: TrainingSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataco_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub supplygraph_dir: Option<PathBuf>,
    pub features: Vec<String>,
    pub categorical: Vec<String>,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_samples: Option<usize>,
    pub window: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    pub kind: SynthKind,
    pub samples: usize,
    pub channels: usize,
    pub classes: usize,
    pub separation: f64,
    pub communities: usize,
    pub community_size: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphSection {
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub widths: Option<Vec<usize>>,
    pub orders: Vec<usize>,
    pub self_loops: bool,
    pub dropout: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub alpha: f64,
    pub graph_optimizer: String,
    pub conv_optimizer: String,
    pub graph_lr: f64,
    pub conv_lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub early_stop_accuracy: f64,
    pub early_stop_patience: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            task: Task::Synthetic,
            variant: "cheb".into(),
            output_dir: PathBuf::from("runs"),
            seed: 0,
            data: DataSection::default(),
            synthetic: SyntheticSection::default(),
            graph: GraphSection::default(),
            model: ModelSection::default(),
            training: TrainingSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dataco_path: None,
            supplygraph_dir: None,
            features: DATACO_FEATURES.iter().map(|s| s.to_string()).collect(),
            categorical: DATACO_CATEGORICAL.iter().map(|s| s.to_string()).collect(),
            target: DATACO_TARGET.into(),
            max_samples: None,
            window: 20,
            stride: 1,
        }
    }
}

impl Default for SyntheticSection {
    fn default() -> Self {
        let community = chegn::data::CommunityOptions::default();
        Self {
            kind: SynthKind::Sample,
            samples: 400,
            channels: 10,
            classes: 2,
            separation: 3.0,
            communities: community.communities,
            community_size: community.community_size,
            length: community.length,
        }
    }
}

impl Default for GraphSection {
    fn default() -> Self {
        Self {
            threshold: chegn::graph::DEFAULT_THRESHOLD,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            widths: t.widths,
            orders: t.orders,
            self_loops: t.self_loops,
            dropout: t.dropout,
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            alpha: t.alpha,
            graph_optimizer: t.graph_optimizer,
            conv_optimizer: t.conv_optimizer,
            graph_lr: t.graph_lr,
            conv_lr: t.conv_lr,
            weight_decay: t.weight_decay,
            epochs: t.epochs,
            batch_size: t.batch_size,
            folds: t.folds,
            early_stop_accuracy: t.early_stop_accuracy,
            early_stop_patience: t.early_stop_patience,
        }
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string so `--set task=synthetic` works unquoted.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| anyhow!("empty key in override '{key}'"))?;
    let mut current = table;
    for part in parts {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("override '{key}': '{part}' is not a section"))?;
    }
    current.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Defaults, then the file, then each `key=value` override in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str::<toml::Table>(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| anyhow!("override '{item}' is not of the form key=value"))?;
            set_dotted(&mut table, key.trim(), parse_value(value.trim()))?;
        }
        let config: RunConfig = table.try_into().context("invalid configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.training_config().validate()?;
        if self.data.window == 0 || self.data.stride == 0 {
            bail!("data.window and data.stride must be ≥ 1");
        }
        if !(self.synthetic.separation >= 0.0 && self.synthetic.separation.is_finite()) {
            bail!("synthetic.separation must be finite and ≥ 0, got {}", self.synthetic.separation);
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            variant: self.variant.clone(),
            widths: self.model.widths.clone(),
            orders: self.model.orders.clone(),
            self_loops: self.model.self_loops,
            dropout: self.model.dropout,
            alpha: self.training.alpha,
            graph_optimizer: self.training.graph_optimizer.clone(),
            conv_optimizer: self.training.conv_optimizer.clone(),
            graph_lr: self.training.graph_lr,
            conv_lr: self.training.conv_lr,
            weight_decay: self.training.weight_decay,
            threshold: self.graph.threshold,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            folds: self.training.folds,
            seed: self.seed,
            early_stop_accuracy: self.training.early_stop_accuracy,
            early_stop_patience: self.training.early_stop_patience,
        }
    }

    /// `<root>/<variant>`, where the root is the environment override if set
    /// and `output_dir` otherwise.
    pub fn run_dir(&self) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone());
        root.join(&self.variant)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
