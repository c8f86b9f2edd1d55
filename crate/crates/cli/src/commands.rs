use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chegn::data::{write_supplygraph, Dataset};
use chegn::graph::GraphContext;
use chegn::nn::{GraphLayerRegistry, Mode};
use chegn::train::{
    compute_metrics, cross_validate, fit_final, load_checkpoint, predict, save_checkpoint, EnsembleModel, History,
    Metrics,
};
use ndarray::{s, Array2, ArrayView2};

use crate::config::{RunConfig, SynthKind};
use crate::tasks::{communities, load_dataset};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn confusion_csv(metrics: &Metrics, class_names: &[String]) -> String {
    let mut out = String::from("actual");
    for name in class_names {
        write!(out, ",{name}").unwrap();
    }
    out.push('\n');
    for (name, row) in class_names.iter().zip(metrics.confusion.rows()) {
        out.push_str(name);
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Node-major matrix with a header of column labels and one row per node.
fn matrix_csv(corner: &str, columns: &[String], rows: &[String], values: ArrayView2<f64>) -> String {
    let mut out = String::from(corner);
    for c in columns {
        write!(out, ",{c}").unwrap();
    }
    out.push('\n');
    for (name, row) in rows.iter().zip(values.rows()) {
        out.push_str(name);
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

fn history_csv(parts: &[(String, &History)]) -> String {
    let mut out = String::new();
    for (k, (label, history)) in parts.iter().enumerate() {
        for (i, line) in history.to_csv().lines().enumerate() {
            match (i, k) {
                (0, 0) => writeln!(out, "fold,{line}").unwrap(),
                (0, _) => {}
                _ => writeln!(out, "{label},{line}").unwrap(),
            }
        }
    }
    out
}

pub fn train(config: &RunConfig) -> Result<PathBuf> {
    let dataset = load_dataset(config)?;
    let training = config.training_config();
    let dir = config.run_dir();
    log::info!(
        "{} items, {} nodes, {} features, {} classes; {}-fold cross-validation with {}",
        dataset.num_items(),
        dataset.num_nodes(),
        dataset.num_features(),
        dataset.num_classes(),
        training.folds,
        training.variant
    );
    let report = cross_validate(&dataset, &training)?;
    log::info!("pooled accuracy {:.4}; fitting the final model", report.pooled.accuracy);
    let mut fitted = fit_final(&dataset, &training)?;

    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut metrics = format!("cross-validation: {} folds, pooled\n", training.folds);
    metrics.push_str(&report.pooled.to_text(&dataset.class_names));
    metrics.push_str("\nfold accuracy\n");
    for fold in &report.folds {
        writeln!(metrics, "{} {:.6}", fold.fold, fold.metrics.accuracy).unwrap();
    }
    write(&dir, "metrics.txt", metrics)?;
    write(&dir, "confusion.csv", confusion_csv(&report.pooled, &dataset.class_names))?;
    let mut parts: Vec<(String, &History)> = report.folds.iter().map(|f| (f.fold.to_string(), &f.history)).collect();
    parts.push(("final".into(), &fitted.history));
    write(&dir, "history.csv", history_csv(&parts))?;
    let mut plan = String::from("item,fold\n");
    for (i, f) in report.plan.assignments().iter().enumerate() {
        writeln!(plan, "{i},{f}").unwrap();
    }
    write(&dir, "fold_plan.csv", plan)?;
    save_checkpoint(
        &dir.join(CHECKPOINT_FILE),
        &mut fitted.model,
        &fitted.prepared.normalizer,
        &fitted.prepared.graph,
    )?;
    write(&dir, "resolved_config.toml", config.to_toml()?)?;
    Ok(dir)
}

/// A model rebuilt from the configuration with the checkpoint's weights, and
/// the dataset normalized with the checkpoint's statistics.
struct Restored {
    model: EnsembleModel,
    graph: GraphContext,
    dataset: Dataset,
}

fn restore(config: &RunConfig, checkpoint: Option<&Path>) -> Result<Restored> {
    let dataset = load_dataset(config)?;
    let training = config.training_config();
    let path = checkpoint
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.run_dir().join(CHECKPOINT_FILE));
    let mut model = EnsembleModel::new(training.model_spec(&dataset), &GraphLayerRegistry::default(), config.seed, 0)?;
    let (normalizer, graph) = load_checkpoint(&path, &mut model)
        .with_context(|| format!("checkpoint {} does not match the configuration", path.display()))?;
    if graph.nodes() != dataset.num_nodes() {
        bail!("checkpoint graph has {} nodes, data has {}", graph.nodes(), dataset.num_nodes());
    }
    let mut normalized = dataset.clone();
    normalized.samples = normalizer.apply(&dataset.samples)?;
    Ok(Restored {
        model,
        graph,
        dataset: normalized,
    })
}

pub fn eval(config: &RunConfig, checkpoint: Option<&Path>) -> Result<PathBuf> {
    let mut r = restore(config, checkpoint)?;
    let items: Vec<usize> = (0..r.dataset.num_items()).collect();
    let predictions = predict(&mut r.model, &r.graph, &r.dataset, &items)?;
    let metrics = compute_metrics(&predictions, &r.dataset.targets, r.dataset.num_classes())?;
    let dir = config.run_dir().join("eval");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write(&dir, "metrics.txt", metrics.to_text(&r.dataset.class_names))?;
    write(&dir, "confusion.csv", confusion_csv(&metrics, &r.dataset.class_names))?;
    log::info!("accuracy {:.4} on {} items", metrics.accuracy, items.len());
    Ok(dir)
}

pub fn export(config: &RunConfig, what: &str, sample: usize, checkpoint: Option<&Path>) -> Result<PathBuf> {
    if what != "graph" && what != "embeddings" {
        bail!("export target must be 'graph' or 'embeddings', got '{what}'");
    }
    let mut r = restore(config, checkpoint)?;
    let dir = config.run_dir().join("export");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let names = &r.dataset.node_names;
    if what == "graph" {
        let adjacency = r.graph.adjacency().values();
        write(&dir, "graph.csv", matrix_csv("node", names, names, adjacency.view()))?;
        return Ok(dir);
    }
    if sample >= r.dataset.num_samples() {
        bail!("--sample {sample} out of range ({} signals)", r.dataset.num_samples());
    }
    let x = r.dataset.samples.slice(s![sample..sample + 1, .., ..]).to_owned();
    let states = r.model.embeddings(&r.graph, &x, Mode::Eval)?;
    for (i, state) in states.iter().enumerate() {
        let values: Array2<f64> = state.index_axis(ndarray::Axis(0), 0).to_owned();
        let columns: Vec<String> = (0..values.ncols()).map(|j| format!("f{j}")).collect();
        let name = if i == 0 {
            "embedding_input.csv".to_string()
        } else {
            format!("embedding_layer{i}.csv")
        };
        write(&dir, &name, matrix_csv("node", &columns, names, values.view()))?;
    }
    Ok(dir)
}

pub fn synth(config: &RunConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let s = &config.synthetic;
    match s.kind {
        SynthKind::Sample => {
            let generated =
                chegn::data::synth_generate(s.samples, s.channels, s.classes, s.separation, config.seed)?;
            let d = &generated.dataset;
            let mut text = d.node_names.join(",") + ",label\n";
            for (i, t) in d.targets.iter().enumerate() {
                for v in d.samples.slice(s![i, .., 0]) {
                    write!(text, "{v},").unwrap();
                }
                writeln!(text, "{t}").unwrap();
            }
            write(out, "samples.csv", text)?;
            write(
                out,
                "truth_adjacency.csv",
                matrix_csv("node", &d.node_names, &d.node_names, generated.adjacency.view()),
            )?;
        }
        SynthKind::Node | SynthKind::Edge => {
            let c = communities(config)?;
            write_supplygraph(out, &c.series, std::slice::from_ref(&c.edges))?;
        }
    }
    Ok(())
}
