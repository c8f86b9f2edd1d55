//! Model checkpoints: parameters, running statistics, normalization and the
//! graph, in the archive format of [`crate::nn::archive`].

use std::path::Path;

use ndarray::{Array1, Array2};

use super::model::EnsembleModel;
use crate::data::{NormAxis, Normalizer, TaskKind, ZScore};
use crate::graph::{AdjacencyMatrix, GraphContext};
use crate::nn::archive::{self, ArchiveEntry};
use crate::{Error, Result};

fn model_entries(model: &mut EnsembleModel) -> Vec<ArchiveEntry> {
    let mut entries: Vec<ArchiveEntry> = Vec::new();
    for p in model.graph_parameters() {
        entries.push(ArchiveEntry::new(p.name, p.shape, p.value.to_vec()));
    }
    for p in model.conv_parameters() {
        entries.push(ArchiveEntry::new(p.name, p.shape, p.value.to_vec()));
    }
    for b in model.buffers() {
        entries.push(ArchiveEntry::new(b.name, b.shape, b.value.to_vec()));
    }
    entries
}

pub fn checkpoint_entries(model: &mut EnsembleModel, normalizer: &Normalizer, graph: &GraphContext) -> Vec<ArchiveEntry> {
    let mut entries = model_entries(model);
    let stats = &normalizer.stats;
    entries.push(ArchiveEntry::new("norm.mean", vec![stats.mean.len()], stats.mean.to_vec()));
    entries.push(ArchiveEntry::new("norm.std", vec![stats.std.len()], stats.std.to_vec()));
    let adj = graph.adjacency().values();
    entries.push(ArchiveEntry::new(
        "graph.adjacency",
        vec![adj.nrows(), adj.ncols()],
        adj.iter().copied().collect(),
    ));
    entries
}

pub fn save_checkpoint(path: &Path, model: &mut EnsembleModel, normalizer: &Normalizer, graph: &GraphContext) -> Result<()> {
    archive::save(path, &checkpoint_entries(model, normalizer, graph))
}

/// Restores `model` in place and returns the stored normalization and
/// graph. Any difference in entry names or shapes is an error, so a model
/// built from a different configuration is rejected.
pub fn load_checkpoint(path: &Path, model: &mut EnsembleModel) -> Result<(Normalizer, GraphContext)> {
    let entries = archive::load(path)?;
    let spec = model.spec().clone();
    let axis = match spec.task {
        TaskKind::SampleClass => NormAxis::Nodes,
        _ => NormAxis::Features,
    };
    let width = match axis {
        NormAxis::Nodes => spec.nodes,
        NormAxis::Features => spec.features,
    };
    let mut manifest: Vec<(String, Vec<usize>)> =
        model_entries(model).into_iter().map(|e| (e.name, e.shape)).collect();
    manifest.push(("norm.mean".into(), vec![width]));
    manifest.push(("norm.std".into(), vec![width]));
    manifest.push(("graph.adjacency".into(), vec![spec.nodes, spec.nodes]));
    if entries.len() != manifest.len() {
        return Err(Error::Archive(format!(
            "checkpoint has {} entries, the configured model expects {}",
            entries.len(),
            manifest.len()
        )));
    }
    for (e, (name, shape)) in entries.iter().zip(&manifest) {
        if e.name != *name || e.shape != *shape {
            return Err(Error::Archive(format!(
                "checkpoint entry '{}' {:?} does not match the configured model's '{name}' {shape:?}",
                e.name, e.shape
            )));
        }
    }
    let mut it = entries.into_iter();
    for p in model.graph_parameters().iter_mut() {
        p.value.copy_from_slice(&it.next().expect("checked").values);
    }
    for p in model.conv_parameters().iter_mut() {
        p.value.copy_from_slice(&it.next().expect("checked").values);
    }
    for b in model.buffers().iter_mut() {
        b.value.copy_from_slice(&it.next().expect("checked").values);
    }
    let mean = Array1::from(it.next().expect("checked").values);
    let std = Array1::from(it.next().expect("checked").values);
    let adj = Array2::from_shape_vec((spec.nodes, spec.nodes), it.next().expect("checked").values)
        .expect("shape checked");
    let normalizer = Normalizer {
        axis,
        stats: ZScore { mean, std },
    };
    let graph = GraphContext::new(AdjacencyMatrix::from_matrix(adj)?)?;
    Ok((normalizer, graph))
}
