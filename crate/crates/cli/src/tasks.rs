//! Turning a run configuration into a dataset.

use anyhow::{anyhow, Context, Result};
use chegn::data::{
    load_dataco, load_supplygraph, synth_communities, synth_generate, CommunityOptions, DataCoOptions, Dataset,
    EdgeKind, SynthCommunities,
};

use crate::config::{RunConfig, SynthKind, Task};

pub fn community_options(config: &RunConfig) -> CommunityOptions {
    CommunityOptions {
        communities: config.synthetic.communities,
        community_size: config.synthetic.community_size,
        length: config.synthetic.length,
        ..CommunityOptions::default()
    }
}

pub fn communities(config: &RunConfig) -> Result<SynthCommunities> {
    Ok(synth_communities(&community_options(config), config.seed)?)
}

pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    let data = &config.data;
    match config.task {
        Task::DatacoRisk => {
            let path = data
                .dataco_path
                .as_ref()
                .ok_or_else(|| anyhow!("data.dataco_path is required for task dataco-risk"))?;
            let options = DataCoOptions {
                features: data.features.clone(),
                categorical: data.categorical.clone(),
                target: data.target.clone(),
                max_samples: data.max_samples,
            };
            let load = load_dataco(path, &options).with_context(|| format!("loading {}", path.display()))?;
            if load.dropped > 0 {
                log::warn!("dropped {} rows with missing or unparseable values", load.dropped);
            }
            Ok(load.dataset)
        }
        Task::SgProduct | Task::SgProductEdges | Task::SgPlantEdges => {
            let dir = data
                .supplygraph_dir
                .as_ref()
                .ok_or_else(|| anyhow!("data.supplygraph_dir is required for SupplyGraph tasks"))?;
            let (series, edges) = load_supplygraph(dir).with_context(|| format!("loading {}", dir.display()))?;
            let kind = match config.task {
                Task::SgProduct => return Ok(series.node_dataset(data.window, data.stride)?),
                Task::SgProductEdges => EdgeKind::ProductGroup,
                _ => EdgeKind::Plant,
            };
            let list = edges
                .iter()
                .find(|l| l.kind == kind)
                .ok_or_else(|| anyhow!("{} has no {kind:?} edge file", dir.display()))?;
            Ok(series.edge_dataset(list, data.window, data.stride)?)
        }
        Task::Synthetic => {
            let s = &config.synthetic;
            match s.kind {
                SynthKind::Sample => {
                    Ok(synth_generate(s.samples, s.channels, s.classes, s.separation, config.seed)?.dataset)
                }
                SynthKind::Node => Ok(communities(config)?.series.node_dataset(data.window, data.stride)?),
                SynthKind::Edge => {
                    let c = communities(config)?;
                    Ok(c.series.edge_dataset(&c.edges, data.window, data.stride)?)
                }
            }
        }
    }
}
