//! Deterministic synthetic datasets.

use chrono::{Days, NaiveDate};
use ndarray::{Array2, Array3};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::supplygraph::{EdgeKind, EdgeList, SupplyGraphSeries, SIGNAL_FILES};
use super::{Dataset, TaskKind};
use crate::rng::rng_for;
use crate::{Error, Result};

const LOADING: f64 = 0.4;
const NOISE: f64 = 0.1;
/// Two-class separation up to which the latent scale stays fixed. Beyond it
/// the scale grows with the shifts so between-block correlation stays near
/// 0.79, below the 0.847 that maps to an adjacency weight of 0.7.
const SHIFT_LIMIT: f64 = 5.0;

#[derive(Debug, Clone)]
pub struct SynthSamples {
    pub dataset: Dataset,
    /// 1 between channels of the same block (diagonal included), else 0.
    pub adjacency: Array2<f64>,
    pub blocks: Vec<usize>,
}

/// Block sizes for `n` channels: about three channels per block, larger
/// blocks first (10 → 4, 3, 3).
fn block_sizes(n: usize) -> Vec<usize> {
    let nb = (n / 3).max(1);
    (0..nb).map(|b| n / nb + usize::from(b < n % nb)).collect()
}

/// Sample-labeled signals over `n_channels` nodes.
///
/// Channels fall into blocks driven by one shared latent each, so within-block
/// channels are strongly correlated and blocks are independent. Class `c`
/// shifts every sample by `c · separation` along the unit all-ones direction,
/// so neighbouring classes sit `separation` apart. Large shifts also scale
/// up the latents, which keeps the between-block correlation they induce
/// below the within-block one.
pub fn synth_generate(
    n_samples: usize,
    n_channels: usize,
    n_classes: usize,
    separation: f64,
    seed: u64,
) -> Result<SynthSamples> {
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::invalid(format!("separation must be finite and ≥ 0, got {separation}")));
    }
    if n_channels == 0 {
        return Err(Error::invalid("need at least one channel"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if n_samples < n_classes {
        return Err(Error::invalid("need at least one sample per class"));
    }
    let sizes = block_sizes(n_channels);
    let blocks: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &m)| std::iter::repeat_n(b, m))
        .collect();

    let step = separation / (n_channels as f64).sqrt();
    // per-channel standard deviation of the class shifts, relative to two classes
    let spread = ((n_classes * n_classes - 1) as f64 / 3.0).sqrt();
    let loading = LOADING * (separation * spread / SHIFT_LIMIT).max(1.0);
    let noise = NOISE * loading / LOADING;
    let mut rng = rng_for(seed, "synth-samples", 0);
    let mut samples = Array3::zeros((n_samples, n_channels, 1));
    let mut targets = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let class = i % n_classes;
        let latent: Vec<f64> = (0..sizes.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
        for j in 0..n_channels {
            let eps: f64 = StandardNormal.sample(&mut rng);
            samples[[i, j, 0]] = loading * latent[blocks[j]] + noise * eps + class as f64 * step;
        }
        targets.push(class);
    }
    let adjacency = Array2::from_shape_fn((n_channels, n_channels), |(a, b)| f64::from(u8::from(blocks[a] == blocks[b])));
    let dataset = Dataset::new(
        samples,
        (0..n_channels).map(|j| format!("ch{j}")).collect(),
        TaskKind::SampleClass,
        targets,
        Vec::new(),
        (0..n_classes).map(|c| format!("class{c}")).collect(),
    )?;
    Ok(SynthSamples {
        dataset,
        adjacency,
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityOptions {
    pub communities: usize,
    pub community_size: usize,
    pub length: usize,
    /// Spacing between community mean levels.
    pub spacing: f64,
    /// Scale of the shared within-community fluctuation.
    pub amplitude: f64,
}

impl Default for CommunityOptions {
    fn default() -> Self {
        Self {
            communities: 4,
            community_size: 6,
            length: 60,
            spacing: 2.0,
            amplitude: 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCommunities {
    pub series: SupplyGraphSeries,
    /// Every within-community pair, labeled with the community.
    pub edges: EdgeList,
    pub community: Vec<usize>,
}

/// SupplyGraph-shaped data: products in communities, each product's four
/// signals following a community level plus a shared community fluctuation.
pub fn synth_communities(options: &CommunityOptions, seed: u64) -> Result<SynthCommunities> {
    let CommunityOptions {
        communities,
        community_size,
        length,
        spacing,
        amplitude,
    } = *options;
    if communities < 2 || community_size < 2 || length < 2 {
        return Err(Error::invalid("need ≥ 2 communities of ≥ 2 products over ≥ 2 dates"));
    }
    let p = communities * community_size;
    let community: Vec<usize> = (0..p).map(|i| i / community_size).collect();
    let mut rng = rng_for(seed, "synth-communities", 0);
    let mut signals = Vec::with_capacity(SIGNAL_FILES.len());
    for _ in SIGNAL_FILES {
        let latent = Array2::from_shape_fn((length, communities), |_| {
            amplitude * rng.sample::<f64, _>(StandardNormal)
        });
        let signal = Array2::from_shape_fn((length, p), |(t, i)| {
            let c = community[i];
            spacing * c as f64 + latent[[t, c]] + NOISE * rng.sample::<f64, _>(StandardNormal)
        });
        signals.push(signal);
    }
    let start = NaiveDate::from_ymd_opt(2023, 1, 1).expect("valid date");
    let dates = (0..length as u64).map(|d| start + Days::new(d)).collect();
    let mut edges = Vec::new();
    let mut labels = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            if community[a] == community[b] {
                edges.push((a, b));
                labels.push(format!("G{}", community[a]));
            }
        }
    }
    let series = SupplyGraphSeries {
        dates,
        products: (0..p).map(|i| format!("P{i:03}")).collect(),
        signals,
        groups: Some(community.iter().map(|c| format!("G{c}")).collect()),
        plants: Some(community.iter().map(|c| format!("plant{}", c % 2)).collect()),
    };
    Ok(SynthCommunities {
        series,
        edges: EdgeList {
            kind: EdgeKind::ProductGroup,
            edges,
            labels,
        },
        community,
    })
}
