use std::collections::BTreeMap;
use std::fmt;

use ndarray::{Array2, Array3};

use super::param::ParamSlot;
use super::{ChebConv, GatConv, GcnConv};
use crate::graph::GraphContext;
use crate::rng::Rng;
use crate::{Error, Result};

/// A graph convolution acting on a batch of node signals shaped
/// `batch × nodes × features`, all sharing one graph.
pub trait GraphLayer: Send + fmt::Debug {
    /// Registry name of the variant.
    fn kind(&self) -> &'static str;

    fn in_features(&self) -> usize;

    fn out_features(&self) -> usize;

    fn forward(&mut self, graph: &GraphContext, x: &Array3<f64>) -> Result<Array3<f64>>;

    /// Accumulates parameter gradients and returns the input gradient.
    /// Uses the activations cached by the last `forward`.
    fn backward(&mut self, graph: &GraphContext, grad: &Array3<f64>) -> Result<Array3<f64>>;

    fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>);

    fn parameter_count(&self) -> usize;
}

/// Construction parameters shared by all graph layer variants; each variant
/// reads the fields it needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphLayerSpec {
    pub in_features: usize,
    pub out_features: usize,
    /// Chebyshev order `K` (ignored by GCN and GAT).
    pub order: usize,
    /// Whether GAT neighborhoods always include the node itself.
    pub self_loops: bool,
}

impl GraphLayerSpec {
    pub fn new(in_features: usize, out_features: usize) -> Self {
        Self {
            in_features,
            out_features,
            order: 1,
            self_loops: true,
        }
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }
}

pub type GraphLayerFactory = fn(&GraphLayerSpec, &mut Rng) -> Result<Box<dyn GraphLayer>>;

/// Name → constructor table for graph layer variants.
pub struct GraphLayerRegistry {
    factories: BTreeMap<&'static str, GraphLayerFactory>,
}

impl GraphLayerRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, name: &'static str, factory: GraphLayerFactory) -> &mut Self {
        self.factories.insert(name, factory);
        self
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn build(&self, name: &str, spec: &GraphLayerSpec, rng: &mut Rng) -> Result<Box<dyn GraphLayer>> {
        let factory = self.factories.get(name).ok_or_else(|| {
            Error::invalid(format!(
                "unknown graph layer '{name}' (known: {})",
                self.names().join(", ")
            ))
        })?;
        factory(spec, rng)
    }
}

impl Default for GraphLayerRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register("cheb", |s, rng| {
            Ok(Box::new(ChebConv::new(s.in_features, s.out_features, s.order, rng)?))
        })
        .register("gcn", |s, rng| Ok(Box::new(GcnConv::new(s.in_features, s.out_features, rng))))
        .register("gat", |s, rng| {
            Ok(Box::new(GatConv::new(s.in_features, s.out_features, s.self_loops, rng)))
        });
        r
    }
}

/// `(B, N, F)` → `(N, B·F)`, so one matrix product applies an `N × N`
/// operator to every sample.
pub(crate) fn to_node_major(x: &Array3<f64>) -> Array2<f64> {
    let (b, n, f) = x.dim();
    x.view()
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
        .into_shape_with_order((n, b * f))
        .expect("contiguous")
}

/// Inverse of [`to_node_major`].
pub(crate) fn from_node_major(x: Array2<f64>, batch: usize, features: usize) -> Array3<f64> {
    let n = x.nrows();
    x.into_shape_with_order((n, batch, features))
        .expect("contiguous")
        .permuted_axes([1, 0, 2])
        .as_standard_layout()
        .into_owned()
}

/// `(B, N, F)` → `(B·N, F)`.
pub(crate) fn flatten_rows(x: &Array3<f64>) -> Array2<f64> {
    let (b, n, f) = x.dim();
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order((b * n, f))
        .expect("contiguous")
}

pub(crate) fn unflatten_rows(x: Array2<f64>, batch: usize, nodes: usize) -> Array3<f64> {
    let f = x.ncols();
    x.as_standard_layout()
        .into_owned()
        .into_shape_with_order((batch, nodes, f))
        .expect("contiguous")
}

/// Applies an `N × N` matrix to each sample of a batch.
pub(crate) fn apply_nodes(m: &Array2<f64>, x: &Array3<f64>) -> Array3<f64> {
    let (b, _, f) = x.dim();
    from_node_major(m.dot(&to_node_major(x)), b, f)
}

pub(crate) fn check_input(graph: &GraphContext, x: &Array3<f64>, in_features: usize, what: &str) -> Result<()> {
    let (_, n, f) = x.dim();
    if n != graph.nodes() {
        return Err(Error::invalid(format!(
            "{what}: input has {n} nodes but the graph has {}",
            graph.nodes()
        )));
    }
    if f != in_features {
        return Err(Error::invalid(format!(
            "{what}: expected {in_features} input features, got {f}"
        )));
    }
    Ok(())
}
