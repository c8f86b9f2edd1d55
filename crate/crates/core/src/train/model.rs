use ndarray::{s, Array2, Array3, Axis};

use crate::data::TaskKind;
use crate::graph::GraphContext;
use crate::nn::{
    flatten_rows, leaky_relu, leaky_relu_backward, log_softmax, log_softmax_backward, relu, relu_backward,
    unflatten_rows, BatchNorm, BufferSlot, Conv1d, Dropout, GraphLayer, GraphLayerRegistry, GraphLayerSpec, Linear,
    Mode, ParamSlot, KERNEL_SIZE,
};
use crate::rng::rng_for;
use crate::{Error, Result};

/// Slope of the leaky ReLU after each convolutional-branch layer.
pub const CONV_LEAKY_SLOPE: f64 = 0.1;
pub const CONV_KERNELS: usize = 10;
pub const EDGE_HIDDEN: usize = 100;

/// Everything needed to rebuild a model with identical parameter shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub task: TaskKind,
    pub nodes: usize,
    pub features: usize,
    pub classes: usize,
    pub variant: String,
    /// Output width of each graph layer.
    pub widths: Vec<usize>,
    /// Chebyshev order of each graph layer.
    pub orders: Vec<usize>,
    pub self_loops: bool,
    pub dropout: f64,
    pub conv_kernels: usize,
    pub edge_hidden: usize,
}

impl ModelSpec {
    /// `[10, 5, C, C]` for sample and node tasks. Edge tasks end in a
    /// 50-wide embedding so the head sees `2·50 = 100` inputs.
    pub fn default_widths(task: TaskKind, classes: usize) -> Vec<usize> {
        match task {
            TaskKind::EdgeClass => vec![10, 5, 50, 50],
            _ => vec![10, 5, classes, classes],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(Error::invalid("model.widths must list at least one layer"));
        }
        if self.widths.len() != self.orders.len() {
            return Err(Error::invalid(format!(
                "model.orders has {} entries but model.widths has {}",
                self.orders.len(),
                self.widths.len()
            )));
        }
        if let Some(k) = self.orders.iter().find(|&&k| k < 1) {
            return Err(Error::invalid(format!("model.orders entries must be ≥ 1, got {k}")));
        }
        if self.widths.contains(&0) {
            return Err(Error::invalid("model.widths entries must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("model.dropout must be in [0, 1), got {}", self.dropout)));
        }
        let last = *self.widths.last().expect("non-empty");
        if self.task != TaskKind::EdgeClass && last != self.classes {
            return Err(Error::invalid(format!(
                "model.widths must end in the class count {} for this task, got {last}",
                self.classes
            )));
        }
        let length = self.conv_length();
        if length < 2 * KERNEL_SIZE - 1 {
            return Err(Error::invalid(format!(
                "the convolutional branch needs sequences of at least {} values, got {length}",
                2 * KERNEL_SIZE - 1
            )));
        }
        Ok(())
    }

    /// Channels seen by the first convolutional layer.
    pub fn conv_channels(&self) -> usize {
        match self.task {
            TaskKind::SampleClass => self.features,
            TaskKind::NodeClass => 1,
            TaskKind::EdgeClass => 2,
        }
    }

    /// Sequence length seen by the convolutional branch.
    pub fn conv_length(&self) -> usize {
        match self.task {
            TaskKind::SampleClass => self.nodes,
            _ => self.features,
        }
    }
}

/// Row `e` is `embedding[src_e] ‖ embedding[dst_e]`.
pub fn edge_embed(embeddings: &Array2<f64>, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
    let (n, d) = embeddings.dim();
    let mut out = Array2::zeros((edges.len(), 2 * d));
    for (e, &(a, b)) in edges.iter().enumerate() {
        if a >= n || b >= n {
            return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
        }
        out.slice_mut(s![e, ..d]).assign(&embeddings.row(a));
        out.slice_mut(s![e, d..]).assign(&embeddings.row(b));
    }
    Ok(out)
}

#[derive(Debug)]
struct GraphCache {
    pre_relu: Vec<Array3<f64>>,
    batch: usize,
    edges: Vec<(usize, usize)>,
    head_hidden: Option<Array2<f64>>,
    output: Array2<f64>,
}

#[derive(Debug)]
struct ConvCache {
    c1: Array3<f64>,
    c2: Array3<f64>,
    output: Array2<f64>,
}

/// A graph branch and a 1-D convolutional branch classifying the same rows.
///
/// Output rows depend on the task: one per sample, one per `(sample, node)`,
/// or one per `(sample, edge)` for the edges passed to `forward_*`.
#[derive(Debug)]
pub struct EnsembleModel {
    spec: ModelSpec,
    layers: Vec<Box<dyn GraphLayer>>,
    norms: Vec<BatchNorm>,
    dropout: Dropout,
    head: Option<(Linear, Linear)>,
    conv: (Conv1d, Conv1d),
    graph_cache: Option<GraphCache>,
    conv_cache: Option<ConvCache>,
}

impl EnsembleModel {
    /// Parameters come from the `init` stream and dropout masks from the
    /// `dropout` stream of `seed`, both at index `stream`.
    pub fn new(spec: ModelSpec, registry: &GraphLayerRegistry, seed: u64, stream: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = rng_for(seed, "init", stream);
        let mut layers = Vec::with_capacity(spec.widths.len());
        let mut norms = Vec::with_capacity(spec.widths.len());
        let mut width = spec.features;
        for (&out, &order) in spec.widths.iter().zip(&spec.orders) {
            let mut layer_spec = GraphLayerSpec::new(width, out).with_order(order);
            layer_spec.self_loops = spec.self_loops;
            layers.push(registry.build(&spec.variant, &layer_spec, &mut rng)?);
            norms.push(BatchNorm::new(out));
            width = out;
        }
        let head = (spec.task == TaskKind::EdgeClass).then(|| {
            (
                Linear::new(2 * width, spec.edge_hidden, &mut rng),
                Linear::new(spec.edge_hidden, spec.classes, &mut rng),
            )
        });
        let conv = (
            Conv1d::new(spec.conv_channels(), spec.conv_kernels, &mut rng),
            Conv1d::new(spec.conv_kernels, spec.classes, &mut rng),
        );
        let dropout = Dropout::new(spec.dropout, rng_for(seed, "dropout", stream));
        Ok(Self {
            spec,
            layers,
            norms,
            dropout,
            head,
            conv,
            graph_cache: None,
            conv_cache: None,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn check_input(&self, graph: &GraphContext, x: &Array3<f64>) -> Result<()> {
        let (_, n, f) = x.dim();
        if n != self.spec.nodes || f != self.spec.features || graph.nodes() != n {
            return Err(Error::invalid(format!(
                "model expects {}×{} signals on a {}-node graph, got {n}×{f} on {} nodes",
                self.spec.nodes,
                self.spec.features,
                self.spec.nodes,
                graph.nodes()
            )));
        }
        Ok(())
    }

    /// Node states after every graph block, input first. Runs in `mode`
    /// and leaves no backward cache.
    pub fn embeddings(&mut self, graph: &GraphContext, x: &Array3<f64>, mode: Mode) -> Result<Vec<Array3<f64>>> {
        self.check_input(graph, x)?;
        let mut states = vec![x.clone()];
        let (b, n, _) = x.dim();
        let mut h = x.clone();
        for (layer, norm) in self.layers.iter_mut().zip(self.norms.iter_mut()) {
            let z = layer.forward(graph, &h)?;
            let y = norm.forward(&flatten_rows(&relu(&z)), mode)?;
            h = unflatten_rows(y, b, n);
            states.push(h.clone());
        }
        Ok(states)
    }

    /// Log-probabilities from the graph branch.
    pub fn forward_graph(
        &mut self,
        graph: &GraphContext,
        x: &Array3<f64>,
        edges: &[(usize, usize)],
        mode: Mode,
    ) -> Result<Array2<f64>> {
        self.check_input(graph, x)?;
        if self.spec.task == TaskKind::EdgeClass && edges.is_empty() {
            return Err(Error::invalid("edge task needs at least one edge"));
        }
        let (b, n, _) = x.dim();
        let mut pre_relu = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (layer, norm) in self.layers.iter_mut().zip(self.norms.iter_mut()) {
            let z = layer.forward(graph, &h)?;
            let y = norm.forward(&flatten_rows(&relu(&z)), mode)?;
            pre_relu.push(z);
            h = unflatten_rows(y, b, n);
        }
        let h = self.dropout.forward(&h, mode);
        let mut head_hidden = None;
        let logits = match self.spec.task {
            TaskKind::SampleClass => h.mean_axis(Axis(1)).expect("nodes > 0"),
            TaskKind::NodeClass => flatten_rows(&h),
            TaskKind::EdgeClass => {
                let d = h.dim().2;
                let mut emb = Array2::zeros((b * edges.len(), 2 * d));
                for s in 0..b {
                    let rows = edge_embed(&h.index_axis(Axis(0), s).to_owned(), edges)?;
                    emb.slice_mut(s![s * edges.len()..(s + 1) * edges.len(), ..]).assign(&rows);
                }
                let (first, second) = self.head.as_mut().expect("edge head");
                let hidden = first.forward(&emb)?;
                let out = second.forward(&relu(&hidden))?;
                head_hidden = Some(hidden);
                out
            }
        };
        let output = log_softmax(&logits);
        self.graph_cache = Some(GraphCache {
            pre_relu,
            batch: b,
            edges: edges.to_vec(),
            head_hidden,
            output: output.clone(),
        });
        Ok(output)
    }

    /// Backpropagates a gradient on the graph branch's log-probabilities
    /// into its parameter gradients.
    pub fn backward_graph(&mut self, graph: &GraphContext, grad: &Array2<f64>) -> Result<()> {
        let cache = self
            .graph_cache
            .take()
            .ok_or_else(|| Error::InvalidState("graph branch backward before forward".into()))?;
        if grad.dim() != cache.output.dim() {
            return Err(Error::invalid("gradient shape does not match graph branch output"));
        }
        let (b, n) = (cache.batch, self.spec.nodes);
        let g = log_softmax_backward(&cache.output, grad);
        let gh = match self.spec.task {
            TaskKind::SampleClass => {
                let c = g.ncols();
                let mut gh = Array3::zeros((b, n, c));
                for s in 0..b {
                    for v in 0..n {
                        gh.slice_mut(s![s, v, ..]).assign(&(&g.row(s) / n as f64));
                    }
                }
                gh
            }
            TaskKind::NodeClass => unflatten_rows(g, b, n),
            TaskKind::EdgeClass => {
                let (first, second) = self.head.as_mut().expect("edge head");
                let hidden = cache.head_hidden.as_ref().expect("edge head cache");
                let g_hidden = relu_backward(hidden, &second.backward(&g)?);
                let g_emb = first.backward(&g_hidden)?;
                let d = g_emb.ncols() / 2;
                let e = cache.edges.len();
                let mut gh = Array3::zeros((b, n, d));
                for s in 0..b {
                    for (j, &(src, dst)) in cache.edges.iter().enumerate() {
                        let row = g_emb.row(s * e + j);
                        let mut a = gh.slice_mut(s![s, src, ..]);
                        a += &row.slice(s![..d]);
                        let mut z = gh.slice_mut(s![s, dst, ..]);
                        z += &row.slice(s![d..]);
                    }
                }
                gh
            }
        };
        let mut gh = self.dropout.backward(&gh);
        for i in (0..self.layers.len()).rev() {
            let g_norm = self.norms[i].backward(&flatten_rows(&gh))?;
            let g_relu = relu_backward(&cache.pre_relu[i], &unflatten_rows(g_norm, b, n));
            gh = self.layers[i].backward(graph, &g_relu)?;
        }
        Ok(())
    }

    fn conv_view(&self, x: &Array3<f64>, edges: &[(usize, usize)]) -> Result<Array3<f64>> {
        let (b, n, f) = x.dim();
        Ok(match self.spec.task {
            TaskKind::SampleClass => x.view().permuted_axes([0, 2, 1]).as_standard_layout().into_owned(),
            TaskKind::NodeClass => x
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order((b * n, 1, f))
                .expect("contiguous"),
            TaskKind::EdgeClass => {
                let e = edges.len();
                let mut v = Array3::zeros((b * e, 2, f));
                for s in 0..b {
                    for (j, &(src, dst)) in edges.iter().enumerate() {
                        if src >= n || dst >= n {
                            return Err(Error::invalid(format!("edge ({src}, {dst}) out of range")));
                        }
                        v.slice_mut(s![s * e + j, 0, ..]).assign(&x.slice(s![s, src, ..]));
                        v.slice_mut(s![s * e + j, 1, ..]).assign(&x.slice(s![s, dst, ..]));
                    }
                }
                v
            }
        })
    }

    /// Log-probabilities from the convolutional branch, rows matching
    /// [`forward_graph`](Self::forward_graph).
    pub fn forward_conv(&mut self, x: &Array3<f64>, edges: &[(usize, usize)]) -> Result<Array2<f64>> {
        let (_, n, f) = x.dim();
        if n != self.spec.nodes || f != self.spec.features {
            return Err(Error::invalid("input layout does not match the model"));
        }
        let view = self.conv_view(x, edges)?;
        let c1 = self.conv.0.forward(&view)?;
        let c2 = self.conv.1.forward(&leaky_relu(&c1, CONV_LEAKY_SLOPE))?;
        let pooled = leaky_relu(&c2, CONV_LEAKY_SLOPE).mean_axis(Axis(2)).expect("length > 0");
        let output = log_softmax(&pooled);
        self.conv_cache = Some(ConvCache {
            c1,
            c2,
            output: output.clone(),
        });
        Ok(output)
    }

    pub fn backward_conv(&mut self, grad: &Array2<f64>) -> Result<()> {
        let cache = self
            .conv_cache
            .take()
            .ok_or_else(|| Error::InvalidState("conv branch backward before forward".into()))?;
        if grad.dim() != cache.output.dim() {
            return Err(Error::invalid("gradient shape does not match conv branch output"));
        }
        let g = log_softmax_backward(&cache.output, grad);
        let (rows, c, len) = cache.c2.dim();
        let mut g_act = Array3::zeros((rows, c, len));
        for r in 0..rows {
            for k in 0..c {
                g_act.slice_mut(s![r, k, ..]).fill(g[[r, k]] / len as f64);
            }
        }
        let g_c2 = leaky_relu_backward(&cache.c2, &g_act, CONV_LEAKY_SLOPE);
        let g_a1 = self.conv.1.backward(&g_c2)?;
        let g_c1 = leaky_relu_backward(&cache.c1, &g_a1, CONV_LEAKY_SLOPE);
        self.conv.0.backward(&g_c1)?;
        Ok(())
    }

    /// Graph layers, batch norms and the edge head.
    pub fn graph_parameters(&mut self) -> Vec<ParamSlot<'_>> {
        let mut out = Vec::new();
        for (i, (layer, norm)) in self.layers.iter_mut().zip(self.norms.iter_mut()).enumerate() {
            layer.parameters(&format!("graph.{i}"), &mut out);
            norm.parameters(&format!("norm.{i}"), &mut out);
        }
        if let Some((first, second)) = self.head.as_mut() {
            first.parameters("head.0", &mut out);
            second.parameters("head.1", &mut out);
        }
        out
    }

    pub fn conv_parameters(&mut self) -> Vec<ParamSlot<'_>> {
        let mut out = Vec::new();
        self.conv.0.parameters("conv.0", &mut out);
        self.conv.1.parameters("conv.1", &mut out);
        out
    }

    /// Batch-norm running statistics.
    pub fn buffers(&mut self) -> Vec<BufferSlot<'_>> {
        let mut out = Vec::new();
        for (i, norm) in self.norms.iter_mut().enumerate() {
            norm.buffers(&format!("norm.{i}"), &mut out);
        }
        out
    }

    /// Parameter count per graph-branch row: each graph layer followed by its
    /// batch norm, then the edge head layers.
    pub fn graph_parameter_rows(&self) -> Vec<(String, usize)> {
        let mut rows = Vec::new();
        for (i, (layer, norm)) in self.layers.iter().zip(&self.norms).enumerate() {
            rows.push((format!("graph.{i} ({})", layer.kind()), layer.parameter_count()));
            rows.push((format!("norm.{i}"), norm.parameter_count()));
        }
        if let Some((first, second)) = &self.head {
            rows.push(("head.0".into(), first.parameter_count()));
            rows.push(("head.1".into(), second.parameter_count()));
        }
        rows
    }

    pub fn conv_parameter_rows(&self) -> Vec<(String, usize)> {
        vec![
            ("conv.0".into(), self.conv.0.parameter_count()),
            ("conv.1".into(), self.conv.1.parameter_count()),
        ]
    }
}
