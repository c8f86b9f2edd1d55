use ndarray::{Array1, Array2, Array3, Axis, Ix1, Ix2};

use super::init::glorot_uniform;
use super::layer::{apply_nodes, check_input, flatten_rows, unflatten_rows, GraphLayer};
use super::param::{join, ParamSlot, Parameter};
use crate::graph::GraphContext;
use crate::rng::Rng;
use crate::{Error, Result};

/// `D̂^{-1/2} (W + I) D̂^{-1/2}` where `D̂` is the degree of `W + I`.
pub fn gcn_propagation(adjacency: &Array2<f64>) -> Array2<f64> {
    let n = adjacency.nrows();
    let a_hat = adjacency + &Array2::<f64>::eye(n);
    let inv_sqrt = a_hat.sum_axis(Axis(1)).mapv(|d| 1.0 / d.sqrt());
    let mut p = a_hat;
    for ((i, j), v) in p.indexed_iter_mut() {
        *v *= inv_sqrt[i] * inv_sqrt[j];
    }
    p
}

/// Symmetric-normalized graph convolution with added self-loops.
#[derive(Debug, Clone)]
pub struct GcnConv {
    pub weight: Parameter<Ix2>,
    pub bias: Parameter<Ix1>,
    /// Propagated input `P·x`, flattened.
    propagated: Option<(Array2<f64>, Array2<f64>, usize, usize)>,
}

impl GcnConv {
    pub fn new(in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let w = glorot_uniform((in_features, out_features), in_features, out_features, rng);
        Self::from_weights(w, Array1::zeros(out_features))
    }

    pub fn from_weights(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weight.ncols(), bias.len());
        Self {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
            propagated: None,
        }
    }
}

impl GraphLayer for GcnConv {
    fn kind(&self) -> &'static str {
        "gcn"
    }

    fn in_features(&self) -> usize {
        self.weight.value.nrows()
    }

    fn out_features(&self) -> usize {
        self.weight.value.ncols()
    }

    fn forward(&mut self, graph: &GraphContext, x: &Array3<f64>) -> Result<Array3<f64>> {
        check_input(graph, x, self.in_features(), "gcn")?;
        let (batch, nodes, _) = x.dim();
        let p = gcn_propagation(graph.adjacency().values());
        let px = flatten_rows(&apply_nodes(&p, x));
        let y = px.dot(&self.weight.value) + &self.bias.value;
        self.propagated = Some((p, px, batch, nodes));
        Ok(unflatten_rows(y, batch, nodes))
    }

    fn backward(&mut self, _graph: &GraphContext, grad: &Array3<f64>) -> Result<Array3<f64>> {
        let (p, px, batch, nodes) = self
            .propagated
            .as_ref()
            .ok_or_else(|| Error::InvalidState("gcn backward before forward".into()))?;
        if grad.dim() != (*batch, *nodes, self.out_features()) {
            return Err(Error::invalid("upstream gradient shape does not match gcn output"));
        }
        let g = flatten_rows(grad);
        self.weight.accumulate(&px.t().dot(&g));
        self.bias.accumulate(&g.sum_axis(Axis(0)));
        let back = unflatten_rows(g.dot(&self.weight.value.t()), *batch, *nodes);
        // P is symmetric
        Ok(apply_nodes(p, &back))
    }

    fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.weight.slot(join(prefix, "weight")));
        out.push(self.bias.slot(join(prefix, "bias")));
    }

    fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}
