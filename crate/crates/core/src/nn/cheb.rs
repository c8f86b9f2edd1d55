use ndarray::{s, Array1, Array2, Array3, Axis, Ix1, Ix3};

use super::init::glorot_uniform;
use super::layer::{check_input, flatten_rows, from_node_major, to_node_major, unflatten_rows, GraphLayer};
use super::param::{join, ParamSlot, Parameter};
use crate::graph::{cheb_apply, cheb_combine_transpose, GraphContext};
use crate::rng::Rng;
use crate::{Error, Result};

/// Chebyshev graph convolution:
/// `y = Σ_{k<K} T_k(L̃)·x·θ_k + b`, with `θ` stored as `K × F_in × F_out`.
#[derive(Debug, Clone)]
pub struct ChebConv {
    pub weights: Parameter<Ix3>,
    pub bias: Parameter<Ix1>,
    /// `T_k(L̃)x` per order, flattened to `(B·N) × F_in`.
    basis: Option<(Vec<Array2<f64>>, usize, usize)>,
}

impl ChebConv {
    pub fn new(in_features: usize, out_features: usize, order: usize, rng: &mut Rng) -> Result<Self> {
        if order < 1 {
            return Err(Error::invalid("Chebyshev order must be at least 1"));
        }
        let w = glorot_uniform((order, in_features, out_features), order * in_features, out_features, rng);
        Ok(Self::from_weights(w, Array1::zeros(out_features)))
    }

    pub fn from_weights(weights: Array3<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weights.dim().2, bias.len());
        assert!(weights.dim().0 >= 1);
        Self {
            weights: Parameter::new(weights),
            bias: Parameter::new(bias),
            basis: None,
        }
    }

    pub fn order(&self) -> usize {
        self.weights.value.dim().0
    }
}

impl GraphLayer for ChebConv {
    fn kind(&self) -> &'static str {
        "cheb"
    }

    fn in_features(&self) -> usize {
        self.weights.value.dim().1
    }

    fn out_features(&self) -> usize {
        self.weights.value.dim().2
    }

    fn forward(&mut self, graph: &GraphContext, x: &Array3<f64>) -> Result<Array3<f64>> {
        check_input(graph, x, self.in_features(), "cheb conv")?;
        let (batch, nodes, f_in) = x.dim();
        let terms = cheb_apply(graph.scaled_laplacian(), to_node_major(x).view(), self.order())?;
        let basis: Vec<Array2<f64>> = terms
            .into_iter()
            .map(|t| flatten_rows(&from_node_major(t, batch, f_in)))
            .collect();
        let mut y = Array2::zeros((batch * nodes, self.out_features()));
        for (k, t) in basis.iter().enumerate() {
            y += &t.dot(&self.weights.value.slice(s![k, .., ..]));
        }
        y += &self.bias.value;
        self.basis = Some((basis, batch, nodes));
        Ok(unflatten_rows(y, batch, nodes))
    }

    fn backward(&mut self, graph: &GraphContext, grad: &Array3<f64>) -> Result<Array3<f64>> {
        let (basis, batch, nodes) = self
            .basis
            .as_ref()
            .ok_or_else(|| Error::InvalidState("cheb conv backward before forward".into()))?;
        let (batch, nodes) = (*batch, *nodes);
        if grad.dim() != (batch, nodes, self.out_features()) {
            return Err(Error::invalid("upstream gradient shape does not match cheb conv output"));
        }
        let g = flatten_rows(grad);
        let mut dw = Array3::zeros(self.weights.value.raw_dim());
        let mut terms = Vec::with_capacity(basis.len());
        for (k, t) in basis.iter().enumerate() {
            dw.slice_mut(s![k, .., ..]).assign(&t.t().dot(&g));
            let theta = self.weights.value.slice(s![k, .., ..]);
            let z = unflatten_rows(g.dot(&theta.t()), batch, nodes);
            terms.push(to_node_major(&z));
        }
        self.weights.accumulate(&dw);
        self.bias.accumulate(&g.sum_axis(Axis(0)));
        let dx = cheb_combine_transpose(graph.scaled_laplacian(), &terms)?;
        Ok(from_node_major(dx, batch, self.in_features()))
    }

    fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.weights.slot(join(prefix, "weights")));
        out.push(self.bias.slot(join(prefix, "bias")));
    }

    fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}
