use ndarray::{s, Array1, Array2, Array3, Ix1, Ix2};

use super::init::glorot_uniform;
use super::layer::{check_input, flatten_rows, unflatten_rows, GraphLayer};
use super::param::{join, ParamSlot, Parameter};
use crate::graph::GraphContext;
use crate::rng::Rng;
use crate::{Error, Result};

/// Slope of the leaky ReLU applied to attention logits.
pub const ATTENTION_SLOPE: f64 = 0.2;

/// Single-head graph attention with sum aggregation:
///
/// ```text
/// z      = x·Ψ
/// e_uv   = leaky(a_srcᵀ z_u + a_dstᵀ z_v)      v ∈ N(u)
/// α_uv   = softmax_v(e_uv)
/// h_u    = Σ_v α_uv z_v
/// ```
///
/// `N(u)` is the set of nonzero adjacency entries in row `u`, plus `u`
/// itself when `self_loops` is set. The outer nonlinearity is left to the
/// block that wraps the layer.
#[derive(Debug, Clone)]
pub struct GatConv {
    pub transform: Parameter<Ix2>,
    /// `[a_src ‖ a_dst]`, length `2·F_out`.
    pub attention: Parameter<Ix1>,
    pub self_loops: bool,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    input: Array2<f64>,
    z: Array3<f64>,
    neighbors: Vec<Vec<usize>>,
    /// Per (sample, node): attention logits before the leaky ReLU and the
    /// softmax weights, aligned with `neighbors[node]`.
    logits: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
}

impl GatConv {
    pub fn new(in_features: usize, out_features: usize, self_loops: bool, rng: &mut Rng) -> Self {
        let w = glorot_uniform((in_features, out_features), in_features, out_features, rng);
        let a = glorot_uniform(2 * out_features, 2 * out_features, 1, rng);
        Self::from_weights(w, a, self_loops)
    }

    pub fn from_weights(transform: Array2<f64>, attention: Array1<f64>, self_loops: bool) -> Self {
        assert_eq!(attention.len(), 2 * transform.ncols());
        Self {
            transform: Parameter::new(transform),
            attention: Parameter::new(attention),
            self_loops,
            cache: None,
        }
    }

    fn neighborhoods(&self, graph: &GraphContext) -> Result<Vec<Vec<usize>>> {
        let w = graph.adjacency().values();
        let n = w.nrows();
        (0..n)
            .map(|u| {
                let hood: Vec<usize> = (0..n)
                    .filter(|&v| (self.self_loops && v == u) || w[[u, v]] > 0.0)
                    .collect();
                if hood.is_empty() {
                    Err(Error::invalid(format!(
                        "node {u} has no neighbors and self-loops are disabled"
                    )))
                } else {
                    Ok(hood)
                }
            })
            .collect()
    }

    /// Dense `N × N` attention matrix of one sample from the last forward.
    pub fn attention_matrix(&self, sample: usize) -> Option<Array2<f64>> {
        let cache = self.cache.as_ref()?;
        let n = cache.neighbors.len();
        if sample >= cache.z.dim().0 {
            return None;
        }
        let mut a = Array2::zeros((n, n));
        for u in 0..n {
            for (v, alpha) in cache.neighbors[u].iter().zip(&cache.alpha[sample * n + u]) {
                a[[u, *v]] = *alpha;
            }
        }
        Some(a)
    }
}

impl GraphLayer for GatConv {
    fn kind(&self) -> &'static str {
        "gat"
    }

    fn in_features(&self) -> usize {
        self.transform.value.nrows()
    }

    fn out_features(&self) -> usize {
        self.transform.value.ncols()
    }

    fn forward(&mut self, graph: &GraphContext, x: &Array3<f64>) -> Result<Array3<f64>> {
        check_input(graph, x, self.in_features(), "gat")?;
        let (batch, nodes, _) = x.dim();
        let f_out = self.out_features();
        let neighbors = self.neighborhoods(graph)?;
        let input = flatten_rows(x);
        let z = unflatten_rows(input.dot(&self.transform.value), batch, nodes);
        let a_src = self.attention.value.slice(s![..f_out]);
        let a_dst = self.attention.value.slice(s![f_out..]);

        let mut h = Array3::zeros((batch, nodes, f_out));
        let mut logits = Vec::with_capacity(batch * nodes);
        let mut alphas = Vec::with_capacity(batch * nodes);
        for b in 0..batch {
            let zb = z.slice(s![b, .., ..]);
            let src = zb.dot(&a_src);
            let dst = zb.dot(&a_dst);
            for (u, hood) in neighbors.iter().enumerate() {
                let pre: Vec<f64> = hood.iter().map(|&v| src[u] + dst[v]).collect();
                let top = (0..hood.len()).fold(0, |m, i| if pre[i] > pre[m] { i } else { m });
                let exp: Vec<f64> = hood
                    .iter()
                    .zip(&pre)
                    .map(|(&v, &p)| {
                        // on the same side of the kink src[u] cancels; drop it exactly
                        let shift = match (p > 0.0, pre[top] > 0.0) {
                            (true, true) => dst[v] - dst[hood[top]],
                            (false, false) => ATTENTION_SLOPE * (dst[v] - dst[hood[top]]),
                            _ => leaky(p) - leaky(pre[top]),
                        };
                        shift.exp()
                    })
                    .collect();
                let total: f64 = exp.iter().sum();
                let alpha: Vec<f64> = exp.iter().map(|v| v / total).collect();
                let mut hu = h.slice_mut(s![b, u, ..]);
                for (&v, &a) in hood.iter().zip(&alpha) {
                    hu.scaled_add(a, &zb.row(v));
                }
                logits.push(pre);
                alphas.push(alpha);
            }
        }
        self.cache = Some(Cache {
            input,
            z,
            neighbors,
            logits,
            alpha: alphas,
        });
        Ok(h)
    }

    fn backward(&mut self, _graph: &GraphContext, grad: &Array3<f64>) -> Result<Array3<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidState("gat backward before forward".into()))?;
        let (batch, nodes, f_out) = cache.z.dim();
        if grad.dim() != (batch, nodes, f_out) {
            return Err(Error::invalid("upstream gradient shape does not match gat output"));
        }
        let a_src = self.attention.value.slice(s![..f_out]).to_owned();
        let a_dst = self.attention.value.slice(s![f_out..]).to_owned();
        let mut dz = Array3::zeros((batch, nodes, f_out));
        let mut d_attention = Array1::zeros(2 * f_out);

        for b in 0..batch {
            let zb = cache.z.slice(s![b, .., ..]);
            let mut d_src = Array1::<f64>::zeros(nodes);
            let mut d_dst = Array1::<f64>::zeros(nodes);
            for (u, hood) in cache.neighbors.iter().enumerate() {
                let idx = b * nodes + u;
                let alpha = &cache.alpha[idx];
                let pre = &cache.logits[idx];
                let gu = grad.slice(s![b, u, ..]);
                let d_alpha: Vec<f64> = hood.iter().map(|&v| gu.dot(&zb.row(v))).collect();
                for (&v, &a) in hood.iter().zip(alpha) {
                    dz.slice_mut(s![b, v, ..]).scaled_add(a, &gu);
                }
                let weighted: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
                for (i, &v) in hood.iter().enumerate() {
                    let de = alpha[i] * (d_alpha[i] - weighted);
                    let ds = if pre[i] > 0.0 { de } else { ATTENTION_SLOPE * de };
                    d_src[u] += ds;
                    d_dst[v] += ds;
                }
            }
            for u in 0..nodes {
                let zu = zb.row(u);
                d_attention.slice_mut(s![..f_out]).scaled_add(d_src[u], &zu);
                d_attention.slice_mut(s![f_out..]).scaled_add(d_dst[u], &zu);
                let mut dzu = dz.slice_mut(s![b, u, ..]);
                dzu.scaled_add(d_src[u], &a_src);
                dzu.scaled_add(d_dst[u], &a_dst);
            }
        }
        let dz = flatten_rows(&dz);
        self.transform.accumulate(&cache.input.t().dot(&dz));
        self.attention.accumulate(&d_attention);
        let dx = dz.dot(&self.transform.value.t());
        Ok(unflatten_rows(dx, batch, nodes))
    }

    fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.transform.slot(join(prefix, "transform")));
        out.push(self.attention.slot(join(prefix, "attention")));
    }

    fn parameter_count(&self) -> usize {
        self.transform.len() + self.attention.len()
    }
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        ATTENTION_SLOPE * v
    }
}
