//! Central-difference gradient checking.
//!
//! A [`GradProbe`] exposes a layer as a scalar function of a flat variable
//! vector (inputs followed by parameters). The scalar is `Σ y ⊙ R` for a
//! fixed random projection `R`, so every output entry contributes.

use ndarray::{Array2, Array3};
use rand::Rng as _;

use super::{BatchNorm, Conv1d, GraphLayer, Linear, Mode, ParamSlot};
use crate::graph::GraphContext;
use crate::rng::Rng;

pub const DEFAULT_STEP: f64 = 1e-5;

pub trait GradProbe {
    fn variables(&mut self) -> Vec<f64>;

    fn set_variables(&mut self, values: &[f64]);

    /// Forward only.
    fn objective(&mut self) -> f64;

    /// Forward and backward; analytic gradient in `variables` order.
    fn gradient(&mut self) -> Vec<f64>;
}

/// Largest relative error `|a − n| / max(1e-8, |a| + |n|)` between the
/// analytic gradient and central differences, over all variables.
pub fn grad_check(probe: &mut dyn GradProbe, h: f64) -> f64 {
    let base = probe.variables();
    let analytic = probe.gradient();
    assert_eq!(analytic.len(), base.len(), "gradient length mismatch");
    let mut worst = 0.0f64;
    let mut vars = base.clone();
    for i in 0..base.len() {
        vars[i] = base[i] + h;
        probe.set_variables(&vars);
        let plus = probe.objective();
        vars[i] = base[i] - h;
        probe.set_variables(&vars);
        let minus = probe.objective();
        vars[i] = base[i];
        let numeric = (plus - minus) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / (analytic[i].abs() + numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    probe.set_variables(&base);
    worst
}

fn random_like(shape: (usize, usize, usize), rng: &mut Rng) -> Array3<f64> {
    Array3::from_shape_simple_fn(shape, || rng.random::<f64>() * 2.0 - 1.0)
}

fn gather(input: &[f64], slots: &[ParamSlot<'_>], grads: bool) -> Vec<f64> {
    let mut out = input.to_vec();
    for s in slots {
        out.extend_from_slice(if grads { s.grad } else { s.value });
    }
    out
}

fn scatter(values: &[f64], input: &mut [f64], slots: &mut [ParamSlot<'_>]) {
    let (head, mut rest) = values.split_at(input.len());
    input.copy_from_slice(head);
    for s in slots.iter_mut() {
        let (mine, tail) = rest.split_at(s.value.len());
        s.value.copy_from_slice(mine);
        rest = tail;
    }
}

/// Probe for any registered graph layer.
pub struct GraphLayerProbe {
    pub layer: Box<dyn GraphLayer>,
    pub graph: GraphContext,
    pub input: Array3<f64>,
    projection: Array3<f64>,
}

impl GraphLayerProbe {
    pub fn new(layer: Box<dyn GraphLayer>, graph: GraphContext, batch: usize, rng: &mut Rng) -> Self {
        let n = graph.nodes();
        let input = random_like((batch, n, layer.in_features()), rng);
        let projection = random_like((batch, n, layer.out_features()), rng);
        Self {
            layer,
            graph,
            input,
            projection,
        }
    }
}

impl GradProbe for GraphLayerProbe {
    fn variables(&mut self) -> Vec<f64> {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(self.input.as_slice().unwrap(), &slots, false)
    }

    fn set_variables(&mut self, values: &[f64]) {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        scatter(values, self.input.as_slice_mut().unwrap(), &mut slots);
    }

    fn objective(&mut self) -> f64 {
        let y = self.layer.forward(&self.graph, &self.input).expect("forward");
        (&y * &self.projection).sum()
    }

    fn gradient(&mut self) -> Vec<f64> {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        slots.iter_mut().for_each(|s| s.zero_grad());
        drop(slots);
        self.layer.forward(&self.graph, &self.input).expect("forward");
        let dx = self.layer.backward(&self.graph, &self.projection).expect("backward");
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(dx.as_slice().unwrap(), &slots, true)
    }
}

pub struct LinearProbe {
    pub layer: Linear,
    pub input: Array2<f64>,
    projection: Array2<f64>,
}

impl LinearProbe {
    pub fn new(layer: Linear, rows: usize, rng: &mut Rng) -> Self {
        let input = Array2::from_shape_simple_fn((rows, layer.in_features()), || rng.random::<f64>() - 0.5);
        let projection = Array2::from_shape_simple_fn((rows, layer.out_features()), || rng.random::<f64>() - 0.5);
        Self {
            layer,
            input,
            projection,
        }
    }
}

impl GradProbe for LinearProbe {
    fn variables(&mut self) -> Vec<f64> {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(self.input.as_slice().unwrap(), &slots, false)
    }

    fn set_variables(&mut self, values: &[f64]) {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        scatter(values, self.input.as_slice_mut().unwrap(), &mut slots);
    }

    fn objective(&mut self) -> f64 {
        (&self.layer.forward(&self.input).expect("forward") * &self.projection).sum()
    }

    fn gradient(&mut self) -> Vec<f64> {
        self.layer.weight.zero_grad();
        self.layer.bias.zero_grad();
        self.layer.forward(&self.input).expect("forward");
        let dx = self.layer.backward(&self.projection).expect("backward");
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(dx.as_slice().unwrap(), &slots, true)
    }
}

pub struct Conv1dProbe {
    pub layer: Conv1d,
    pub input: Array3<f64>,
    projection: Array3<f64>,
}

impl Conv1dProbe {
    pub fn new(layer: Conv1d, batch: usize, length: usize, rng: &mut Rng) -> Self {
        let input = random_like((batch, layer.in_channels(), length), rng);
        let projection = random_like((batch, layer.n_kernels(), length - 4), rng);
        Self {
            layer,
            input,
            projection,
        }
    }
}

impl GradProbe for Conv1dProbe {
    fn variables(&mut self) -> Vec<f64> {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(self.input.as_slice().unwrap(), &slots, false)
    }

    fn set_variables(&mut self, values: &[f64]) {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        scatter(values, self.input.as_slice_mut().unwrap(), &mut slots);
    }

    fn objective(&mut self) -> f64 {
        (&self.layer.forward(&self.input).expect("forward") * &self.projection).sum()
    }

    fn gradient(&mut self) -> Vec<f64> {
        self.layer.kernels.zero_grad();
        self.layer.bias.zero_grad();
        self.layer.forward(&self.input).expect("forward");
        let dx = self.layer.backward(&self.projection).expect("backward");
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(dx.as_slice().unwrap(), &slots, true)
    }
}

/// Batch norm in training mode (batch statistics). Running statistics are
/// updated on every call but do not affect the training-mode output.
pub struct BatchNormProbe {
    pub layer: BatchNorm,
    pub input: Array2<f64>,
    projection: Array2<f64>,
}

impl BatchNormProbe {
    pub fn new(mut layer: BatchNorm, rows: usize, rng: &mut Rng) -> Self {
        let c = layer.channels();
        layer.gamma.value.mapv_inplace(|_| 0.5 + rng.random::<f64>());
        layer.beta.value.mapv_inplace(|_| rng.random::<f64>() - 0.5);
        let input = Array2::from_shape_simple_fn((rows, c), || rng.random::<f64>() * 2.0 - 1.0);
        let projection = Array2::from_shape_simple_fn((rows, c), || rng.random::<f64>() - 0.5);
        Self {
            layer,
            input,
            projection,
        }
    }
}

impl GradProbe for BatchNormProbe {
    fn variables(&mut self) -> Vec<f64> {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(self.input.as_slice().unwrap(), &slots, false)
    }

    fn set_variables(&mut self, values: &[f64]) {
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        scatter(values, self.input.as_slice_mut().unwrap(), &mut slots);
    }

    fn objective(&mut self) -> f64 {
        let y = self.layer.forward(&self.input, Mode::Train).expect("forward");
        (&y * &self.projection).sum()
    }

    fn gradient(&mut self) -> Vec<f64> {
        self.layer.gamma.zero_grad();
        self.layer.beta.zero_grad();
        self.layer.forward(&self.input, Mode::Train).expect("forward");
        let dx = self.layer.backward(&self.projection).expect("backward");
        let mut slots = Vec::new();
        self.layer.parameters("", &mut slots);
        gather(dx.as_slice().unwrap(), &slots, true)
    }
}

/// Wraps a probe and flips the sign of one analytic gradient entry; used to
/// confirm the checker catches a broken backward pass.
pub struct SignFlipProbe<P> {
    pub inner: P,
    pub index: usize,
}

impl<P: GradProbe> GradProbe for SignFlipProbe<P> {
    fn variables(&mut self) -> Vec<f64> {
        self.inner.variables()
    }

    fn set_variables(&mut self, values: &[f64]) {
        self.inner.set_variables(values)
    }

    fn objective(&mut self) -> f64 {
        self.inner.objective()
    }

    fn gradient(&mut self) -> Vec<f64> {
        let mut g = self.inner.gradient();
        g[self.index] = -g[self.index];
        g
    }
}
