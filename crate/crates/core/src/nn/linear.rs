use ndarray::{Array1, Array2, Axis, Ix1, Ix2};

use super::init::glorot_uniform;
use super::param::{join, ParamSlot, Parameter};
use crate::rng::Rng;
use crate::{Error, Result};

/// `y = x·W + b` on row vectors.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Parameter<Ix2>,
    pub bias: Parameter<Ix1>,
    input: Option<Array2<f64>>,
}

impl Linear {
    pub fn new(in_features: usize, out_features: usize, rng: &mut Rng) -> Self {
        let w = glorot_uniform((in_features, out_features), in_features, out_features, rng);
        Self::from_weights(w, Array1::zeros(out_features))
    }

    pub fn from_weights(weight: Array2<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(weight.ncols(), bias.len(), "bias width must match weight columns");
        Self {
            weight: Parameter::new(weight),
            bias: Parameter::new(bias),
            input: None,
        }
    }

    pub fn in_features(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn out_features(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn parameter_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&mut self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_features() {
            return Err(Error::invalid(format!(
                "linear layer expects {} input features, got {}",
                self.in_features(),
                x.ncols()
            )));
        }
        let y = x.dot(&self.weight.value) + &self.bias.value;
        self.input = Some(x.clone());
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Result<Array2<f64>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| Error::InvalidState("linear backward before forward".into()))?;
        if grad.dim() != (x.nrows(), self.out_features()) {
            return Err(Error::invalid("upstream gradient shape does not match linear output"));
        }
        self.weight.accumulate(&x.t().dot(grad));
        self.bias.accumulate(&grad.sum_axis(Axis(0)));
        Ok(grad.dot(&self.weight.value.t()))
    }

    pub fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.weight.slot(join(prefix, "weight")));
        out.push(self.bias.slot(join(prefix, "bias")));
    }
}
