use ndarray::{Array1, Array2, Axis, Ix1};

use super::param::{join, BufferSlot, ParamSlot, Parameter};
use super::Mode;
use crate::{Error, Result};

pub const BN_EPSILON: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over the rows of a `rows × channels`
/// matrix.
#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub gamma: Parameter<Ix1>,
    pub beta: Parameter<Ix1>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub epsilon: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    normalized: Array2<f64>,
    inv_std: Array1<f64>,
    mode: Mode,
}

impl BatchNorm {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Parameter::new(Array1::ones(channels)),
            beta: Parameter::new(Array1::zeros(channels)),
            running_mean: Array1::zeros(channels),
            running_var: Array1::ones(channels),
            epsilon: BN_EPSILON,
            momentum: BN_MOMENTUM,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>> {
        if x.ncols() != self.channels() {
            return Err(Error::invalid(format!(
                "batch norm expects {} channels, got {}",
                self.channels(),
                x.ncols()
            )));
        }
        let (mean, var) = match mode {
            Mode::Train => {
                let rows = x.nrows();
                if rows < 2 {
                    return Err(Error::invalid(
                        "batch normalization in training mode needs at least 2 rows",
                    ));
                }
                let mean = x.mean_axis(Axis(0)).expect("rows >= 2");
                let var = (x - &mean).mapv(|v| v * v).mean_axis(Axis(0)).expect("rows >= 2");
                let unbiased = &var * (rows as f64 / (rows as f64 - 1.0));
                let m = self.momentum;
                self.running_mean = &self.running_mean * (1.0 - m) + &mean * m;
                self.running_var = &self.running_var * (1.0 - m) + &unbiased * m;
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std = var.mapv(|v| 1.0 / (v + self.epsilon).sqrt());
        let normalized = (x - &mean) * &inv_std;
        let y = &normalized * &self.gamma.value + &self.beta.value;
        self.cache = Some(Cache {
            normalized,
            inv_std,
            mode,
        });
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Array2<f64>) -> Result<Array2<f64>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidState("batch norm backward before forward".into()))?;
        if grad.dim() != cache.normalized.dim() {
            return Err(Error::invalid("upstream gradient shape does not match batch norm output"));
        }
        let xhat = &cache.normalized;
        self.gamma.accumulate(&(grad * xhat).sum_axis(Axis(0)));
        self.beta.accumulate(&grad.sum_axis(Axis(0)));
        let scale = &self.gamma.value * &cache.inv_std;
        let dx = match cache.mode {
            Mode::Eval => grad * &scale,
            Mode::Train => {
                let mean_g = grad.mean_axis(Axis(0)).expect("rows >= 2");
                let mean_gx = (grad * xhat).mean_axis(Axis(0)).expect("rows >= 2");
                (grad - &mean_g - &(xhat * &mean_gx)) * &scale
            }
        };
        Ok(dx)
    }

    pub fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.gamma.slot(join(prefix, "gamma")));
        out.push(self.beta.slot(join(prefix, "beta")));
    }

    pub fn buffers<'a>(&'a mut self, prefix: &str, out: &mut Vec<BufferSlot<'a>>) {
        out.push(BufferSlot::of(join(prefix, "running_mean"), &mut self.running_mean));
        out.push(BufferSlot::of(join(prefix, "running_var"), &mut self.running_var));
    }
}
