use ndarray::{Array1, Array2, Array3, Axis, Ix1, Ix3};

use super::init::glorot_uniform;
use super::param::{join, ParamSlot, Parameter};
use crate::rng::Rng;
use crate::{Error, Result};

/// Kernel length of every 1-D convolution in the convolutional branch.
pub const KERNEL_SIZE: usize = 5;

/// Valid (unpadded) stride-1 cross-correlation over `batch × channels ×
/// length` input, producing `batch × kernels × (length − 4)`.
///
/// The activation is applied separately.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub kernels: Parameter<Ix3>,
    pub bias: Parameter<Ix1>,
    cache: Option<(Array2<f64>, usize, usize)>,
}

impl Conv1d {
    pub fn new(in_channels: usize, n_kernels: usize, rng: &mut Rng) -> Self {
        let k = glorot_uniform(
            (n_kernels, in_channels, KERNEL_SIZE),
            in_channels * KERNEL_SIZE,
            n_kernels * KERNEL_SIZE,
            rng,
        );
        Self::from_weights(k, Array1::zeros(n_kernels))
    }

    pub fn from_weights(kernels: Array3<f64>, bias: Array1<f64>) -> Self {
        assert_eq!(kernels.dim().2, KERNEL_SIZE, "kernel length is fixed at 5");
        assert_eq!(kernels.dim().0, bias.len());
        Self {
            kernels: Parameter::new(kernels),
            bias: Parameter::new(bias),
            cache: None,
        }
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.value.dim().1
    }

    pub fn n_kernels(&self) -> usize {
        self.kernels.value.dim().0
    }

    pub fn parameter_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }

    fn kernel_matrix(&self) -> Array2<f64> {
        let (o, c, k) = self.kernels.value.dim();
        self.kernels
            .value
            .view()
            .into_shape_with_order((o, c * k))
            .expect("standard layout")
            .to_owned()
    }

    pub fn forward(&mut self, x: &Array3<f64>) -> Result<Array3<f64>> {
        let (batch, channels, length) = x.dim();
        if channels != self.in_channels() {
            return Err(Error::invalid(format!(
                "conv1d expects {} input channels, got {channels}",
                self.in_channels()
            )));
        }
        if length < KERNEL_SIZE {
            return Err(Error::invalid(format!(
                "conv1d input length {length} is shorter than the kernel ({KERNEL_SIZE})"
            )));
        }
        let out_len = length - KERNEL_SIZE + 1;
        let width = channels * KERNEL_SIZE;
        // im2col: one row per (sample, output position)
        let mut cols = Array2::zeros((batch * out_len, width));
        for b in 0..batch {
            for t in 0..out_len {
                let mut row = cols.row_mut(b * out_len + t);
                for c in 0..channels {
                    for j in 0..KERNEL_SIZE {
                        row[c * KERNEL_SIZE + j] = x[[b, c, t + j]];
                    }
                }
            }
        }
        let y = cols.dot(&self.kernel_matrix().t()) + &self.bias.value;
        let y = y
            .into_shape_with_order((batch, out_len, self.n_kernels()))
            .expect("contiguous")
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_owned();
        self.cache = Some((cols, channels, length));
        Ok(y)
    }

    pub fn backward(&mut self, grad: &Array3<f64>) -> Result<Array3<f64>> {
        let (cols, channels, length) = self
            .cache
            .as_ref()
            .ok_or_else(|| Error::InvalidState("conv1d backward before forward".into()))?;
        let (channels, length) = (*channels, *length);
        let (batch, kernels, out_len) = grad.dim();
        if kernels != self.n_kernels() || out_len + KERNEL_SIZE - 1 != length {
            return Err(Error::invalid("upstream gradient shape does not match conv1d output"));
        }
        let g = grad
            .view()
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_shape_with_order((batch * out_len, kernels))
            .expect("contiguous")
            .to_owned();
        let dk = g.t().dot(cols);
        self.kernels.accumulate(
            &dk.into_shape_with_order((kernels, channels, KERNEL_SIZE))
                .expect("contiguous"),
        );
        self.bias.accumulate(&g.sum_axis(Axis(0)));
        let dcols = g.dot(&self.kernel_matrix());
        let mut dx = Array3::zeros((batch, channels, length));
        for b in 0..batch {
            for t in 0..out_len {
                let row = dcols.row(b * out_len + t);
                for c in 0..channels {
                    for j in 0..KERNEL_SIZE {
                        dx[[b, c, t + j]] += row[c * KERNEL_SIZE + j];
                    }
                }
            }
        }
        Ok(dx)
    }

    pub fn parameters<'a>(&'a mut self, prefix: &str, out: &mut Vec<ParamSlot<'a>>) {
        out.push(self.kernels.slot(join(prefix, "kernels")));
        out.push(self.bias.slot(join(prefix, "bias")));
    }
}
