use ndarray::{Array, Dimension};

/// A trainable tensor with its gradient buffer.
///
/// `populated` records whether a backward pass has written into `grad` since
/// the last optimizer step; optimizers refuse to step otherwise.
#[derive(Debug, Clone)]
pub struct Parameter<D: Dimension> {
    pub value: Array<f64, D>,
    pub grad: Array<f64, D>,
    populated: bool,
}

impl<D: Dimension> Parameter<D> {
    pub fn new(value: Array<f64, D>) -> Self {
        let value = value.as_standard_layout().into_owned();
        let grad = Array::zeros(value.raw_dim());
        Self {
            value,
            grad,
            populated: false,
        }
    }

    pub fn accumulate(&mut self, g: &Array<f64, D>) {
        self.grad += g;
        self.populated = true;
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
        self.populated = false;
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn slot(&mut self, name: String) -> ParamSlot<'_> {
        let shape = self.value.shape().to_vec();
        ParamSlot {
            name,
            shape,
            value: self.value.as_slice_mut().expect("standard layout"),
            grad: self.grad.as_slice_mut().expect("standard layout"),
            populated: &mut self.populated,
        }
    }
}

/// Flat mutable view of one parameter, as seen by optimizers and archives.
#[derive(Debug)]
pub struct ParamSlot<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
    pub populated: &'a mut bool,
}

impl ParamSlot<'_> {
    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
        *self.populated = false;
    }
}

/// Non-trainable state that travels with checkpoints (running statistics,
/// normalization records, the graph itself).
#[derive(Debug)]
pub struct BufferSlot<'a> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: &'a mut [f64],
}

impl<'a> BufferSlot<'a> {
    pub fn of<D: Dimension>(name: String, array: &'a mut Array<f64, D>) -> Self {
        let shape = array.shape().to_vec();
        Self {
            name,
            shape,
            value: array.as_slice_mut().expect("standard layout"),
        }
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}
