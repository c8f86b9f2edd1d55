use ndarray::{Array, Dimension, ShapeBuilder};
use rand::Rng as _;

use crate::rng::Rng;

/// Uniform in `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<D, Sh>(shape: Sh, fan_in: usize, fan_out: usize, rng: &mut Rng) -> Array<f64, D>
where
    D: Dimension,
    Sh: ShapeBuilder<Dim = D>,
{
    let limit = (6.0 / (fan_in + fan_out).max(1) as f64).sqrt();
    Array::from_shape_simple_fn(shape, || rng.random_range(-limit..limit))
}
