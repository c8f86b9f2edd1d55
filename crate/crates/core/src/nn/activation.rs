use ndarray::{Array, Array2, Axis, Dimension, Zip};
use rand::Rng as _;

use super::Mode;
use crate::rng::Rng;

pub fn relu<D: Dimension>(x: &Array<f64, D>) -> Array<f64, D> {
    x.mapv(|v| v.max(0.0))
}

/// Gradient of [`relu`] given its input.
pub fn relu_backward<D: Dimension>(input: &Array<f64, D>, grad: &Array<f64, D>) -> Array<f64, D> {
    let mut out = grad.clone();
    Zip::from(&mut out).and(input).for_each(|g, &x| {
        if x <= 0.0 {
            *g = 0.0;
        }
    });
    out
}

pub fn leaky_relu<D: Dimension>(x: &Array<f64, D>, slope: f64) -> Array<f64, D> {
    x.mapv(|v| if v > 0.0 { v } else { slope * v })
}

pub fn leaky_relu_backward<D: Dimension>(
    input: &Array<f64, D>,
    grad: &Array<f64, D>,
    slope: f64,
) -> Array<f64, D> {
    let mut out = grad.clone();
    Zip::from(&mut out).and(input).for_each(|g, &x| {
        if x <= 0.0 {
            *g *= slope;
        }
    });
    out
}

/// Row-wise log-softmax, shifted by the row max for stability.
pub fn log_softmax(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        row.mapv_inplace(|v| v - lse);
    }
    out
}

/// Gradient of [`log_softmax`] given its output.
pub fn log_softmax_backward(output: &Array2<f64>, grad: &Array2<f64>) -> Array2<f64> {
    let mut out = grad.clone();
    for (mut g, y) in out.axis_iter_mut(Axis(0)).zip(output.axis_iter(Axis(0))) {
        let total = g.sum();
        Zip::from(&mut g).and(&y).for_each(|g, &y| *g -= y.exp() * total);
    }
    out
}

/// Inverted dropout: in training, zero each entry with probability `p` and
/// scale survivors by `1/(1−p)`. Identity in evaluation or when `p = 0`.
#[derive(Debug, Clone)]
pub struct Dropout {
    p: f64,
    rng: Rng,
    mask: Option<Vec<f64>>,
}

impl Dropout {
    pub fn new(p: f64, rng: Rng) -> Self {
        assert!((0.0..1.0).contains(&p), "dropout probability must be in [0, 1)");
        Self { p, rng, mask: None }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn forward<D: Dimension>(&mut self, x: &Array<f64, D>, mode: Mode) -> Array<f64, D> {
        if mode == Mode::Eval || self.p == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let keep = 1.0 / (1.0 - self.p);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| if self.rng.random::<f64>() < self.p { 0.0 } else { keep })
            .collect();
        let mut out = x.as_standard_layout().into_owned();
        for (v, m) in out.iter_mut().zip(&mask) {
            *v *= m;
        }
        self.mask = Some(mask);
        out
    }

    pub fn backward<D: Dimension>(&self, grad: &Array<f64, D>) -> Array<f64, D> {
        match &self.mask {
            None => grad.clone(),
            Some(mask) => {
                let mut out = grad.as_standard_layout().into_owned();
                for (g, m) in out.iter_mut().zip(mask) {
                    *g *= m;
                }
                out
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};
    use rand::SeedableRng;

    #[test]
    fn relu_and_leaky_definitions() {
        assert_eq!(relu(&array![-3.0, 2.0]), array![0.0, 2.0]);
        assert_eq!(leaky_relu(&array![-10.0, 4.0], 0.1), array![-1.0, 4.0]);
        let g = leaky_relu_backward(&array![-1.0, 1.0], &array![1.0, 1.0], 0.1);
        assert_eq!(g, array![0.1, 1.0]);
    }

    #[test]
    fn log_softmax_uniform_logits() {
        for c in [2usize, 3, 7] {
            let y = log_softmax(&Array2::from_elem((2, c), 0.3));
            for v in y.iter() {
                assert!((v + (c as f64).ln()).abs() < 1e-12);
            }
        }
        let y = log_softmax(&Array2::zeros((1, 2)));
        assert!((y[[0, 0]] + 0.693147).abs() < 1e-6);
    }

    #[test]
    fn log_softmax_rows_normalize() {
        let x = array![[1000.0, -5.0, 3.0], [0.1, 0.2, 0.3]];
        let y = log_softmax(&x);
        for row in y.rows() {
            let total: f64 = row.iter().map(|v| v.exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dropout_zero_probability_is_identity() {
        let x = array![1.0, -2.0, 3.0];
        let mut d = Dropout::new(0.0, Rng::seed_from_u64(1));
        assert_eq!(d.forward(&x, Mode::Train), x);
        assert_eq!(d.forward(&x, Mode::Eval), x);
    }

    #[test]
    fn dropout_eval_is_identity() {
        let x = array![1.0, -2.0, 3.0];
        let mut d = Dropout::new(0.5, Rng::seed_from_u64(1));
        assert_eq!(d.forward(&x, Mode::Eval), x);
    }

    #[test]
    fn dropout_preserves_expectation() {
        let x = Array1::from_elem(1, 2.0);
        let p = 0.5;
        let mut d = Dropout::new(p, Rng::seed_from_u64(7));
        let trials = 20_000;
        let mean = (0..trials).map(|_| d.forward(&x, Mode::Train)[0]).sum::<f64>() / trials as f64;
        // each draw is 0 or 4: std = 2, standard error = 2/√n
        let se = 2.0 * (p / (1.0 - p)).sqrt() / (trials as f64).sqrt();
        assert!((mean - 2.0).abs() < 3.0 * se, "mean {mean}");
    }
}
