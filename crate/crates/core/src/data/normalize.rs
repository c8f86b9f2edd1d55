use ndarray::{Array1, Array2, Array3, Axis};

use crate::{Error, Result};

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl ZScore {
    pub fn fit(x: &Array2<f64>) -> Result<Self> {
        if x.nrows() < 2 {
            return Err(Error::invalid("z-score needs at least 2 rows"));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let std = x.var_axis(Axis(0), 0.0).mapv(f64::sqrt);
        Ok(Self { mean, std })
    }

    /// Constant columns (std 0) map to zero.
    pub fn apply(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.mean.len() {
            return Err(Error::invalid(format!(
                "z-score fitted on {} columns, got {}",
                self.mean.len(),
                x.ncols()
            )));
        }
        let mut out = x.to_owned();
        for (mut col, (&m, &s)) in out.columns_mut().into_iter().zip(self.mean.iter().zip(self.std.iter())) {
            if s > 0.0 {
                col.mapv_inplace(|v| (v - m) / s);
            } else {
                col.fill(0.0);
            }
        }
        Ok(out)
    }
}

/// Fits on `x` and returns the normalized matrix with its statistics.
pub fn zscore_normalize(x: &Array2<f64>) -> Result<(Array2<f64>, ZScore)> {
    let z = ZScore::fit(x)?;
    Ok((z.apply(x)?, z))
}

/// Which axis of a `samples × nodes × features` stack is a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormAxis {
    Nodes,
    Features,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub axis: NormAxis,
    pub stats: ZScore,
}

impl Normalizer {
    pub fn fit(x: &Array3<f64>, axis: NormAxis) -> Result<Self> {
        Ok(Self {
            axis,
            stats: ZScore::fit(&to_columns(x, axis))?,
        })
    }

    pub fn apply(&self, x: &Array3<f64>) -> Result<Array3<f64>> {
        let z = self.stats.apply(&to_columns(x, self.axis))?;
        Ok(from_columns(z, x.dim(), self.axis))
    }
}

fn to_columns(x: &Array3<f64>, axis: NormAxis) -> Array2<f64> {
    let (s, n, f) = x.dim();
    match axis {
        NormAxis::Features => x
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((s * n, f))
            .expect("contiguous"),
        NormAxis::Nodes => x
            .view()
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((s * f, n))
            .expect("contiguous"),
    }
}

fn from_columns(z: Array2<f64>, (s, n, f): (usize, usize, usize), axis: NormAxis) -> Array3<f64> {
    match axis {
        NormAxis::Features => z.into_shape_with_order((s, n, f)).expect("contiguous"),
        NormAxis::Nodes => z
            .into_shape_with_order((s, f, n))
            .expect("contiguous")
            .permuted_axes([0, 2, 1])
            .as_standard_layout()
            .into_owned(),
    }
}
