//! Dense eigendecomposition route for spectral filtering.
//!
//! This path exists to cross-check the Chebyshev recurrence: it filters in
//! the Laplacian eigenbasis, `y = U · g(Λ̃) · Uᵀ x`, evaluating the Chebyshev
//! polynomials on scalar eigenvalues. Production layers never call it.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};

use super::{chebyshev_scalar, LAMBDA_MAX_FALLBACK};
use crate::{Error, Result};

/// `L = U diag(Λ) Uᵀ` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvectors: Array2<f64>,
    pub eigenvalues: Array1<f64>,
}

impl SpectralDecomposition {
    pub fn of(l: &Array2<f64>) -> Result<Self> {
        let n = l.nrows();
        if l.ncols() != n {
            return Err(Error::invalid("Laplacian must be square"));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (l[[i, j]] - l[[j, i]]).abs() > 1e-12 * (1.0 + l[[i, j]].abs()) {
                    return Err(Error::invalid(format!(
                        "eigendecomposition needs a symmetric matrix; ({i}, {j}) differs"
                    )));
                }
            }
        }
        let dense = DMatrix::from_fn(n, n, |i, j| l[[i, j]]);
        let eig = SymmetricEigen::new(dense);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
        Ok(Self {
            eigenvectors,
            eigenvalues,
        })
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let scaled = &self.eigenvectors * &self.eigenvalues;
        scaled.dot(&self.eigenvectors.t())
    }

    /// Largest eigenvalue with the same edgeless fallback as the power
    /// iteration.
    pub fn lambda_max(&self) -> f64 {
        let top = self.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if top < 1e-9 {
            LAMBDA_MAX_FALLBACK
        } else {
            top
        }
    }
}

/// `y = U · (Σ_k θ_k T_k(Λ̃)) · Uᵀ x` with `Λ̃ = 2Λ/λ_max − 1`.
pub fn spectral_filter_oracle(l: &Array2<f64>, theta: &[f64], x: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != l.nrows() {
        return Err(Error::invalid(format!(
            "signal has {} rows for a {}-node graph",
            x.nrows(),
            l.nrows()
        )));
    }
    let decomposition = SpectralDecomposition::of(l)?;
    let lambda_max = decomposition.lambda_max();
    let response = decomposition.eigenvalues.mapv(|lambda| {
        let scaled = 2.0 * lambda / lambda_max - 1.0;
        theta
            .iter()
            .enumerate()
            .map(|(k, t)| t * chebyshev_scalar(k, scaled))
            .sum::<f64>()
    });
    let u = &decomposition.eigenvectors;
    let spectrum = u.t().dot(x);
    let filtered = &spectrum * &response.insert_axis(ndarray::Axis(1));
    Ok(u.dot(&filtered))
}
