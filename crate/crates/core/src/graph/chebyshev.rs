use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// `[T_0(L̃)x, …, T_{K−1}(L̃)x]` by the three-term recurrence
/// `T_k = 2 L̃ T_{k−1} − T_{k−2}`. No eigendecomposition.
pub fn cheb_apply(scaled: &Array2<f64>, x: ArrayView2<f64>, order: usize) -> Result<Vec<Array2<f64>>> {
    if order < 1 {
        return Err(Error::invalid("Chebyshev order must be at least 1"));
    }
    check_dims(scaled, x)?;
    let mut out = Vec::with_capacity(order);
    out.push(x.to_owned());
    if order > 1 {
        out.push(scaled.dot(&x));
    }
    for k in 2..order {
        let mut next = scaled.dot(&out[k - 1]);
        next *= 2.0;
        next -= &out[k - 2];
        out.push(next);
    }
    Ok(out)
}

/// `Σ_k T_k(L̃) z_k` via Clenshaw's recurrence. Since `L̃` is symmetric this
/// is also `Σ_k T_k(L̃)ᵀ z_k`, which is what the Chebyshev layer's input
/// gradient needs.
pub fn cheb_combine_transpose(scaled: &Array2<f64>, terms: &[Array2<f64>]) -> Result<Array2<f64>> {
    let Some(first) = terms.first() else {
        return Err(Error::invalid("Chebyshev order must be at least 1"));
    };
    check_dims(scaled, first.view())?;
    if terms.len() == 1 {
        return Ok(first.clone());
    }
    // b_k = z_k + 2 L̃ b_{k+1} − b_{k+2};  result = z_0 + L̃ b_1 − b_2
    let zero = Array2::zeros(first.raw_dim());
    let mut b1 = zero.clone();
    let mut b2 = zero;
    for z in terms.iter().skip(1).rev() {
        let mut b = scaled.dot(&b1);
        b *= 2.0;
        b += z;
        b -= &b2;
        b2 = b1;
        b1 = b;
    }
    let mut result = scaled.dot(&b1);
    result += first;
    result -= &b2;
    Ok(result)
}

/// Scalar `T_k(x)` by the same recurrence.
pub fn chebyshev_scalar(k: usize, x: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for _ in 2..=k {
                let next = 2.0 * x * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn check_dims(scaled: &Array2<f64>, x: ArrayView2<f64>) -> Result<()> {
    if scaled.nrows() != scaled.ncols() || scaled.ncols() != x.nrows() {
        return Err(Error::invalid(format!(
            "scaled Laplacian is {}x{} but signal has {} rows",
            scaled.nrows(),
            scaled.ncols(),
            x.nrows()
        )));
    }
    Ok(())
}
