use ndarray::{s, Array2, Array3};

use crate::{Error, Result};

/// Cuts a `T × P` series into windows shaped `windows × P × window`,
/// ordered by start index.
pub fn window_series(series: &Array2<f64>, window: usize, stride: usize) -> Result<Array3<f64>> {
    let (t, p) = series.dim();
    if window == 0 || stride == 0 {
        return Err(Error::invalid("window and stride must be positive"));
    }
    if t < window {
        return Err(Error::invalid(format!("series length {t} is shorter than window {window}")));
    }
    let n = (t - window) / stride + 1;
    let mut out = Array3::zeros((n, p, window));
    for w in 0..n {
        let start = w * stride;
        out.slice_mut(s![w, .., ..])
            .assign(&series.slice(s![start..start + window, ..]).t());
    }
    Ok(out)
}

/// Windows several aligned signals and stacks them signal-major.
pub fn window_signals(signals: &[Array2<f64>], window: usize, stride: usize) -> Result<Array3<f64>> {
    let first = signals
        .first()
        .ok_or_else(|| Error::invalid("no signals to window"))?;
    if signals.iter().any(|s| s.dim() != first.dim()) {
        return Err(Error::invalid("signals must share dimensions"));
    }
    let parts = signals
        .iter()
        .map(|s| window_series(s, window, stride))
        .collect::<Result<Vec<_>>>()?;
    let views: Vec<_> = parts.iter().map(|a| a.view()).collect();
    Ok(ndarray::concatenate(ndarray::Axis(0), &views).expect("equal shapes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ramp(t: usize, p: usize) -> Array2<f64> {
        Array2::from_shape_fn((t, p), |(i, j)| (i * 10 + j) as f64)
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_series(&ramp(221, 2), 20, 1).unwrap().dim(), (202, 2, 20));
        let full = window_series(&ramp(20, 3), 20, 1).unwrap();
        assert_eq!(full.dim(), (1, 3, 20));
        assert_eq!(full[[0, 2, 19]], 192.0);
        assert_eq!(window_series(&ramp(45, 1), 20, 20).unwrap().dim().0, 2);
        assert!(window_series(&ramp(5, 1), 6, 1).is_err());
    }

    #[test]
    fn signal_major_order() {
        let a = ramp(4, 1);
        let b = ramp(4, 1).mapv(|v| -v);
        let w = window_signals(&[a, b], 3, 1).unwrap();
        assert_eq!(w.dim(), (4, 1, 3));
        assert_eq!(w[[1, 0, 0]], 10.0);
        assert_eq!(w[[2, 0, 0]], 0.0);
        assert_eq!(w[[3, 0, 2]], -30.0);
    }

    proptest! {
        #[test]
        fn tiling_reconstructs_prefix(t in 1usize..60, window in 1usize..12, p in 1usize..4) {
            prop_assume!(t >= window);
            let series = ramp(t, p);
            let w = window_series(&series, window, window).unwrap();
            let n = w.dim().0;
            prop_assert_eq!(n, t / window);
            for k in 0..n {
                for j in 0..p {
                    for i in 0..window {
                        prop_assert_eq!(w[[k, j, i]], series[[k * window + i, j]]);
                    }
                }
            }
        }
    }
}
