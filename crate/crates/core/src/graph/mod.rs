//! Correlation-derived graphs and their spectral machinery.
//!
//! A graph is built over the *channels* of a [`FeatureMatrix`]: Pearson
//! correlation between channels, squashed through a sigmoid of its absolute
//! value and thresholded. [`GraphContext`] then carries everything the graph
//! layers need: degree, Laplacian, largest eigenvalue and the scaled Laplacian
//! `2L/λ_max − I` whose spectrum lies in `[−1, 1]`.

mod chebyshev;
mod spectral;

pub use chebyshev::{cheb_apply, cheb_combine_transpose, chebyshev_scalar};
pub use spectral::{spectral_filter_oracle, SpectralDecomposition};

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::{Error, Result};

/// Default edge threshold on `σ(|corr|)`; sits above `σ(0) = 0.5` so
/// uncorrelated channels disconnect.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Returned by [`lambda_max`] for graphs without edges.
pub const LAMBDA_MAX_FALLBACK: f64 = 2.0;

const POWER_MAX_ITERS: usize = 20_000;
const POWER_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

/// Samples × channels matrix with channel labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Array2<f64>,
    channel_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, channel_names: Vec<String>) -> Result<Self> {
        if channel_names.len() != values.ncols() {
            return Err(Error::invalid(format!(
                "{} channel names for {} channels",
                channel_names.len(),
                values.ncols()
            )));
        }
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value {v} at sample {r}, channel {c}"
            )));
        }
        Ok(Self {
            values,
            channel_names,
        })
    }

    /// Uses `ch0, ch1, …` as channel names.
    pub fn unnamed(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.ncols()).map(|i| format!("ch{i}")).collect();
        Self::new(values, names)
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn channels(&self) -> usize {
        self.values.ncols()
    }
}

/// Pearson correlation between channels (columns).
///
/// Constant channels correlate 0 with everything else and 1 with themselves.
pub fn pearson_correlation(features: &FeatureMatrix) -> Result<Array2<f64>> {
    let x = features.values();
    let (n, c) = x.dim();
    if n < 2 {
        return Err(Error::invalid(format!(
            "correlation needs at least 2 samples, got {n}"
        )));
    }
    let mean = x.mean_axis(Axis(0)).expect("n >= 2");
    let mut centered = x - &mean;
    let mut constant = vec![false; c];
    for (j, mut col) in centered.axis_iter_mut(Axis(1)).enumerate() {
        let first = x[[0, j]];
        if x.column(j).iter().all(|&v| v == first) {
            constant[j] = true;
            col.fill(0.0);
            continue;
        }
        let norm = col.dot(&col).sqrt();
        col /= norm;
    }
    let mut corr = centered.t().dot(&centered);
    for j in 0..c {
        for k in 0..c {
            corr[[j, k]] = if j == k {
                1.0
            } else if constant[j] || constant[k] {
                0.0
            } else {
                corr[[j, k]].clamp(-1.0, 1.0)
            };
        }
    }
    // exact symmetry regardless of summation order
    for j in 0..c {
        for k in (j + 1)..c {
            let v = corr[[j, k]];
            corr[[k, j]] = v;
        }
    }
    Ok(corr)
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Symmetric, weighted, nonnegative adjacency with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix(Array2<f64>);

impl AdjacencyMatrix {
    /// Wraps an existing matrix after checking shape, symmetry and range.
    pub fn from_matrix(values: Array2<f64>) -> Result<Self> {
        check_square(&values.view(), "adjacency")?;
        check_symmetric(&values.view(), "adjacency")?;
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0)
        {
            return Err(Error::invalid(format!(
                "adjacency entry {v} outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn nodes(&self) -> usize {
        self.0.nrows()
    }

    /// Off-diagonal edges `(i, j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.0[[i, j]] > 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// `w_ij = σ(|corr_ij|)` where that value reaches `threshold`, else 0.
/// Diagonal entries follow the same rule, so self-loops survive typical
/// thresholds (`σ(1) ≈ 0.731`).
pub fn build_adjacency(corr: &Array2<f64>, threshold: f64) -> Result<AdjacencyMatrix> {
    if !(0.0..1.0).contains(&threshold) {
        return Err(Error::invalid(format!(
            "threshold must be in [0, 1), got {threshold}"
        )));
    }
    check_square(&corr.view(), "correlation")?;
    check_symmetric(&corr.view(), "correlation")?;
    if let Some(v) = corr.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!(
            "correlation entry {v} outside [-1, 1]"
        )));
    }
    let w = corr.mapv(|r| {
        let s = sigmoid(r.abs());
        if s >= threshold {
            s
        } else {
            0.0
        }
    });
    Ok(AdjacencyMatrix(w))
}

/// Degree vector `D_ii = Σ_j w_ij` and Laplacian `L = D − W`.
pub fn degree_and_laplacian(w: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    check_square(&w.view(), "adjacency")?;
    check_symmetric(&w.view(), "adjacency")?;
    if let Some(v) = w.iter().find(|v| **v < 0.0) {
        return Err(Error::invalid(format!("negative adjacency entry {v}")));
    }
    let degree = w.sum_axis(Axis(1));
    let mut laplacian = -w;
    for (i, d) in degree.iter().enumerate() {
        laplacian[[i, i]] += d;
    }
    Ok((degree, laplacian))
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration with a
/// Rayleigh-quotient estimate. Returns [`LAMBDA_MAX_FALLBACK`] when the
/// estimate is below `1e-9` (edgeless graph).
pub fn lambda_max(l: &Array2<f64>) -> f64 {
    let n = l.nrows();
    if n == 0 {
        return LAMBDA_MAX_FALLBACK;
    }
    // A constant start vector is the Laplacian null vector; avoid it.
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_7).fract());
    v /= v.dot(&v).sqrt();
    let mut estimate = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let w = l.dot(&v);
        estimate = v.dot(&w);
        let norm = w.dot(&w).sqrt();
        if norm < 1e-300 {
            estimate = 0.0;
            break;
        }
        // residual of the eigenpair bounds the eigenvalue error; a small
        // change between iterates does not when the top eigenvalues are close
        let residual = (&w - &(&v * estimate)).dot(&(&w - &(&v * estimate))).sqrt();
        v = w / norm;
        if residual <= POWER_TOL * estimate.abs().max(1.0) {
            break;
        }
    }
    // final Rayleigh quotient on the normalized iterate
    let refined = v.dot(&l.dot(&v));
    let lambda = refined.max(estimate);
    if lambda < 1e-9 {
        LAMBDA_MAX_FALLBACK
    } else {
        lambda
    }
}

/// `L̃ = 2L/λ_max − I`.
pub fn scale_laplacian(l: &Array2<f64>, lambda_max: f64) -> Result<Array2<f64>> {
    if !(lambda_max > 0.0) || !lambda_max.is_finite() {
        return Err(Error::invalid(format!(
            "lambda_max must be positive, got {lambda_max}"
        )));
    }
    let mut scaled = l * (2.0 / lambda_max);
    for i in 0..scaled.nrows() {
        scaled[[i, i]] -= 1.0;
    }
    Ok(scaled)
}

/// Everything the graph layers need about one constructed graph.
#[derive(Debug, Clone)]
pub struct GraphContext {
    adjacency: AdjacencyMatrix,
    degree: Array1<f64>,
    laplacian: Array2<f64>,
    lambda_max: f64,
    scaled_laplacian: Array2<f64>,
}

impl GraphContext {
    pub fn new(adjacency: AdjacencyMatrix) -> Result<Self> {
        let (degree, laplacian) = degree_and_laplacian(adjacency.values())?;
        let lambda_max = lambda_max(&laplacian);
        let scaled_laplacian = scale_laplacian(&laplacian, lambda_max)?;
        Ok(Self {
            adjacency,
            degree,
            laplacian,
            lambda_max,
            scaled_laplacian,
        })
    }

    /// Correlation → sigmoid → threshold → context.
    pub fn from_features(features: &FeatureMatrix, threshold: f64) -> Result<Self> {
        let corr = pearson_correlation(features)?;
        Self::new(build_adjacency(&corr, threshold)?)
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn degree(&self) -> &Array1<f64> {
        &self.degree
    }

    pub fn laplacian(&self) -> &Array2<f64> {
        &self.laplacian
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn scaled_laplacian(&self) -> &Array2<f64> {
        &self.scaled_laplacian
    }

    pub fn nodes(&self) -> usize {
        self.adjacency.nodes()
    }
}

fn check_square(m: &ArrayView2<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn check_symmetric(m: &ArrayView2<f64>, what: &str) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[[i, j]], m[[j, i]]);
            if (a - b).abs() > SYMMETRY_TOL * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::invalid(format!(
                    "{what} is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn fm(values: Array2<f64>) -> FeatureMatrix {
        FeatureMatrix::unnamed(values).unwrap()
    }

    /// Pearson coefficient straight from its definition.
    fn pearson_direct(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn correlation_of_duplicate_and_negated_channels() {
        let x = array![[1.0, 1.0, -1.0], [2.0, 2.0, -2.0], [4.0, 4.0, -4.0], [3.0, 3.0, -3.0]];
        let c = pearson_correlation(&fm(x)).unwrap();
        assert_abs_diff_eq!(c[[0, 1]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[[0, 2]], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn correlation_of_alternating_columns() {
        let a = [1.0, 0.0, 1.0, 0.0];
        let b = [0.0, 1.0, 0.0, 1.0];
        let expected = pearson_direct(&a, &b);
        assert_abs_diff_eq!(expected, -1.0, epsilon = 1e-15);
        let x = Array2::from_shape_fn((4, 2), |(i, j)| if j == 0 { a[i] } else { b[i] });
        let c = pearson_correlation(&fm(x)).unwrap();
        assert_abs_diff_eq!(c[[0, 1]], expected, epsilon = 1e-12);
    }

    #[test]
    fn constant_channel_rule() {
        let x = array![[5.0, 1.0], [5.0, 2.0], [5.0, 7.0]];
        let c = pearson_correlation(&fm(x)).unwrap();
        assert_eq!(c[[0, 0]], 1.0);
        assert_eq!(c[[0, 1]], 0.0);
        assert_eq!(c[[1, 0]], 0.0);
    }

    #[test]
    fn correlation_needs_two_samples() {
        let err = pearson_correlation(&fm(array![[1.0, 2.0]])).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn feature_matrix_rejects_nan() {
        assert!(FeatureMatrix::unnamed(array![[1.0, f64::NAN], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn adjacency_threshold_examples() {
        let corr = array![[1.0, 0.0], [0.0, 1.0]];
        let w = build_adjacency(&corr, 0.7).unwrap();
        assert_abs_diff_eq!(w.values()[[0, 0]], 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(w.values()[[0, 0]], 0.7310586, epsilon = 1e-7);
        assert_eq!(w.values()[[0, 1]], 0.0);

        let dense = build_adjacency(&array![[1.0, 0.0], [0.0, 1.0]], 0.0).unwrap();
        assert_abs_diff_eq!(dense.values()[[0, 1]], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn adjacency_rejects_bad_threshold() {
        let corr = array![[1.0]];
        assert!(build_adjacency(&corr, 1.0).is_err());
        assert!(build_adjacency(&corr, -0.1).is_err());
        assert!(build_adjacency(&corr, 1.5).is_err());
    }

    #[test]
    fn laplacian_examples() {
        let (d, l) = degree_and_laplacian(&array![[0.0, 2.0], [2.0, 0.0]]).unwrap();
        assert_eq!(d, array![2.0, 2.0]);
        assert_eq!(l, array![[2.0, -2.0], [-2.0, 2.0]]);

        let (d, l) = degree_and_laplacian(&Array2::zeros((3, 3))).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
        assert!(l.iter().all(|v| *v == 0.0));

        assert!(degree_and_laplacian(&array![[0.0, 1.0], [0.5, 0.0]]).is_err());
    }

    #[test]
    fn lambda_max_examples() {
        assert_abs_diff_eq!(lambda_max(&array![[1.0, -1.0], [-1.0, 1.0]]), 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(lambda_max(&array![[3.0, 0.0], [0.0, 1.0]]), 3.0, epsilon = 1e-10);
        assert_eq!(lambda_max(&Array2::zeros((4, 4))), LAMBDA_MAX_FALLBACK);
    }

    #[test]
    fn scaled_laplacian_examples() {
        let s = scale_laplacian(&array![[1.0, -1.0], [-1.0, 1.0]], 2.0).unwrap();
        assert_eq!(s, array![[0.0, -1.0], [-1.0, 0.0]]);
        let s = scale_laplacian(&array![[2.0, 0.0], [0.0, 2.0]], 2.0).unwrap();
        assert_eq!(s, Array2::eye(2));
        assert!(scale_laplacian(&Array2::eye(2), 0.0).is_err());
    }

    fn random_symmetric(n: usize, seed: u64) -> Array2<f64> {
        use rand::Rng;
        let mut rng = crate::rng::rng_for(seed, "test-graph", 0);
        let mut w = Array2::zeros((n, n));
        for i in 0..n {
            for j in i..n {
                let v: f64 = if rng.random_bool(0.6) { rng.random() } else { 0.0 };
                w[[i, j]] = v;
                w[[j, i]] = v;
            }
        }
        w
    }

    #[test]
    fn lambda_max_matches_dense_eigensolver() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 9);
            let (_, l) = degree_and_laplacian(&random_symmetric(n, seed)).unwrap();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| l[[i, j]]);
            let eig = dense.symmetric_eigenvalues();
            let top = eig.iter().cloned().fold(f64::MIN, f64::max);
            let got = lambda_max(&l);
            if top < 1e-9 {
                assert_eq!(got, LAMBDA_MAX_FALLBACK);
            } else {
                assert!(((got - top) / top).abs() < 1e-8, "seed {seed}: {got} vs {top}");
            }
        }
    }

    #[test]
    fn graph_context_invariants() {
        for seed in 0..20 {
            let w = random_symmetric(6, 100 + seed);
            let ctx = GraphContext::new(AdjacencyMatrix::from_matrix(w).unwrap()).unwrap();
            for row in ctx.laplacian().rows() {
                assert!(row.sum().abs() < 1e-9);
            }
            let n = ctx.nodes();
            let s = ctx.scaled_laplacian();
            let dense = nalgebra::DMatrix::from_fn(n, n, |i, j| s[[i, j]]);
            for ev in dense.symmetric_eigenvalues().iter() {
                assert!(*ev >= -1.0 - 1e-6 && *ev <= 1.0 + 1e-6, "eigenvalue {ev}");
            }
        }
    }

    fn corr_strategy() -> impl Strategy<Value = Array2<f64>> {
        (2usize..7).prop_flat_map(|n| {
            proptest::collection::vec(-1.0f64..=1.0, n * n).prop_map(move |v| {
                let mut m = Array2::from_shape_vec((n, n), v).unwrap();
                for i in 0..n {
                    m[[i, i]] = 1.0;
                    for j in 0..i {
                        m[[i, j]] = m[[j, i]];
                    }
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn raising_threshold_never_adds_edges(corr in corr_strategy(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = build_adjacency(&corr, lo).unwrap();
            let b = build_adjacency(&corr, hi).unwrap();
            for (x, y) in a.values().iter().zip(b.values().iter()) {
                prop_assert!(!(*x == 0.0 && *y > 0.0));
            }
        }

        #[test]
        fn laplacian_rows_sum_to_zero(corr in corr_strategy(), t in 0.0f64..0.8) {
            let w = build_adjacency(&corr, t).unwrap();
            let (_, l) = degree_and_laplacian(w.values()).unwrap();
            for row in l.rows() {
                prop_assert!(row.sum().abs() < 1e-9);
            }
        }

        #[test]
        fn correlation_affine_invariant(
            data in proptest::collection::vec(-10.0f64..10.0, 24),
            scales in proptest::collection::vec(0.1f64..20.0, 3),
            shifts in proptest::collection::vec(-50.0f64..50.0, 3),
        ) {
            let x = Array2::from_shape_vec((8, 3), data).unwrap();
            let y = Array2::from_shape_fn((8, 3), |(i, j)| x[[i, j]] * scales[j] + shifts[j]);
            let cx = pearson_correlation(&fm(x)).unwrap();
            let cy = pearson_correlation(&fm(y)).unwrap();
            for (a, b) in cx.iter().zip(cy.iter()) {
                prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
            }
        }
    }
}
