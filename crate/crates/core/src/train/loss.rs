use ndarray::Array2;

use crate::{Error, Result};

/// Mean negative log-likelihood of `targets` under row-wise log-probabilities.
pub fn nll_loss(log_probs: &Array2<f64>, targets: &[usize]) -> Result<f64> {
    check(log_probs, targets)?;
    let total: f64 = targets.iter().enumerate().map(|(i, &t)| -log_probs[[i, t]]).sum();
    Ok(total / targets.len() as f64)
}

/// Gradient of [`nll_loss`] with respect to the log-probabilities, scaled
/// by `scale`.
pub fn nll_backward(log_probs: &Array2<f64>, targets: &[usize], scale: f64) -> Result<Array2<f64>> {
    check(log_probs, targets)?;
    let mut g = Array2::zeros(log_probs.raw_dim());
    let w = -scale / targets.len() as f64;
    for (i, &t) in targets.iter().enumerate() {
        g[[i, t]] = w;
    }
    Ok(g)
}

fn check(log_probs: &Array2<f64>, targets: &[usize]) -> Result<()> {
    if targets.is_empty() || log_probs.nrows() != targets.len() {
        return Err(Error::invalid(format!(
            "{} rows of log-probabilities for {} targets",
            log_probs.nrows(),
            targets.len()
        )));
    }
    let c = log_probs.ncols();
    if let Some(t) = targets.iter().find(|&&t| t >= c) {
        return Err(Error::invalid(format!("target {t} out of range for {c} classes")));
    }
    Ok(())
}

/// `alpha · graph + (1 − alpha) · conv`.
pub fn ensemble_loss(loss_graph: f64, loss_conv: f64, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return loss_graph;
    }
    if alpha == 0.0 {
        return loss_conv;
    }
    alpha * loss_graph + (1.0 - alpha) * loss_conv
}
