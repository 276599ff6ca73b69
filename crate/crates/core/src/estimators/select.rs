use std::cmp::Ordering;

use crate::torus::{chord, WrappedModelParams};

use super::FitResult;

/// Size of one update and whether it is below tolerance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub converged: bool,
    /// Largest per-component chord distance between successive mean directions.
    pub mu_change: f64,
    /// Frobenius norm of the scatter change.
    pub sigma_change: f64,
}

pub fn check_convergence(old: &WrappedModelParams, new: &WrappedModelParams, tol: f64) -> Convergence {
    let mu_change = old
        .mu()
        .as_slice()
        .iter()
        .zip(new.mu().as_slice())
        .map(|(a, b)| chord(a - b))
        .fold(0.0, f64::max);
    let sigma_change = (old.sigma() - new.sigma()).norm();
    Convergence { converged: mu_change < tol && sigma_change < tol, mu_change, sigma_change }
}

/// Fraction of Pearson residuals below `threshold`.
pub fn small_residual_fraction(fit: &FitResult, threshold: f64) -> f64 {
    if fit.residuals.is_empty() {
        return 0.0;
    }
    fit.residuals.iter().filter(|&&d| d < threshold).count() as f64 / fit.residuals.len() as f64
}

/// Picks the root among candidate fits. Converged fits rank first. Weighted
/// fits are ranked by the smallest fraction of residuals below `threshold`,
/// then by larger mean weight; unweighted fits by larger log-likelihood.
/// Remaining ties keep the earliest candidate.
pub fn select_root(candidates: &[FitResult], threshold: f64) -> Option<usize> {
    let rank = |a: &FitResult, b: &FitResult| -> Ordering {
        b.converged.cmp(&a.converged).then_with(|| {
            if a.kind.is_weighted() {
                small_residual_fraction(a, threshold)
                    .total_cmp(&small_residual_fraction(b, threshold))
                    .then_with(|| b.mean_weight().total_cmp(&a.mean_weight()))
            } else {
                b.log_likelihood.total_cmp(&a.log_likelihood)
            }
        })
    };
    (0..candidates.len()).min_by(|&i, &j| rank(&candidates[i], &candidates[j]).then(i.cmp(&j)))
}
