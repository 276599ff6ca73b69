use serde::Serialize;

use crate::error::{Error, Result};
use crate::torus::{AngleVector, Spd};

pub use crate::torus::scatter_divergence;

/// Root mean angular separation `sqrt(mean_d (1 - cos(μ̂_d - μ_d)))`.
pub fn sqrt_angular_separation(estimate: &AngleVector, truth: &AngleVector) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), found: estimate.dim() });
    }
    let p = truth.dim() as f64;
    let s: f64 = estimate.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| 1.0 - (a - b).cos()).sum();
    Ok((s / p).max(0.0).sqrt())
}

/// Divergence of an estimated scatter from the truth, see [`scatter_divergence`].
pub fn scatter_error(estimate: &Spd, truth: &Spd) -> Result<f64> {
    scatter_divergence(estimate, truth)
}

/// First quartile, median and third quartile.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quartiles with linear interpolation between order statistics; NaNs are
/// ignored. Returns `None` for an empty sample.
pub fn quartiles(values: &[f64]) -> Option<Quartiles> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(v.len() - 1);
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Some(Quartiles { q1: q(0.25), median: q(0.5), q3: q(0.75) })
}
