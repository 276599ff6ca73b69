use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};
use crate::numeric::adaptive_simpson;

/// One-dimensional wrapped normal density `WN(x; mean, sd²)`.
pub fn wrapped_normal_1d(x: f64, mean: f64, sd: f64) -> f64 {
    let z = x - mean;
    let z = z - TAU * (z / TAU).round();
    let radius = (6.0 * sd / TAU).ceil() as i32 + 1;
    (-radius..=radius)
        .map(|j| {
            let v = (z + TAU * j as f64) / sd;
            (-0.5 * v * v).exp()
        })
        .sum::<f64>()
        / (sd * TAU.sqrt())
}

/// Standard deviation of the unwrapped model: `sqrt(∫_{-π}^{π} x² WN(x; 0, σ₀²) dx)`.
/// This is the scale a classification EM fit converges to on wrapped normal
/// data with scale `σ₀`.
pub fn sigma_unwrapped(sigma0: f64) -> Result<f64> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma0}")));
    }
    let f = |x: f64| x * x * wrapped_normal_1d(x, 0.0, sigma0);
    // split at 0 so both halves are smooth and monotone-ish
    let v = adaptive_simpson(&f, -PI, 0.0, 1e-13)? + adaptive_simpson(&f, 0.0, PI, 1e-13)?;
    Ok(v.sqrt())
}
