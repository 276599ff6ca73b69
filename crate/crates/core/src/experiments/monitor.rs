use serde::Serialize;

use super::monte_carlo::log_spaced;
use crate::error::{Error, Result};
use crate::estimators::{fit, fit_from, EstimatorKind, FitConfig};
use crate::torus::{column, mean_resultant_length, AngleVector, WrappedModelParams};

/// Weights and downweighting level of a weighted fit along a bandwidth grid.
#[derive(Clone, Debug, Serialize)]
pub struct MonitorResult {
    pub kind: EstimatorKind,
    /// Ascending smoothing values.
    pub grid: Vec<f64>,
    /// `weights[k][i]`: weight of observation `i` at `grid[k]`; NaN where the fit failed.
    pub weights: Vec<Vec<f64>>,
    /// `1 - mean weight` per grid value.
    pub downweighting: Vec<f64>,
    #[serde(skip)]
    pub fits: Vec<Option<WrappedModelParams>>,
    pub errors: Vec<Option<String>>,
}

impl MonitorResult {
    /// Index of the grid value whose downweighting is closest to `target`.
    pub fn closest_to(&self, target: f64) -> Option<usize> {
        self.downweighting
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_finite())
            .min_by(|a, b| (a.1 - target).abs().total_cmp(&(b.1 - target).abs()))
            .map(|(i, _)| i)
    }
}

/// Average marginal circular standard deviation `sqrt(-2 log ρ̂)`.
pub fn circular_scale(data: &[AngleVector]) -> Result<f64> {
    let p = data.first().map(AngleVector::dim).ok_or_else(|| Error::InvalidArgument("empty sample".into()))?;
    let mut total = 0.0;
    for d in 0..p {
        let r = mean_resultant_length(&column(data, d))?;
        total += (-2.0 * r.max(1e-300).ln()).sqrt();
    }
    Ok(total / p as f64)
}

/// Default monitoring grid with `count` log-spaced values: `[σ̂/8, 2σ̂]` for
/// kernel bandwidths, `[0.05, 1.5]` for the log-distance bandwidth.
pub fn default_monitor_grid(data: &[AngleVector], kind: EstimatorKind, count: usize) -> Result<Vec<f64>> {
    if kind.uses_distance_bandwidth() {
        return Ok(log_spaced(0.05, 1.5, count));
    }
    let s = circular_scale(data)?;
    Ok(log_spaced(s / 8.0, 2.0 * s, count))
}

/// Fits `kind` along the grid in ascending order, warm-starting each fit from
/// the previous solution.
pub fn monitor_bandwidth(data: &[AngleVector], kind: EstimatorKind, grid: &[f64], config: &FitConfig) -> Result<MonitorResult> {
    if !kind.is_weighted() {
        return Err(Error::InvalidArgument(format!("{kind} has no smoothing parameter to monitor")));
    }
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty bandwidth grid".into()));
    }
    if let Some(h) = grid.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")));
    }
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let n = data.len();
    let mut out = MonitorResult {
        kind,
        grid: grid.clone(),
        weights: Vec::new(),
        downweighting: Vec::new(),
        fits: Vec::new(),
        errors: Vec::new(),
    };
    let mut warm: Option<WrappedModelParams> = None;
    for &h in &grid {
        let cfg = config.clone().with_smoothing(kind, h);
        let outcome = match &warm {
            Some(start) => fit_from(data, kind, &cfg, start),
            None => fit(data, kind, &cfg),
        };
        match outcome {
            Ok(f) => {
                out.downweighting.push(f.downweighting());
                out.weights.push(f.weights);
                out.fits.push(Some(f.params.clone()));
                out.errors.push(None);
                warm = Some(f.params);
            }
            Err(e) => {
                log::warn!("monitoring {kind} at {h}: {e}");
                out.downweighting.push(f64::NAN);
                out.weights.push(vec![f64::NAN; n]);
                out.fits.push(None);
                out.errors.push(Some(e.to_string()));
            }
        }
    }
    Ok(out)
}
