use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::chi2::{chi2_log_density, UnwrappedChi2};
use crate::error::{Error, Result};
use crate::numeric::LogSumExp;

// d² values of exactly zero are floored before taking logs
const MIN_DISTANCE: f64 = 1e-300;

/// Normal-reference bandwidth on the log scale: `0.9 min(sd, IQR/1.34) n^{-1/5}`.
pub fn silverman_log_bandwidth(d2: &[f64]) -> Result<f64> {
    let mut logs: Vec<f64> = d2.iter().map(|t| t.max(MIN_DISTANCE).ln()).collect();
    let n = logs.len();
    if n < 2 {
        return Err(Error::InvalidArgument("bandwidth rule needs at least two distances".into()));
    }
    logs.sort_by(f64::total_cmp);
    let mean = logs.iter().sum::<f64>() / n as f64;
    let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let q = |p: f64| {
        let pos = p * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        logs[lo] + (pos - lo as f64) * (logs[hi] - logs[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let b = 0.9 * spread * (n as f64).powf(-0.2);
    if b > 0.0 && b.is_finite() {
        Ok(b)
    } else {
        Err(Error::InvalidArgument("distance sample has no spread".into()))
    }
}

/// Kernel density estimate of squared distances built on the log scale and
/// transformed back, so that it vanishes at zero and integrates to one over
/// `[0, ∞)`.
#[derive(Clone, Debug)]
pub struct LogDistanceKde {
    log_points: Vec<f64>,
    bandwidth: f64,
}

impl LogDistanceKde {
    /// `bandwidth` is on the log scale; `None` applies [`silverman_log_bandwidth`].
    pub fn new(d2: &[f64], bandwidth: Option<f64>) -> Result<Self> {
        if d2.is_empty() {
            return Err(Error::InvalidArgument("distance sample is empty".into()));
        }
        if let Some(bad) = d2.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(Error::InvalidArgument(format!("squared distance {bad} is not a non-negative number")));
        }
        let bandwidth = match bandwidth {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(b) => return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {b}"))),
            None => silverman_log_bandwidth(d2)?,
        };
        Ok(Self { log_points: d2.iter().map(|t| t.max(MIN_DISTANCE).ln()).collect(), bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Log density of `log d²` at `s`.
    pub fn log_density_log_scale(&self, s: f64) -> f64 {
        let b = self.bandwidth;
        let mut acc = LogSumExp::default();
        for &x in &self.log_points {
            let u = (s - x) / b;
            acc.add(-0.5 * u * u);
        }
        acc.value() - (self.log_points.len() as f64).ln() - b.ln() - 0.5 * TAU.ln()
    }

    /// Log density of `d²` at `t`.
    pub fn log_density(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.log_density_log_scale(t.ln()) - t.ln()
    }

    pub fn density(&self, t: f64) -> f64 {
        self.log_density(t).exp()
    }
}

/// Reference distribution for squared distances under the fitted model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistanceReference {
    /// Chi-squared with `p` degrees of freedom.
    #[default]
    Chi2,
    /// Monte Carlo distances of the unwrapped model.
    UnwrappedChi2 { mc_size: usize, seed: u64 },
}

// Gaussian quadrature nodes for smoothing the chi-squared reference on the log scale.
const SMOOTH_HALF_WIDTH: f64 = 7.0;
const SMOOTH_STEP: f64 = 0.1;

#[derive(Clone, Debug)]
enum ReferenceShape {
    Chi2 { dof: usize },
    Sample(LogDistanceKde),
}

/// A reference density smoothed with the same log-scale kernel as the data,
/// so that the Pearson residual vanishes when the model holds.
#[derive(Clone, Debug)]
pub struct SmoothedReference {
    shape: ReferenceShape,
    bandwidth: f64,
}

impl SmoothedReference {
    pub fn chi2(dof: usize, bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(Self { shape: ReferenceShape::Chi2 { dof }, bandwidth })
    }

    pub fn unwrapped(reference: &UnwrappedChi2, bandwidth: f64) -> Result<Self> {
        Ok(Self { shape: ReferenceShape::Sample(reference.density_estimate(Some(bandwidth))?), bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Log density of `log d²` at `s`.
    pub fn log_density_log_scale(&self, s: f64) -> f64 {
        match &self.shape {
            ReferenceShape::Sample(kde) => kde.log_density_log_scale(s),
            ReferenceShape::Chi2 { dof } => {
                let steps = (SMOOTH_HALF_WIDTH / SMOOTH_STEP).round() as i32;
                let log_w = SMOOTH_STEP.ln() - 0.5 * TAU.ln();
                let mut acc = LogSumExp::default();
                for k in -steps..=steps {
                    let u = k as f64 * SMOOTH_STEP;
                    let sp = s - self.bandwidth * u;
                    acc.add(log_w - 0.5 * u * u + chi2_log_density(sp.exp(), *dof) + sp);
                }
                acc.value()
            }
        }
    }

    /// Log density of `d²` at `t`.
    pub fn log_density(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.log_density_log_scale(t.ln()) - t.ln()
    }
}
