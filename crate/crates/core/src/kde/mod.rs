//! Kernel density estimates on the torus, in Euclidean space and on the
//! log scale of squared distances, plus the smoothed model densities they are
//! compared against.

mod chi2;
mod distance;

pub use chi2::{chi2_density, chi2_log_density, chi2_quantile, UnwrappedChi2, DEFAULT_MC_SEED, DEFAULT_MC_SIZE, MIN_MC_SIZE};
pub use distance::{silverman_log_bandwidth, DistanceReference, LogDistanceKde, SmoothedReference};

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::LogSumExp;
use crate::par;
use crate::torus::{log_normal_density, log_wrapped_density_unchecked, AngleVector, LatticeBox, NormalGenerator, WrappedModelParams};

/// Kernel bandwidth `h`; the bandwidth matrix is `h² I`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Bandwidth(f64);

impl Bandwidth {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn variance(self) -> f64 {
        self.0 * self.0
    }
}

impl TryFrom<f64> for Bandwidth {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<Bandwidth> for f64 {
    fn from(h: Bandwidth) -> f64 {
        h.0
    }
}

/// Log of the one-dimensional wrapped normal kernel `WN(diff; 0, h²)`.
#[inline]
fn log_wn1(diff: f64, h: f64, radius: i32) -> f64 {
    let z = diff - TAU * (diff / TAU).round();
    let mut acc = LogSumExp::default();
    for j in -radius..=radius {
        let x = (z + TAU * j as f64) / h;
        acc.add(-0.5 * x * x);
    }
    acc.value() - h.ln() - 0.5 * TAU.ln()
}

#[inline]
fn log_torus_kde_unchecked(y: &[f64], data: &[AngleVector], h: f64, radius: i32) -> f64 {
    let mut acc = LogSumExp::default();
    for yk in data {
        let k: f64 = y.iter().zip(yk.as_slice()).map(|(a, b)| log_wn1(a - b, h, radius)).sum();
        acc.add(k);
    }
    acc.value() - (data.len() as f64).ln()
}

fn check_sample(data: &[AngleVector], dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("kernel estimate needs a non-empty sample".into()));
    }
    if let Some(bad) = data.iter().find(|y| y.dim() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, found: bad.dim() });
    }
    Ok(())
}

/// Log of the torus kernel density estimate with a wrapped normal kernel of
/// scatter `h² I`, truncated to the given lattice radius per dimension.
pub fn log_torus_kde(y: &AngleVector, data: &[AngleVector], h: Bandwidth, lattice: &LatticeBox) -> Result<f64> {
    check_sample(data, y.dim())?;
    Ok(log_torus_kde_unchecked(y.as_slice(), data, h.0, lattice.radius() as i32))
}

pub fn torus_kde(y: &AngleVector, data: &[AngleVector], h: Bandwidth, lattice: &LatticeBox) -> Result<f64> {
    log_torus_kde(y, data, h, lattice).map(f64::exp)
}

/// Log torus kernel density estimate evaluated at every sample point.
pub fn log_torus_kde_at_sample(data: &[AngleVector], h: Bandwidth, radius: u32) -> Result<Vec<f64>> {
    let dim = data.first().map_or(0, AngleVector::dim);
    check_sample(data, dim)?;
    Ok(par::map_slice(data, |y| log_torus_kde_unchecked(y.as_slice(), data, h.0, radius as i32)))
}

/// Log of the Gaussian product-kernel density estimate in `R^p`.
pub fn log_linear_kde(x: &[f64], sample: &[Vec<f64>], h: Bandwidth) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::InvalidArgument("kernel estimate needs a non-empty sample".into()));
    }
    if let Some(bad) = sample.iter().find(|s| s.len() != x.len()) {
        return Err(Error::DimensionMismatch { expected: x.len(), found: bad.len() });
    }
    Ok(log_linear_kde_unchecked(x, sample, h.0))
}

#[inline]
pub(crate) fn log_linear_kde_unchecked(x: &[f64], sample: &[Vec<f64>], h: f64) -> f64 {
    let p = x.len() as f64;
    let inv = 1.0 / (h * h);
    let mut acc = LogSumExp::default();
    for s in sample {
        let d2: f64 = x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum();
        acc.add(-0.5 * d2 * inv);
    }
    acc.value() - (sample.len() as f64).ln() - p * (h.ln() + 0.5 * TAU.ln())
}

pub fn linear_kde(x: &[f64], sample: &[Vec<f64>], h: Bandwidth) -> Result<f64> {
    log_linear_kde(x, sample, h).map(f64::exp)
}

/// The model convolved with the kernel: for the wrapped normal this is again
/// wrapped normal with scatter `Σ + h² I`.
pub fn smoothed_params(params: &WrappedModelParams, h: Bandwidth) -> Result<WrappedModelParams> {
    WrappedModelParams::from_spd(params.mu().clone(), params.scatter().add_diagonal(h.variance())?)
}

/// Log of the smoothed wrapped normal model `WN(y; μ, Σ + h² I)`.
pub fn log_smoothed_wn_model(y: &AngleVector, params: &WrappedModelParams, h: Bandwidth, lattice: &LatticeBox) -> Result<f64> {
    let smoothed = smoothed_params(params, h)?;
    crate::torus::log_wrapped_density_with(y.as_slice(), &smoothed, &NormalGenerator, lattice)
}

pub fn smoothed_wn_model(y: &AngleVector, params: &WrappedModelParams, h: Bandwidth, lattice: &LatticeBox) -> Result<f64> {
    log_smoothed_wn_model(y, params, h, lattice).map(f64::exp)
}

/// Log smoothed model at every sample point, given pre-smoothed parameters.
pub(crate) fn log_wn_at_sample(data: &[AngleVector], smoothed: &WrappedModelParams, lattice: &LatticeBox) -> Vec<f64> {
    par::map_slice(data, |y| log_wrapped_density_unchecked(y.as_slice(), smoothed, &NormalGenerator, lattice))
}

/// Log of the Gaussian `N(x; μ, Σ + h² I)` with `μ` read as a point of `R^p`.
pub fn log_smoothed_normal_model(x: &[f64], params: &WrappedModelParams, h: Bandwidth) -> Result<f64> {
    let smoothed = params.scatter().add_diagonal(h.variance())?;
    Ok(log_normal_density(x, params.mu().as_slice(), &smoothed))
}
