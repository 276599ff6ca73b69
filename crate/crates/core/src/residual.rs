//! Pearson residuals `δ = f̂ / m̂ - 1`, computed from log densities.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::kde::{
    log_linear_kde, log_smoothed_normal_model, log_smoothed_wn_model, log_torus_kde, Bandwidth, LogDistanceKde,
    SmoothedReference, UnwrappedChi2,
};
use crate::torus::{AngleVector, LatticeBox, WrappedModelParams, MAX_DIM};

/// `exp(log_f - log_m) - 1`, with `f = 0` giving `-1` and `m = 0 < f` giving `+∞`.
#[inline]
pub fn pearson_from_logs(log_f: f64, log_m: f64) -> f64 {
    if log_f == f64::NEG_INFINITY {
        -1.0
    } else if log_m == f64::NEG_INFINITY {
        f64::INFINITY
    } else {
        (log_f - log_m).exp_m1()
    }
}

/// Residual of the torus kernel estimate against the smoothed wrapped model.
pub fn residual_torus(
    y: &AngleVector,
    data: &[AngleVector],
    params: &WrappedModelParams,
    h: Bandwidth,
    lattice: &LatticeBox,
) -> Result<f64> {
    let log_f = log_torus_kde(y, data, h, lattice)?;
    let log_m = log_smoothed_wn_model(y, params, h, lattice)?;
    Ok(pearson_from_logs(log_f, log_m))
}

/// Smoothed model used against the Euclidean kernel estimate of unwrapped data.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnwrappedModelForm {
    /// `N(μ, Σ + H)` on all of `R^p`.
    #[default]
    Gaussian,
    /// `N(μ, Σ + H)` restricted to `μ + (-π, π]^p` and renormalized.
    Truncated,
}

/// Draws behind the box mass of the truncated form when `p > 1`.
const BOX_MASS_DRAWS: usize = 20_000;
const BOX_MASS_SEED: u64 = 0x6a09_e667_f3bc_c909;

/// Probability that `N(0, S)` falls in `(-π, π]^p`: closed form for `p = 1`,
/// seeded Monte Carlo otherwise.
pub fn normal_box_mass(scatter: &crate::torus::Spd) -> f64 {
    let p = scatter.dim();
    if p == 1 {
        let s = scatter.matrix()[(0, 0)].sqrt();
        return erf(PI / (s * std::f64::consts::SQRT_2));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOX_MASS_SEED);
    let (mut e, mut x) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
    let inside = (0..BOX_MASS_DRAWS)
        .filter(|_| {
            for v in e.iter_mut().take(p) {
                *v = StandardNormal.sample(&mut rng);
            }
            scatter.apply_lower(&e[..p], &mut x[..p]);
            x[..p].iter().all(|v| v.abs() <= PI)
        })
        .count();
    inside as f64 / BOX_MASS_DRAWS as f64
}

/// Residual of the Euclidean kernel estimate of unwrapped data at `x`.
pub fn residual_unwrapped(
    x: &[f64],
    unwrapped_data: &[Vec<f64>],
    params: &WrappedModelParams,
    h: Bandwidth,
    form: UnwrappedModelForm,
) -> Result<f64> {
    if x.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: x.len() });
    }
    let log_f = log_linear_kde(x, unwrapped_data, h)?;
    let mut log_m = log_smoothed_normal_model(x, params, h)?;
    if form == UnwrappedModelForm::Truncated {
        let inside = x.iter().zip(params.mu().as_slice()).all(|(a, m)| (a - m) > -PI && (a - m) <= PI);
        if !inside {
            log_m = f64::NEG_INFINITY;
        } else {
            let smoothed = params.scatter().add_diagonal(h.variance())?;
            log_m -= normal_box_mass(&smoothed).ln();
        }
    }
    Ok(pearson_from_logs(log_f, log_m))
}

/// Residual of the log-scale kernel estimate of squared distances against the
/// equally smoothed chi-squared (or unwrapped chi-squared) reference.
pub fn residual_distance(
    d2: f64,
    d2_sample: &[f64],
    dof: usize,
    bandwidth: Option<f64>,
    unwrapped: Option<&UnwrappedChi2>,
) -> Result<f64> {
    let kde = LogDistanceKde::new(d2_sample, bandwidth)?;
    let reference = match unwrapped {
        None => SmoothedReference::chi2(dof, kde.bandwidth())?,
        Some(u) => SmoothedReference::unwrapped(u, kde.bandwidth())?,
    };
    Ok(distance_residual_with(d2, &kde, &reference))
}

#[inline]
pub(crate) fn distance_residual_with(d2: f64, kde: &LogDistanceKde, reference: &SmoothedReference) -> f64 {
    // both densities carry the same 1/d² Jacobian, so compare on the log scale
    let s = d2.max(1e-300).ln();
    pearson_from_logs(kde.log_density_log_scale(s), reference.log_density_log_scale(s))
}
