use std::f64::consts::{PI, TAU};
use std::fmt::Debug;

use nalgebra::DMatrix;

use super::angle::AngleVector;
use super::lattice::LatticeBox;
use super::linalg::Spd;
use super::MAX_DIM;
use crate::error::{Error, Result};
use crate::numeric::LogSumExp;

/// Density generator `h` of an elliptically symmetric family, with density
/// `c_p |Σ|^{-1/2} h(d²)` in terms of the squared Mahalanobis distance `d²`.
pub trait EllipticalGenerator: Debug + Send + Sync {
    fn log_h(&self, t: f64) -> f64;

    /// The ratio `h'(t) / h(t)`.
    fn score_ratio(&self, t: f64) -> f64;

    /// `log c_p` for dimension `p`.
    fn log_normalizer(&self, dim: usize) -> f64;

    fn h(&self, t: f64) -> f64 {
        self.log_h(t).exp()
    }

    fn h_prime(&self, t: f64) -> f64 {
        self.score_ratio(t) * self.h(t)
    }
}

/// The multivariate normal generator `h(t) = exp(-t/2)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct NormalGenerator;

impl EllipticalGenerator for NormalGenerator {
    #[inline]
    fn log_h(&self, t: f64) -> f64 {
        -0.5 * t
    }

    #[inline]
    fn score_ratio(&self, _t: f64) -> f64 {
        -0.5
    }

    fn log_normalizer(&self, dim: usize) -> f64 {
        -0.5 * dim as f64 * TAU.ln()
    }
}

/// Location on the torus and scatter of a wrapped elliptical model.
#[derive(Clone, Debug, PartialEq)]
pub struct WrappedModelParams {
    mu: AngleVector,
    scatter: Spd,
}

impl WrappedModelParams {
    pub fn new(mu: AngleVector, sigma: DMatrix<f64>) -> Result<Self> {
        Self::from_spd(mu, Spd::new(sigma)?)
    }

    pub fn from_spd(mu: AngleVector, scatter: Spd) -> Result<Self> {
        if mu.dim() != scatter.dim() {
            return Err(Error::DimensionMismatch { expected: scatter.dim(), found: mu.dim() });
        }
        Ok(Self { mu, scatter })
    }

    /// Isotropic model `σ² I` centred at `mu`.
    pub fn isotropic(mu: AngleVector, sigma: f64) -> Result<Self> {
        let p = mu.dim();
        Self::new(mu, DMatrix::identity(p, p) * (sigma * sigma))
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn mu(&self) -> &AngleVector {
        &self.mu
    }

    pub fn scatter(&self) -> &Spd {
        &self.scatter
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.scatter.matrix()
    }

    /// Default lattice box from the 4-SD adequacy rule, capped at `max_radius`.
    pub fn adequate_box(&self, max_radius: u32) -> Result<LatticeBox> {
        let j = LatticeBox::adequate_radius(self.mu.as_slice(), &self.scatter.marginal_sd());
        LatticeBox::new(j.min(max_radius.max(1)), self.dim())
    }
}

/// Splits `y - μ` into a representative `z ∈ [-π, π]^p` and the integer shift
/// `k` with `y + 2πk - μ = z`.
#[inline]
pub(crate) fn center(y: &[f64], mu: &[f64], z: &mut [f64], shift: &mut [i32]) {
    for d in 0..y.len() {
        let diff = y[d] - mu[d];
        let k = -(diff / TAU).round();
        shift[d] = k as i32;
        z[d] = diff + TAU * k;
    }
}

/// Calls `visit(j, d²)` for each lattice point, where `d²` is the squared
/// Mahalanobis distance of the replica `y + 2π(k + j)` from `μ`. The lattice is
/// centred on the replica of `y` nearest `μ` (shift `k`), which is returned.
#[inline]
pub(crate) fn for_each_replica<F: FnMut(&[i32], f64)>(
    y: &[f64],
    params: &WrappedModelParams,
    lattice: &LatticeBox,
    mut visit: F,
) -> [i32; MAX_DIM] {
    let p = y.len();
    let mut z = [0.0; MAX_DIM];
    let mut shift = [0i32; MAX_DIM];
    center(y, params.mu.as_slice(), &mut z[..p], &mut shift[..p]);
    let mut v = [0.0; MAX_DIM];
    for j in lattice.iter() {
        for d in 0..p {
            v[d] = z[d] + TAU * j[d] as f64;
        }
        visit(j, params.scatter.mahalanobis_sq(&v[..p]));
    }
    shift
}

fn check_dims(y: &[f64], params: &WrappedModelParams, lattice: &LatticeBox) -> Result<()> {
    if y.len() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: y.len() });
    }
    if lattice.dim() != params.dim() {
        return Err(Error::DimensionMismatch { expected: params.dim(), found: lattice.dim() });
    }
    Ok(())
}

/// Log of the truncated wrapped density for an arbitrary generator.
pub fn log_wrapped_density_with(
    y: &[f64],
    params: &WrappedModelParams,
    generator: &dyn EllipticalGenerator,
    lattice: &LatticeBox,
) -> Result<f64> {
    check_dims(y, params, lattice)?;
    Ok(log_wrapped_density_unchecked(y, params, generator, lattice))
}

#[inline]
pub(crate) fn log_wrapped_density_unchecked(
    y: &[f64],
    params: &WrappedModelParams,
    generator: &dyn EllipticalGenerator,
    lattice: &LatticeBox,
) -> f64 {
    let mut acc = LogSumExp::default();
    for_each_replica(y, params, lattice, |_, d2| acc.add(generator.log_h(d2)));
    generator.log_normalizer(params.dim()) - 0.5 * params.scatter.log_det() + acc.value()
}

/// Log wrapped normal density.
pub fn log_wrapped_density(y: &AngleVector, params: &WrappedModelParams, lattice: &LatticeBox) -> Result<f64> {
    log_wrapped_density_with(y.as_slice(), params, &NormalGenerator, lattice)
}

/// Wrapped normal density.
pub fn wrapped_density(y: &AngleVector, params: &WrappedModelParams, lattice: &LatticeBox) -> Result<f64> {
    log_wrapped_density(y, params, lattice).map(f64::exp)
}

/// Wrapped normal log-likelihood of a sample.
pub fn log_likelihood(data: &[AngleVector], params: &WrappedModelParams, lattice: &LatticeBox) -> Result<f64> {
    let mut total = 0.0;
    for y in data {
        let l = log_wrapped_density(y, params, lattice)?;
        if l == f64::NEG_INFINITY {
            return Err(Error::DensityUnderflow);
        }
        total += l;
    }
    Ok(total)
}

/// Log density of the (unwrapped) multivariate normal `N(μ, Σ)` at `x`, with
/// `μ` taken literally as a point of `R^p`.
pub fn log_normal_density(x: &[f64], mu: &[f64], scatter: &Spd) -> f64 {
    let p = x.len();
    let mut v = [0.0; MAX_DIM];
    for d in 0..p {
        v[d] = x[d] - mu[d];
    }
    NormalGenerator.log_normalizer(p) - 0.5 * scatter.log_det() - 0.5 * scatter.mahalanobis_sq(&v[..p])
}

/// Squared Mahalanobis distance of an unwrapped point from `μ`.
pub fn unwrapped_distance_sq(x: &[f64], params: &WrappedModelParams) -> f64 {
    let p = x.len();
    let mut v = [0.0; MAX_DIM];
    for d in 0..p {
        v[d] = x[d] - params.mu[d];
    }
    params.scatter.mahalanobis_sq(&v[..p])
}

/// Largest value of `zᵀ Σ⁻¹ z` over the box `(-π, π]^p`, attained at a vertex.
pub fn unwrapped_distance_bound(scatter: &Spd) -> f64 {
    let p = scatter.dim();
    let mut v = [0.0; MAX_DIM];
    (0u32..1 << p)
        .map(|mask| {
            for d in 0..p {
                v[d] = if mask >> d & 1 == 1 { PI } else { -PI };
            }
            scatter.mahalanobis_sq(&v[..p])
        })
        .fold(0.0, f64::max)
}
