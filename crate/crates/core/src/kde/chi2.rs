use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use super::distance::LogDistanceKde;
use crate::error::{Error, Result};
use crate::torus::{to_signed, unwrapped_distance_bound, Spd, MAX_DIM};

/// Draws used for the unwrapped distance reference unless overridden.
pub const DEFAULT_MC_SIZE: usize = 100_000;
/// Smallest accepted Monte Carlo size for the unwrapped distance reference.
pub const MIN_MC_SIZE: usize = 1_000;
/// Seed of the unwrapped distance reference unless overridden.
pub const DEFAULT_MC_SEED: u64 = 0x2b99_2ddf_a232_49d6;

/// Log density of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_log_density(t: f64, dof: usize) -> f64 {
    if !(t > 0.0) {
        return if t == 0.0 && dof == 2 { -std::f64::consts::LN_2 } else if t == 0.0 && dof == 1 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    let k = 0.5 * dof as f64;
    (k - 1.0) * t.ln() - 0.5 * t - k * std::f64::consts::LN_2 - ln_gamma(k)
}

pub fn chi2_density(t: f64, dof: usize) -> f64 {
    chi2_log_density(t, dof).exp()
}

/// Quantile of the chi-squared distribution at probability `q ∈ (0, 1)`.
pub fn chi2_quantile(q: f64, dof: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level must lie in (0, 1), got {q}")));
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(dist.inverse_cdf(q))
}

/// Monte Carlo reference for squared Mahalanobis distances of unwrapped
/// coordinates, `zᵀ Σ⁻¹ z` with `z` the draw of `N(0, Σ)` reduced to `(-π, π]^p`.
#[derive(Clone, Debug)]
pub struct UnwrappedChi2 {
    sorted: Vec<f64>,
    support_bound: f64,
    seed: u64,
}

impl UnwrappedChi2 {
    pub fn simulate(scatter: &Spd, mc_size: usize, seed: u64) -> Result<Self> {
        if mc_size < MIN_MC_SIZE {
            return Err(Error::InvalidArgument(format!(
                "unwrapped distance reference needs at least {MIN_MC_SIZE} draws, got {mc_size}"
            )));
        }
        let p = scatter.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut e, mut x) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
        let mut sorted: Vec<f64> = (0..mc_size)
            .map(|_| {
                for v in e.iter_mut().take(p) {
                    *v = StandardNormal.sample(&mut rng);
                }
                scatter.apply_lower(&e[..p], &mut x[..p]);
                for v in x.iter_mut().take(p) {
                    *v = to_signed(*v);
                }
                scatter.mahalanobis_sq(&x[..p])
            })
            .collect();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { sorted, support_bound: unwrapped_distance_bound(scatter), seed })
    }

    /// Reference built from pre-drawn standard normal vectors (`p` values per
    /// draw), so successive scatters share common random numbers.
    pub(crate) fn from_standard_draws(scatter: &Spd, draws: &[f64], seed: u64) -> Self {
        let p = scatter.dim();
        let mut x = [0.0; MAX_DIM];
        let mut sorted: Vec<f64> = draws
            .chunks_exact(p)
            .map(|e| {
                scatter.apply_lower(e, &mut x[..p]);
                for v in x.iter_mut().take(p) {
                    *v = to_signed(*v);
                }
                scatter.mahalanobis_sq(&x[..p])
            })
            .collect();
        sorted.sort_by(f64::total_cmp);
        Self { sorted, support_bound: unwrapped_distance_bound(scatter), seed }
    }

    /// Sorted Monte Carlo draws.
    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max(&self) -> f64 {
        *self.sorted.last().expect("non-empty by construction")
    }

    /// Largest attainable value, reached at a corner of `(-π, π]^p`.
    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    /// Empirical quantile (linear interpolation between order statistics).
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1], got {q}")));
        }
        let pos = q * (self.sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(self.sorted.len() - 1);
        Ok(self.sorted[lo] + (pos - lo as f64) * (self.sorted[hi] - self.sorted[lo]))
    }

    /// Log-scale kernel estimate of the reference density.
    pub fn density_estimate(&self, bandwidth: Option<f64>) -> Result<LogDistanceKde> {
        LogDistanceKde::new(&self.sorted, bandwidth)
    }
}
