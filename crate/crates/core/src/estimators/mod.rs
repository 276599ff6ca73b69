//! EM and classification EM fits of the wrapped normal model, and their
//! weighted counterparts in which each observation's contribution is scaled by
//! a weight computed from its Pearson residual.

mod estep;
mod init;
mod iterate;
mod select;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use estep::{classify, posterior_lattice_weights};
pub use init::{default_subsample_size, initialize, moment_start};
pub use select::{check_convergence, select_root, small_residual_fraction, Convergence};

use crate::error::{Error, Result};
use crate::kde::DistanceReference;
use crate::par;
use crate::raf::RafKind;
use crate::torus::{AngleVector, EllipticalGenerator, LatticeVector, NormalGenerator, WrappedModelParams};

/// The six fitting procedures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Maximum likelihood through EM over the latent winding numbers.
    Em,
    /// Classification EM: each observation is assigned its most probable winding.
    Cem,
    /// Weighted EM, residuals from the torus kernel estimate.
    Wem,
    /// Weighted CEM, residuals from the torus kernel estimate.
    WcemTorus,
    /// Weighted CEM, residuals from a Euclidean kernel estimate of unwrapped data.
    WcemUnwrap,
    /// Weighted CEM, residuals from the distribution of squared distances.
    WcemDist,
}

impl EstimatorKind {
    pub const ALL: [Self; 6] = [Self::Em, Self::Cem, Self::Wem, Self::WcemTorus, Self::WcemUnwrap, Self::WcemDist];
    pub const ROBUST: [Self; 4] = [Self::Wem, Self::WcemTorus, Self::WcemUnwrap, Self::WcemDist];

    pub fn name(self) -> &'static str {
        match self {
            Self::Em => "em",
            Self::Cem => "cem",
            Self::Wem => "wem",
            Self::WcemTorus => "wcem-torus",
            Self::WcemUnwrap => "wcem-unwrap",
            Self::WcemDist => "wcem-dist",
        }
    }

    pub fn is_weighted(self) -> bool {
        !matches!(self, Self::Em | Self::Cem)
    }

    pub fn is_classification(self) -> bool {
        !matches!(self, Self::Em | Self::Wem)
    }

    /// Whether the smoothing parameter is the log-scale distance bandwidth.
    pub fn uses_distance_bandwidth(self) -> bool {
        self == Self::WcemDist
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator '{s}'")))
    }
}

/// Tuning of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub raf: RafKind,
    /// Kernel bandwidth `h` for the torus and unwrapped residuals.
    pub bandwidth: Option<f64>,
    /// Log-scale bandwidth for the distance residual; `None` uses a
    /// normal-reference rule at every iteration.
    pub distance_bandwidth: Option<f64>,
    pub distance_reference: DistanceReference,
    /// Lattice radius `J`; `None` picks it from the marginal spread of the data.
    pub lattice_radius: Option<u32>,
    pub tol: f64,
    pub max_iter: usize,
    pub n_subsamples: usize,
    /// Defaults to `p + p(p+1)/2 + 5`.
    pub subsample_size: Option<usize>,
    /// Relative ridge added as `ridge * trace(Σ)/p` when a scatter is singular.
    pub ridge: f64,
    /// Residual threshold used to rank candidate roots.
    pub root_threshold: f64,
    /// Seed for subsampling.
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            raf: RafKind::default(),
            bandwidth: None,
            distance_bandwidth: None,
            distance_reference: DistanceReference::Chi2,
            lattice_radius: None,
            tol: 1e-6,
            max_iter: 500,
            n_subsamples: 20,
            subsample_size: None,
            ridge: 1e-8,
            root_threshold: -0.5,
            seed: 0,
        }
    }
}

impl FitConfig {
    /// Sets the smoothing parameter relevant to `kind`.
    pub fn with_smoothing(mut self, kind: EstimatorKind, value: f64) -> Self {
        if kind.uses_distance_bandwidth() {
            self.distance_bandwidth = Some(value);
        } else {
            self.bandwidth = Some(value);
        }
        self
    }

    /// The smoothing parameter relevant to `kind`, if set.
    pub fn smoothing(&self, kind: EstimatorKind) -> Option<f64> {
        if kind.uses_distance_bandwidth() {
            self.distance_bandwidth
        } else {
            self.bandwidth
        }
    }

    pub fn validate(&self, kind: EstimatorKind) -> Result<()> {
        self.raf.validate()?;
        let bad = |what: &str| Err(Error::InvalidArgument(what.to_string()));
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        if self.n_subsamples == 0 {
            return bad("n_subsamples must be positive");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be a non-negative number");
        }
        if matches!(kind, EstimatorKind::Wem | EstimatorKind::WcemTorus | EstimatorKind::WcemUnwrap) {
            match self.bandwidth {
                Some(h) if h > 0.0 && h.is_finite() => {}
                Some(h) => return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {h}"))),
                None => return Err(Error::InvalidArgument(format!("estimator {kind} needs a bandwidth"))),
            }
        }
        if let Some(b) = self.distance_bandwidth {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidArgument(format!("distance bandwidth must be positive, got {b}")));
            }
        }
        Ok(())
    }
}

/// One iteration of a fit.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceEntry {
    pub iteration: usize,
    pub mu_change: f64,
    pub sigma_change: f64,
    pub mean_weight: f64,
    /// Wrapped log-likelihood at the parameters entering the iteration.
    pub log_likelihood: f64,
    pub ridge_applied: bool,
}

/// Outcome of a fit, with per-observation diagnostics at the final parameters.
#[derive(Clone, Debug)]
pub struct FitResult {
    pub kind: EstimatorKind,
    pub params: WrappedModelParams,
    pub weights: Vec<f64>,
    /// Pearson residuals; empty for unweighted fits.
    pub residuals: Vec<f64>,
    /// Unwrapped coordinates `y + 2πĵ` of the most probable replica.
    pub unwrapped: Vec<Vec<f64>>,
    pub windings: Vec<LatticeVector>,
    /// Squared Mahalanobis distances of the unwrapped coordinates.
    pub distances: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
    pub lattice_radius: u32,
    pub bandwidth: Option<f64>,
    pub distance_bandwidth: Option<f64>,
}

impl FitResult {
    pub fn mean_weight(&self) -> f64 {
        if self.weights.is_empty() {
            1.0
        } else {
            self.weights.iter().sum::<f64>() / self.weights.len() as f64
        }
    }

    /// Empirical downweighting level `1 - mean weight`.
    pub fn downweighting(&self) -> f64 {
        1.0 - self.mean_weight()
    }
}

/// Fits `kind` from multiple subsample starts and returns the selected root.
pub fn fit(data: &[AngleVector], kind: EstimatorKind, config: &FitConfig) -> Result<FitResult> {
    fit_with_generator(data, kind, config, &NormalGenerator)
}

/// [`fit`] with an arbitrary elliptical generator in the E- and M-steps. The
/// smoothed models behind the residuals remain normal.
pub fn fit_with_generator(
    data: &[AngleVector],
    kind: EstimatorKind,
    config: &FitConfig,
    generator: &dyn EllipticalGenerator,
) -> Result<FitResult> {
    let ctx = iterate::FitContext::new(data, kind, config, generator)?;
    let p = ctx.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let m = config.subsample_size.unwrap_or_else(|| default_subsample_size(p));
    let starts = initialize(data, config.n_subsamples, m, config.ridge, &mut rng)?;
    let outcomes = par::map_slice(&starts, |s| ctx.run(s.clone()));
    let mut failures = Vec::new();
    let mut fits = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(f) => fits.push(f),
            Err(e) => failures.push(format!("start {i}: {e}")),
        }
    }
    let best = select_root(&fits, config.root_threshold).ok_or_else(|| Error::NoCandidate(failures.join("; ")))?;
    let mut chosen = fits.swap_remove(best);
    if !failures.is_empty() {
        chosen.warnings.push(format!("{} of {} starts failed", failures.len(), starts.len()));
    }
    Ok(chosen)
}

/// Runs a single fit from the given starting parameters.
pub fn fit_from(
    data: &[AngleVector],
    kind: EstimatorKind,
    config: &FitConfig,
    start: &WrappedModelParams,
) -> Result<FitResult> {
    iterate::FitContext::new(data, kind, config, &NormalGenerator)?.run(start.clone())
}

/// One update of `kind` from `params`, returning the next iterate. Useful for
/// checking fixed points.
pub fn single_update(
    data: &[AngleVector],
    kind: EstimatorKind,
    config: &FitConfig,
    params: &WrappedModelParams,
) -> Result<WrappedModelParams> {
    let ctx = iterate::FitContext::new(data, kind, config, &NormalGenerator)?;
    ctx.step(params, 1).map(|(next, _)| next)
}

pub fn em_fit(data: &[AngleVector], config: &FitConfig) -> Result<FitResult> {
    fit(data, EstimatorKind::Em, config)
}

pub fn cem_fit(data: &[AngleVector], config: &FitConfig) -> Result<FitResult> {
    fit(data, EstimatorKind::Cem, config)
}

pub fn wem_fit(data: &[AngleVector], config: &FitConfig) -> Result<FitResult> {
    fit(data, EstimatorKind::Wem, config)
}

/// Weighted CEM with the residual scheme given by `kind`.
pub fn wcem_fit(data: &[AngleVector], kind: EstimatorKind, config: &FitConfig) -> Result<FitResult> {
    if !(kind.is_weighted() && kind.is_classification()) {
        return Err(Error::InvalidArgument(format!("{kind} is not a weighted CEM scheme")));
    }
    fit(data, kind, config)
}
