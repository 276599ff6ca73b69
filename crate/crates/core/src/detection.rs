//! Outlier flags from fitted distances or weights, and their error rates
//! against a known outlier mask.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::FitResult;
use crate::kde::{chi2_quantile, UnwrappedChi2, DEFAULT_MC_SEED, DEFAULT_MC_SIZE};

/// Distribution supplying the distance cutoff.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CutoffReference {
    Chi2,
    UnwrappedChi2 { mc_size: usize, seed: u64 },
}

impl CutoffReference {
    pub fn unwrapped_default() -> Self {
        Self::UnwrappedChi2 { mc_size: DEFAULT_MC_SIZE, seed: DEFAULT_MC_SEED }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Test level; observations beyond the `1 - alpha` quantile are flagged.
    pub alpha: f64,
    /// Observations with weight below this are flagged by the weight rule.
    pub weight_threshold: f64,
    pub reference: CutoffReference,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self { alpha: 0.01, weight_threshold: 0.5, reference: CutoffReference::Chi2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetectionReport {
    pub alpha: f64,
    pub cutoff: f64,
    pub distances: Vec<f64>,
    /// Distance rule.
    pub flags: Vec<bool>,
    /// Weight rule.
    pub weight_flags: Vec<bool>,
}

impl DetectionReport {
    pub fn flagged_fraction(&self) -> f64 {
        self.flags.iter().filter(|&&f| f).count() as f64 / self.flags.len().max(1) as f64
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

/// Flags observations whose weight falls below `threshold`.
pub fn detect_by_weight(weights: &[f64], threshold: f64) -> Result<Vec<bool>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidArgument(format!("weight threshold must lie in [0, 1], got {threshold}")));
    }
    Ok(weights.iter().map(|&w| w < threshold).collect())
}

/// Flags observations whose squared distance from the fit exceeds the
/// `1 - alpha` quantile of the chosen reference.
pub fn detect(fit: &FitResult, config: &DetectionConfig) -> Result<DetectionReport> {
    check_alpha(config.alpha)?;
    let p = fit.params.dim();
    let cutoff = match config.reference {
        CutoffReference::Chi2 => chi2_quantile(1.0 - config.alpha, p)?,
        CutoffReference::UnwrappedChi2 { mc_size, seed } => {
            UnwrappedChi2::simulate(fit.params.scatter(), mc_size, seed)?.quantile(1.0 - config.alpha)?
        }
    };
    Ok(DetectionReport {
        alpha: config.alpha,
        cutoff,
        flags: fit.distances.iter().map(|&d| d > cutoff).collect(),
        weight_flags: detect_by_weight(&fit.weights, config.weight_threshold)?,
        distances: fit.distances.clone(),
    })
}

/// [`detect`] with the chi-squared cutoff.
pub fn detect_by_distance(fit: &FitResult, alpha: f64) -> Result<DetectionReport> {
    detect(fit, &DetectionConfig { alpha, ..Default::default() })
}

/// Error rates of a set of flags.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SwampingPower {
    /// Share of genuine observations that were flagged.
    pub swamping: f64,
    /// Share of outliers that were flagged; `None` without outliers.
    pub power: Option<f64>,
}

pub fn swamping_and_power(flags: &[bool], outlier_mask: &[bool]) -> Result<SwampingPower> {
    if flags.len() != outlier_mask.len() {
        return Err(Error::DimensionMismatch { expected: outlier_mask.len(), found: flags.len() });
    }
    let (mut inl, mut swamped, mut out, mut caught) = (0usize, 0usize, 0usize, 0usize);
    for (&f, &o) in flags.iter().zip(outlier_mask) {
        if o {
            out += 1;
            caught += usize::from(f);
        } else {
            inl += 1;
            swamped += usize::from(f);
        }
    }
    if inl == 0 {
        return Err(Error::InvalidArgument("swamping needs at least one genuine observation".into()));
    }
    Ok(SwampingPower {
        swamping: swamped as f64 / inl as f64,
        power: (out > 0).then(|| caught as f64 / out as f64),
    })
}
