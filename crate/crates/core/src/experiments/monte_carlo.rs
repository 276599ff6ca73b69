use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{quartiles, scatter_divergence, sqrt_angular_separation, Quartiles};
use super::scenario::{generate_contaminated, Scenario};
use super::seeds::{derive_seed, trial_rng};
use crate::detection::{detect_by_distance, swamping_and_power};
use crate::error::{Error, Result};
use crate::estimators::{fit, EstimatorKind, FitConfig};
use crate::par;

/// How smoothing parameters are chosen for the weighted estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SmoothingPolicy {
    /// Fixed values per estimator.
    Fixed { values: BTreeMap<EstimatorKind, f64> },
    /// Pick, per estimator, the grid value whose mean downweighting on pilot
    /// samples is closest to the contamination fraction.
    Calibrate {
        /// Multiples of the scenario's `σ` (log-scale values for the distance scheme).
        grid: Option<Vec<f64>>,
        pilot_samples: usize,
    },
}

impl Default for SmoothingPolicy {
    fn default() -> Self {
        Self::Calibrate { grid: None, pilot_samples: 3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub scenario: Scenario,
    pub trials: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorKind>,
    pub fit: FitConfig,
    pub smoothing: SmoothingPolicy,
    /// Level of the distance rule used for swamping and power.
    pub alpha: f64,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::default(),
            trials: 100,
            seed: 1,
            estimators: EstimatorKind::ALL.to_vec(),
            fit: FitConfig::default(),
            smoothing: SmoothingPolicy::default(),
            alpha: 0.01,
        }
    }
}

impl MonteCarloConfig {
    /// Checks the scenario, trial count, level and fit settings. Bandwidths are
    /// checked after calibration.
    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if self.trials == 0 || self.estimators.is_empty() {
            return Err(Error::InvalidArgument("need at least one trial and one estimator".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if let SmoothingPolicy::Calibrate { grid: Some(g), .. } = &self.smoothing {
            if g.is_empty() || g.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidArgument("calibration grid must hold positive values".into()));
            }
        }
        self.fit.validate(EstimatorKind::Em)
    }
}

/// Metrics of one estimator on one simulated sample.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub estimator: EstimatorKind,
    pub sqrt_as: f64,
    pub divergence: f64,
    pub swamping: f64,
    pub power: Option<f64>,
    pub downweighting: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
    /// Wall time, excluded from the reproducible CSV output.
    #[serde(skip)]
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub smoothing: Option<f64>,
    pub succeeded: usize,
    pub failed: usize,
    pub sqrt_as: Option<Quartiles>,
    pub divergence: Option<Quartiles>,
    pub swamping: Option<Quartiles>,
    pub power: Option<Quartiles>,
    pub downweighting: Option<Quartiles>,
    pub mean_elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub trials: usize,
    pub seed: u64,
    pub smoothing: BTreeMap<EstimatorKind, f64>,
    pub summaries: Vec<EstimatorSummary>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

impl MonteCarloReport {
    pub fn summary(&self, kind: EstimatorKind) -> Option<&EstimatorSummary> {
        self.summaries.iter().find(|s| s.estimator == kind)
    }
}

/// Default calibration grid: 12 log-spaced values, multiples of `σ` from 1/8
/// to 4 for kernel bandwidths and 0.05 to 1.5 on the log-distance scale.
pub fn default_calibration_grid(kind: EstimatorKind, sigma: f64) -> Vec<f64> {
    let (lo, hi) = if kind.uses_distance_bandwidth() { (0.05, 1.5) } else { (sigma / 8.0, 4.0 * sigma) };
    log_spaced(lo, hi, 12)
}

pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

const PILOT_STREAM_BASE: u64 = u64::MAX - 1024;

/// Chooses smoothing values per weighted estimator for `config`.
pub fn calibrate_smoothing(config: &MonteCarloConfig) -> Result<BTreeMap<EstimatorKind, f64>> {
    let weighted: Vec<EstimatorKind> = config.estimators.iter().copied().filter(|k| k.is_weighted()).collect();
    match &config.smoothing {
        SmoothingPolicy::Fixed { values } => weighted
            .iter()
            .map(|k| {
                values
                    .get(k)
                    .map(|v| (*k, *v))
                    .or_else(|| config.fit.smoothing(*k).map(|v| (*k, v)))
                    .ok_or_else(|| Error::InvalidArgument(format!("no smoothing value given for {k}")))
            })
            .collect(),
        SmoothingPolicy::Calibrate { grid, pilot_samples } => {
            let pilots = (0..(*pilot_samples).max(1))
                .map(|k| generate_contaminated(&config.scenario, &mut trial_rng(config.seed, PILOT_STREAM_BASE + k as u64)))
                .collect::<Result<Vec<_>>>()?;
            let target = config.scenario.contamination.fraction;
            let mut out = BTreeMap::new();
            for &kind in &weighted {
                let values = match grid {
                    Some(g) if kind.uses_distance_bandwidth() => g.clone(),
                    Some(g) => g.iter().map(|m| m * config.scenario.sigma).collect(),
                    None => default_calibration_grid(kind, config.scenario.sigma),
                };
                let levels = par::map_slice(&values, |&h| {
                    let mut cfg = config.fit.clone().with_smoothing(kind, h);
                    let dws: Vec<f64> = pilots
                        .iter()
                        .enumerate()
                        .filter_map(|(k, s)| {
                            cfg.seed = derive_seed(config.seed, &[PILOT_STREAM_BASE + k as u64]);
                            fit(&s.data, kind, &cfg).ok().map(|f| f.downweighting())
                        })
                        .collect();
                    (!dws.is_empty()).then(|| dws.iter().sum::<f64>() / dws.len() as f64)
                });
                let best = values
                    .iter()
                    .zip(&levels)
                    .filter_map(|(h, l)| l.map(|l| (*h, (l - target).abs())))
                    // ties go to the larger value
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.total_cmp(&a.0)))
                    .ok_or_else(|| Error::NoCandidate(format!("no calibration fit succeeded for {kind}")))?;
                log::info!("calibrated {kind}: smoothing {:.4} (|1 - w̄ - ε| = {:.4})", best.0, best.1);
                out.insert(kind, best.0);
            }
            Ok(out)
        }
    }
}

fn run_trial(config: &MonteCarloConfig, smoothing: &BTreeMap<EstimatorKind, f64>, trial: usize) -> Vec<TrialRecord> {
    let failed = |kind, msg: String| TrialRecord {
        trial,
        estimator: kind,
        sqrt_as: f64::NAN,
        divergence: f64::NAN,
        swamping: f64::NAN,
        power: None,
        downweighting: f64::NAN,
        iterations: 0,
        converged: false,
        error: Some(msg),
        elapsed_ms: 0.0,
    };
    let sample = match generate_contaminated(&config.scenario, &mut trial_rng(config.seed, trial as u64)) {
        Ok(s) => s,
        Err(e) => return config.estimators.iter().map(|&k| failed(k, e.to_string())).collect(),
    };
    config
        .estimators
        .iter()
        .enumerate()
        .map(|(idx, &kind)| {
            let mut cfg = config.fit.clone();
            if let Some(&v) = smoothing.get(&kind) {
                cfg = cfg.with_smoothing(kind, v);
            }
            cfg.seed = derive_seed(config.seed, &[trial as u64, idx as u64]);
            let start = Instant::now();
            let outcome = fit(&sample.data, kind, &cfg).and_then(|f| {
                let sqrt_as = sqrt_angular_separation(f.params.mu(), sample.truth.mu())?;
                let divergence = scatter_divergence(f.params.scatter(), sample.truth.scatter())?;
                let det = detect_by_distance(&f, config.alpha)?;
                let rates = swamping_and_power(&det.flags, &sample.outlier_mask)?;
                Ok((f, sqrt_as, divergence, rates))
            });
            let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            match outcome {
                Ok((f, sqrt_as, divergence, rates)) => TrialRecord {
                    trial,
                    estimator: kind,
                    sqrt_as,
                    divergence,
                    swamping: rates.swamping,
                    power: rates.power,
                    downweighting: f.downweighting(),
                    iterations: f.iterations,
                    converged: f.converged,
                    error: None,
                    elapsed_ms,
                },
                Err(e) => {
                    log::warn!("trial {trial}, {kind}: {e}");
                    failed(kind, e.to_string())
                }
            }
        })
        .collect()
}

/// Runs the simulation study. Each trial draws from its own stream of the
/// master seed, so results do not depend on scheduling.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    config.validate()?;
    let smoothing = calibrate_smoothing(config)?;
    let records: Vec<TrialRecord> =
        par::map_range(config.trials, |t| run_trial(config, &smoothing, t)).into_iter().flatten().collect();
    let summaries = config
        .estimators
        .iter()
        .map(|&kind| {
            let ok: Vec<&TrialRecord> = records.iter().filter(|r| r.estimator == kind && r.error.is_none()).collect();
            let col = |f: &dyn Fn(&TrialRecord) -> f64| quartiles(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let powers: Vec<f64> = ok.iter().filter_map(|r| r.power).collect();
            EstimatorSummary {
                estimator: kind,
                smoothing: smoothing.get(&kind).copied(),
                succeeded: ok.len(),
                failed: records.iter().filter(|r| r.estimator == kind && r.error.is_some()).count(),
                sqrt_as: col(&|r| r.sqrt_as),
                divergence: col(&|r| r.divergence),
                swamping: col(&|r| r.swamping),
                power: quartiles(&powers),
                downweighting: col(&|r| r.downweighting),
                mean_elapsed_ms: ok.iter().map(|r| r.elapsed_ms).sum::<f64>() / ok.len().max(1) as f64,
            }
        })
        .collect();
    Ok(MonteCarloReport { trials: config.trials, seed: config.seed, smoothing, summaries, records })
}
