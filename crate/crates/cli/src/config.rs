//! The run configuration: one TOML document with a section per command.
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use torus_wle::detection::DetectionConfig;
use torus_wle::estimators::{EstimatorKind, FitConfig};
use torus_wle::experiments::MonteCarloConfig;
use torus_wle::table::AngleUnit;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    pub unit: AngleUnit,
    /// Columns to use, by header name; all columns when empty.
    pub columns: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorConfig {
    /// Explicit smoothing grid; overrides `count`.
    pub grid: Option<Vec<f64>>,
    /// Size of the default log-spaced grid.
    pub count: usize,
    /// Smoothing value to mark in the plot.
    pub selected: Option<f64>,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        Self { grid: None, count: 15, selected: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlatTorusConfig {
    /// Winding numbers replicated in every dimension.
    pub j_min: i32,
    pub j_max: i32,
    /// Also fit the model and write the unwrapped coordinates.
    pub with_fit: bool,
}

impl Default for FlatTorusConfig {
    fn default() -> Self {
        Self { j_min: -1, j_max: 1, with_fit: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Report angles in `[-π, π)` instead of `[0, 2π)`.
    pub signed: bool,
    pub svg: bool,
    pub ellipse: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), signed: false, svg: false, ellipse: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; overrides the seeds inside `fit` and `simulate`.
    pub seed: Option<u64>,
    pub estimator: EstimatorKind,
    pub data: DataConfig,
    pub fit: FitConfig,
    pub detection: DetectionConfig,
    pub monitor: MonitorConfig,
    pub simulate: MonteCarloConfig,
    pub flat_torus: FlatTorusConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            estimator: EstimatorKind::WcemUnwrap,
            data: DataConfig::default(),
            fit: FitConfig::default(),
            detection: DetectionConfig::default(),
            monitor: MonitorConfig::default(),
            simulate: MonteCarloConfig::default(),
            flat_torus: FlatTorusConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// Pushes the master seed into the sections that carry their own.
    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.fit.seed = seed;
            self.simulate.seed = seed;
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        match &self.data.path {
            Some(p) => Ok(p),
            None => bail!("no data file given (use --data or [data] path)"),
        }
    }

    pub fn validate_fit(&self) -> Result<()> {
        self.data_path()?;
        self.fit.validate(self.estimator)?;
        let d = &self.detection;
        if !(d.alpha > 0.0 && d.alpha < 1.0) {
            bail!("detection alpha must lie in (0, 1), got {}", d.alpha);
        }
        if !(0.0..=1.0).contains(&d.weight_threshold) {
            bail!("detection weight_threshold must lie in [0, 1], got {}", d.weight_threshold);
        }
        Ok(())
    }

    pub fn validate_monitor(&self) -> Result<()> {
        self.data_path()?;
        if !self.estimator.is_weighted() {
            bail!("monitoring needs a weighted estimator, got {}", self.estimator);
        }
        self.fit.validate(EstimatorKind::Em)?;
        match &self.monitor.grid {
            Some(g) if g.is_empty() => bail!("monitoring grid is empty"),
            Some(g) if g.iter().any(|h| !(*h > 0.0 && h.is_finite())) => bail!("monitoring grid values must be positive"),
            None if self.monitor.count == 0 => bail!("monitoring grid is empty"),
            _ => Ok(()),
        }
    }

    pub fn validate_simulate(&self) -> Result<()> {
        Ok(self.simulate.validate()?)
    }

    pub fn validate_flat_torus(&self) -> Result<()> {
        self.data_path()?;
        let ft = &self.flat_torus;
        if ft.j_min > ft.j_max {
            bail!("flat_torus j_min {} exceeds j_max {}", ft.j_min, ft.j_max);
        }
        if ft.with_fit {
            self.fit.validate(self.estimator)?;
        }
        Ok(())
    }
}
