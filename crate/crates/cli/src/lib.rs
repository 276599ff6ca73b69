//! Command-line front end for `torus-wle`: fitting, detection, bandwidth
//! monitoring, simulation studies and flat-torus plot data.

pub mod commands;
pub mod config;
pub mod svg;

use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use torus_wle::estimators::EstimatorKind;
use torus_wle::raf::RafKind;
use torus_wle::table::AngleUnit;

use commands::FixtureKind;
use config::RunConfig;

/// A configuration or argument problem found before any computation.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(e: anyhow::Error) -> anyhow::Error {
    UsageError(format!("{e:#}")).into()
}

#[derive(Debug, Parser)]
#[command(name = "torus-wle", version, about = "Robust wrapped normal fits for angular data on the torus")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Delimited angle table with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Values are in degrees.
    #[arg(long, conflicts_with = "radians")]
    pub degrees: bool,
    /// Values are in radians.
    #[arg(long)]
    pub radians: bool,
    /// Columns to use, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub columns: Option<Vec<String>>,
}

#[derive(Debug, Args, Default)]
pub struct FitArgs {
    /// em, cem, wem, wcem-torus, wcem-unwrap or wcem-dist.
    #[arg(long, value_parser = parse_estimator)]
    pub estimator: Option<EstimatorKind>,
    /// Kernel bandwidth for wem, wcem-torus and wcem-unwrap.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Log-scale bandwidth for wcem-dist.
    #[arg(long)]
    pub distance_bandwidth: Option<f64>,
    /// gkl:<tau>, pwd:<lambda>, schi or identity.
    #[arg(long, value_parser = parse_raf)]
    pub raf: Option<RafKind>,
}

#[derive(Debug, Args, Default)]
pub struct OutArgs {
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report angles in [-π, π).
    #[arg(long)]
    pub signed: bool,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model, flag outliers and write the report.
    Fit {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Level of the distance cutoff.
        #[arg(long)]
        alpha: Option<f64>,
        /// Skip the tolerance ellipse output.
        #[arg(long)]
        no_ellipse: bool,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Run a Monte Carlo contamination study.
    Simulate {
        #[arg(long)]
        trials: Option<usize>,
        /// Contaminated fraction.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        dim: Option<usize>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Track weights along a grid of smoothing values.
    Monitor {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Explicit grid, comma separated.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Value to mark in the plot.
        #[arg(long)]
        selected: Option<f64>,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Replicate the data over winding numbers for flat-torus plots.
    FlatTorus {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, allow_hyphen_values = true)]
        j_min: Option<i32>,
        #[arg(long, allow_hyphen_values = true)]
        j_max: Option<i32>,
        /// Also fit and write the unwrapped coordinates.
        #[arg(long)]
        with_fit: bool,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        out: OutArgs,
    },
    /// Write a synthetic example table.
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse().map_err(|e: torus_wle::Error| e.to_string())
}

fn parse_raf(s: &str) -> Result<RafKind, String> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(n, a)| (n, Some(a)));
    let value = || -> Result<f64, String> {
        arg.ok_or_else(|| format!("{name} needs a parameter, e.g. {name}:0.5"))?
            .parse::<f64>()
            .map_err(|e| e.to_string())
    };
    let raf = match name.to_ascii_lowercase().as_str() {
        "gkl" => RafKind::Gkl { tau: value()? },
        "pwd" => RafKind::Pwd { lambda: value()? },
        "schi" => RafKind::Schi,
        "identity" => RafKind::Identity,
        _ => return Err(format!("unknown RAF '{name}'")),
    };
    raf.validate().map_err(|e| e.to_string())?;
    Ok(raf)
}

impl DataArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(p) = &self.data {
            cfg.data.path = Some(p.clone());
        }
        if self.degrees {
            cfg.data.unit = AngleUnit::Degrees;
        }
        if self.radians {
            cfg.data.unit = AngleUnit::Radians;
        }
        if let Some(c) = &self.columns {
            cfg.data.columns = c.clone();
        }
    }
}

impl FitArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(k) = self.estimator {
            cfg.estimator = k;
        }
        if let Some(h) = self.bandwidth {
            cfg.fit.bandwidth = Some(h);
        }
        if let Some(b) = self.distance_bandwidth {
            cfg.fit.distance_bandwidth = Some(b);
        }
        if let Some(r) = self.raf {
            cfg.fit.raf = r;
        }
    }
}

impl OutArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(d) = &self.out {
            cfg.output.dir = d.clone();
        }
        cfg.output.signed |= self.signed;
        cfg.output.svg |= self.svg;
    }
}

/// Builds the effective configuration: file (or defaults), then flags, then
/// the master seed.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(usage)?,
        None => RunConfig::default(),
    };
    if cli.seed.is_some() {
        cfg.seed = cli.seed;
    }
    match &cli.command {
        Command::Fit { data, fit, alpha, no_ellipse, out } => {
            data.apply(&mut cfg);
            fit.apply(&mut cfg);
            out.apply(&mut cfg);
            if let Some(a) = alpha {
                cfg.detection.alpha = *a;
            }
            cfg.output.ellipse &= !no_ellipse;
        }
        Command::Simulate { trials, epsilon, n, dim, out } => {
            out.apply(&mut cfg);
            let sim = &mut cfg.simulate;
            if let Some(t) = trials {
                sim.trials = *t;
            }
            if let Some(e) = epsilon {
                sim.scenario.contamination.fraction = *e;
            }
            if let Some(n) = n {
                sim.scenario.n = *n;
            }
            if let Some(d) = dim {
                sim.scenario.dim = *d;
            }
        }
        Command::Monitor { data, fit, grid, selected, out } => {
            data.apply(&mut cfg);
            fit.apply(&mut cfg);
            out.apply(&mut cfg);
            if grid.is_some() {
                cfg.monitor.grid = grid.clone();
            }
            if selected.is_some() {
                cfg.monitor.selected = *selected;
            }
        }
        Command::FlatTorus { data, j_min, j_max, with_fit, fit, out } => {
            data.apply(&mut cfg);
            fit.apply(&mut cfg);
            out.apply(&mut cfg);
            if let Some(j) = j_min {
                cfg.flat_torus.j_min = *j;
            }
            if let Some(j) = j_max {
                cfg.flat_torus.j_max = *j;
            }
            cfg.flat_torus.with_fit |= with_fit;
        }
        Command::Fixture { .. } | Command::Config => {}
    }
    cfg.apply_seed();
    Ok(cfg)
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::Fit { .. } => {
            cfg.validate_fit().map_err(usage)?;
            let report = commands::cmd_fit(&cfg)?;
            println!(
                "{}: {} of {} observations flagged, output in {}",
                report.estimator,
                report.detection.flagged,
                report.n,
                cfg.output.dir.display()
            );
        }
        Command::Simulate { .. } => {
            cfg.validate_simulate().map_err(usage)?;
            let trials = commands::cmd_simulate(&cfg)?;
            println!("wrote {}", trials.display());
        }
        Command::Monitor { .. } => {
            cfg.validate_monitor().map_err(usage)?;
            let result = commands::cmd_monitor(&cfg)?;
            println!("monitored {} smoothing values, output in {}", result.grid.len(), cfg.output.dir.display());
        }
        Command::FlatTorus { .. } => {
            cfg.validate_flat_torus().map_err(usage)?;
            let rows = commands::cmd_flat_torus(&cfg)?;
            println!("wrote {rows} replicated rows to {}", cfg.output.dir.display());
        }
        Command::Fixture { kind, out } => {
            commands::cmd_fixture(*kind, cfg.seed.unwrap_or(0), out)?;
            println!("wrote {}", out.display());
        }
        Command::Config => print!("{}", cfg.to_toml()?),
    }
    Ok(())
}
