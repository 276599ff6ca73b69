use std::f64::consts::TAU;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use torus_wle::detection::{detect, CutoffReference, DetectionReport};
use torus_wle::estimators::{fit, EstimatorKind, FitResult, TraceEntry};
use torus_wle::experiments::{
    default_monitor_grid, monitor_bandwidth, protein_like, rna_like, run_monte_carlo, LabelledTable,
};
use torus_wle::kde::chi2_quantile;
use torus_wle::table::AngleTable;
use torus_wle::torus::to_signed;

use crate::config::RunConfig;
use crate::svg::{Plot, Series, Style};

/// Version of the fit report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;
const ELLIPSE_POINTS: usize = 120;
const ELLIPSE_LEVEL: f64 = 0.99;

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(out.flush()?)
}

fn output_dir(cfg: &RunConfig) -> Result<&Path> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

pub fn load_table(cfg: &RunConfig) -> Result<AngleTable> {
    let path = cfg.data_path()?;
    let select = (!cfg.data.columns.is_empty()).then_some(cfg.data.columns.as_slice());
    let table = AngleTable::from_path(path, cfg.data.unit, select).with_context(|| format!("reading {}", path.display()))?;
    log::info!("read {} observations of {} angles from {}", table.len(), table.dim(), path.display());
    Ok(table)
}

fn display_angle(cfg: &RunConfig, x: f64) -> f64 {
    if cfg.output.signed {
        to_signed(x)
    } else {
        x
    }
}

#[derive(Debug, Serialize)]
pub struct DetectionSummary {
    pub alpha: f64,
    pub reference: CutoffReference,
    pub cutoff: f64,
    pub flagged: usize,
    pub flagged_fraction: f64,
    pub weight_threshold: f64,
    pub weight_flagged: usize,
}

/// The JSON fit report.
#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub estimator: EstimatorKind,
    pub n: usize,
    pub dim: usize,
    pub columns: Vec<String>,
    /// `"[0, 2pi)"` or `"[-pi, pi)"`.
    pub angle_range: &'static str,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: f64,
    pub mean_weight: f64,
    pub downweighting: f64,
    pub bandwidth: Option<f64>,
    pub distance_bandwidth: Option<f64>,
    pub lattice_radius: u32,
    pub detection: DetectionSummary,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceEntry>,
}

pub fn build_report(cfg: &RunConfig, table: &AngleTable, fit: &FitResult, det: &DetectionReport) -> FitReport {
    let sigma = fit.params.sigma();
    let p = fit.params.dim();
    FitReport {
        schema_version: REPORT_SCHEMA_VERSION,
        estimator: fit.kind,
        n: table.len(),
        dim: p,
        columns: table.columns().to_vec(),
        angle_range: if cfg.output.signed { "[-pi, pi)" } else { "[0, 2pi)" },
        mu: fit.params.mu().as_slice().iter().map(|&m| display_angle(cfg, m)).collect(),
        sigma: (0..p).map(|i| (0..p).map(|j| sigma[(i, j)]).collect()).collect(),
        iterations: fit.iterations,
        converged: fit.converged,
        log_likelihood: fit.log_likelihood,
        mean_weight: fit.mean_weight(),
        downweighting: fit.downweighting(),
        bandwidth: fit.bandwidth,
        distance_bandwidth: fit.distance_bandwidth,
        lattice_radius: fit.lattice_radius,
        detection: DetectionSummary {
            alpha: det.alpha,
            reference: cfg.detection.reference,
            cutoff: det.cutoff,
            flagged: det.flags.iter().filter(|&&f| f).count(),
            flagged_fraction: det.flagged_fraction(),
            weight_threshold: cfg.detection.weight_threshold,
            weight_flagged: det.weight_flags.iter().filter(|&&f| f).count(),
        },
        warnings: fit.warnings.clone(),
        trace: fit.trace.clone(),
    }
}

fn write_observations(path: &Path, cfg: &RunConfig, table: &AngleTable, fit: &FitResult, det: &DetectionReport) -> Result<()> {
    let mut out = csv_writer(path)?;
    let mut header = vec!["index".to_string(), "weight".into(), "residual".into(), "d2".into(), "flag".into(), "weight_flag".into()];
    header.extend(table.columns().iter().map(|c| format!("x_{c}")));
    header.extend(table.columns().iter().map(|c| format!("j_{c}")));
    out.write_record(&header)?;
    // x̂ is reported around the displayed μ so the two share a convention
    let shift: Vec<f64> =
        fit.params.mu().as_slice().iter().map(|&m| display_angle(cfg, m) - m).collect();
    for i in 0..table.len() {
        let mut row = vec![
            i.to_string(),
            fit.weights[i].to_string(),
            fit.residuals.get(i).map(f64::to_string).unwrap_or_default(),
            fit.distances[i].to_string(),
            u8::from(det.flags[i]).to_string(),
            u8::from(det.weight_flags[i]).to_string(),
        ];
        row.extend(fit.unwrapped[i].iter().zip(&shift).map(|(x, s)| (x + s).to_string()));
        row.extend(fit.windings[i].0.iter().map(i32::to_string));
        out.write_record(&row)?;
    }
    Ok(out.flush()?)
}

/// Polyline for the coordinate pair `(a, b)`.
pub type Ellipse = (usize, usize, Vec<(f64, f64)>);

/// Boundary of the projection of `{d² <= q}` onto each coordinate pair,
/// `q` the 0.99 quantile of χ²_p.
pub fn tolerance_ellipses(fit: &FitResult, centre: &[f64]) -> Result<Vec<Ellipse>> {
    let p = fit.params.dim();
    let q = chi2_quantile(ELLIPSE_LEVEL, p)?;
    let s = fit.params.sigma();
    let mut out = Vec::new();
    for a in 0..p {
        for b in a + 1..p {
            // Cholesky factor of the 2×2 marginal block
            let l11 = s[(a, a)].sqrt();
            let l21 = s[(a, b)] / l11;
            let l22 = (s[(b, b)] - l21 * l21).max(0.0).sqrt();
            let r = q.sqrt();
            let points = (0..=ELLIPSE_POINTS)
                .map(|k| {
                    let t = TAU * k as f64 / ELLIPSE_POINTS as f64;
                    let (c, sn) = (r * t.cos(), r * t.sin());
                    (centre[a] + l11 * c, centre[b] + l21 * c + l22 * sn)
                })
                .collect();
            out.push((a, b, points));
        }
    }
    Ok(out)
}

fn distance_plot(fit: &FitResult, det: &DetectionReport) -> Plot {
    let (mut kept, mut flagged) = (Vec::new(), Vec::new());
    for (i, (&d, &f)) in fit.distances.iter().zip(&det.flags).enumerate() {
        if f { &mut flagged } else { &mut kept }.push((i as f64, d));
    }
    Plot {
        title: format!("{} squared distances", fit.kind),
        x_label: "observation".into(),
        y_label: "d²".into(),
        series: vec![
            Series { points: kept, color: "black".into(), style: Style::Points },
            Series { points: flagged, color: "red".into(), style: Style::Points },
        ],
        horizontal: vec![det.cutoff],
        ..Plot::default()
    }
}

/// Fits the configured estimator and writes `report.json`,
/// `observations.csv`, optionally `ellipse.csv` and `distances.svg`.
pub fn cmd_fit(cfg: &RunConfig) -> Result<FitReport> {
    let table = load_table(cfg)?;
    let result = fit(table.rows(), cfg.estimator, &cfg.fit)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    let det = detect(&result, &cfg.detection)?;
    let dir = output_dir(cfg)?;
    let report = build_report(cfg, &table, &result, &det);
    write_json(&dir.join("report.json"), &report)?;
    write_observations(&dir.join("observations.csv"), cfg, &table, &result, &det)?;
    if cfg.output.ellipse && result.params.dim() >= 2 {
        let mut out = csv_writer(&dir.join("ellipse.csv"))?;
        out.write_record(["dim_a", "dim_b", "point", "x", "y"])?;
        for (a, b, points) in tolerance_ellipses(&result, &report.mu)? {
            for (k, (x, y)) in points.iter().enumerate() {
                out.write_record([a.to_string(), b.to_string(), k.to_string(), x.to_string(), y.to_string()])?;
            }
        }
        out.flush()?;
    }
    if cfg.output.svg {
        fs::write(dir.join("distances.svg"), distance_plot(&result, &det).render())?;
    }
    log::info!(
        "{}: {} iterations, converged {}, {:.1}% flagged",
        result.kind,
        result.iterations,
        result.converged,
        100.0 * det.flagged_fraction()
    );
    Ok(report)
}

/// Runs the Monte Carlo study and writes `trials.csv` and `summary.json`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<PathBuf> {
    let report = run_monte_carlo(&cfg.simulate)?;
    let failures = report.records.iter().filter(|r| r.error.is_some()).count();
    if failures > 0 {
        log::warn!("{failures} fits failed; see the error column of trials.csv");
    }
    let dir = output_dir(cfg)?;
    let trials = dir.join("trials.csv");
    let mut out = csv_writer(&trials)?;
    for record in &report.records {
        out.serialize(record)?;
    }
    out.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a torus_wle::experiments::MonteCarloConfig,
        #[serde(flatten)]
        report: &'a torus_wle::experiments::MonteCarloReport,
    }
    write_json(&dir.join("summary.json"), &Summary { config: &cfg.simulate, report: &report })?;
    Ok(trials)
}

/// Fits along a smoothing grid and writes `monitor.csv` (long format),
/// `downweighting.csv` and optionally `monitor.svg`.
pub fn cmd_monitor(cfg: &RunConfig) -> Result<torus_wle::experiments::MonitorResult> {
    let table = load_table(cfg)?;
    let grid = match &cfg.monitor.grid {
        Some(g) => g.clone(),
        None => default_monitor_grid(table.rows(), cfg.estimator, cfg.monitor.count)?,
    };
    let result = monitor_bandwidth(table.rows(), cfg.estimator, &grid, &cfg.fit)?;
    for (h, e) in result.grid.iter().zip(&result.errors) {
        if let Some(e) = e {
            log::warn!("smoothing {h}: {e}");
        }
    }
    let dir = output_dir(cfg)?;
    let mut long = csv_writer(&dir.join("monitor.csv"))?;
    long.write_record(["observation", "h", "weight"])?;
    for (h, weights) in result.grid.iter().zip(&result.weights) {
        for (i, w) in weights.iter().enumerate() {
            long.write_record([i.to_string(), h.to_string(), w.to_string()])?;
        }
    }
    long.flush()?;
    let mut curve = csv_writer(&dir.join("downweighting.csv"))?;
    curve.write_record(["h", "downweighting", "error"])?;
    for ((h, d), e) in result.grid.iter().zip(&result.downweighting).zip(&result.errors) {
        curve.write_record([h.to_string(), d.to_string(), e.clone().unwrap_or_default()])?;
    }
    curve.flush()?;
    if cfg.output.svg {
        let n = table.len();
        let series = (0..n)
            .map(|i| Series {
                points: result.grid.iter().zip(&result.weights).map(|(&h, w)| (h, w[i])).collect(),
                color: "steelblue".into(),
                style: Style::Line,
            })
            .collect();
        let plot = Plot {
            title: format!("{} weights along the smoothing grid", cfg.estimator),
            x_label: "smoothing".into(),
            y_label: "weight".into(),
            log_x: true,
            series,
            vertical: cfg.monitor.selected.into_iter().collect(),
            ..Plot::default()
        };
        fs::write(dir.join("monitor.svg"), plot.render())?;
    }
    Ok(result)
}

fn lattice(j_min: i32, j_max: i32, p: usize) -> Vec<Vec<i32>> {
    let mut out = vec![Vec::new()];
    for _ in 0..p {
        out = out.into_iter().flat_map(|prefix| (j_min..=j_max).map(move |j| [prefix.clone(), vec![j]].concat())).collect();
    }
    out
}

/// Writes `flat_torus.csv` with every observation shifted by `2πj` over the
/// winding grid, and with `with_fit` also `unwrapped.csv` from the fit.
pub fn cmd_flat_torus(cfg: &RunConfig) -> Result<usize> {
    let table = load_table(cfg)?;
    let p = table.dim();
    let ft = &cfg.flat_torus;
    let dir = output_dir(cfg)?;
    let mut out = csv_writer(&dir.join("flat_torus.csv"))?;
    let mut header = vec!["index".to_string()];
    header.extend(table.columns().iter().map(|c| format!("j_{c}")));
    header.extend(table.columns().iter().map(|c| format!("x_{c}")));
    out.write_record(&header)?;
    let mut rows = 0;
    for j in lattice(ft.j_min, ft.j_max, p) {
        for (i, y) in table.rows().iter().enumerate() {
            let mut row = vec![i.to_string()];
            row.extend(j.iter().map(i32::to_string));
            row.extend(y.as_slice().iter().zip(&j).map(|(&v, &k)| (display_angle(cfg, v) + TAU * k as f64).to_string()));
            out.write_record(&row)?;
            rows += 1;
        }
    }
    out.flush()?;
    if ft.with_fit {
        let result = fit(table.rows(), cfg.estimator, &cfg.fit)?;
        let mut out = csv_writer(&dir.join("unwrapped.csv"))?;
        let mut header = vec!["index".to_string(), "weight".into()];
        header.extend(table.columns().iter().map(|c| format!("x_{c}")));
        header.extend(table.columns().iter().map(|c| format!("j_{c}")));
        out.write_record(&header)?;
        for i in 0..table.len() {
            let mut row = vec![i.to_string(), result.weights[i].to_string()];
            row.extend(result.unwrapped[i].iter().map(f64::to_string));
            row.extend(result.windings[i].0.iter().map(i32::to_string));
            out.write_record(&row)?;
        }
        out.flush()?;
    }
    Ok(rows)
}

/// Writes a synthetic fixture in signed degrees with a `main_cluster` label
/// column.
pub fn write_fixture(fixture: &LabelledTable, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = csv_writer(path)?;
    let mut header = fixture.table.columns().to_vec();
    header.push("main_cluster".into());
    out.write_record(&header)?;
    for (y, &main) in fixture.table.rows().iter().zip(&fixture.main_cluster) {
        let mut row: Vec<String> = y.to_signed().iter().map(|v| format!("{:.4}", v.to_degrees())).collect();
        row.push(u8::from(main).to_string());
        out.write_record(&row)?;
    }
    Ok(out.flush()?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FixtureKind {
    /// 490 backbone (φ, ψ) pairs, 54% in a helix cluster.
    Protein,
    /// 260 seven-angle nucleotide conformations, 232 + 28.
    Rna,
}

pub fn cmd_fixture(kind: FixtureKind, seed: u64, path: &Path) -> Result<()> {
    let fixture = match kind {
        FixtureKind::Protein => protein_like(seed)?,
        FixtureKind::Rna => rna_like(seed)?,
    };
    write_fixture(&fixture, path)
}
