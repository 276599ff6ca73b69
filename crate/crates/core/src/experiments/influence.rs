use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::unwrapped_scale::wrapped_normal_1d as wn;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::numeric::root_near;
use crate::raf::RafKind;

const TORUS_NODES: usize = 2048;
const SIMPSON_PANELS: usize = 2000;
// log-distance grid for the distance functional
const LOG_GRID_LO: f64 = -25.0;
const LOG_GRID_STEP: f64 = 0.02;
// kernel support in bandwidths
const KERNEL_REACH: f64 = 12.0;
const DIFF_STEP: f64 = 1e-4;
const ROOT_TOL: f64 = 1e-13;

/// Univariate data distribution `(1-ε) WN(0, σ₀²) + ε WN(m_c, s_c²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationMixture {
    pub fraction: f64,
    pub sigma: f64,
    pub contaminant_mean: f64,
    pub contaminant_sd: f64,
}

impl LocationMixture {
    /// Contaminant at `π/2` with scale `π/16`.
    pub fn new(fraction: f64, sigma: f64) -> Self {
        Self { fraction, sigma, contaminant_mean: PI / 2.0, contaminant_sd: PI / 16.0 }
    }

    /// Density of the data distribution on the circle.
    pub fn density(&self, x: f64) -> f64 {
        (1.0 - self.fraction) * wn(x, 0.0, self.sigma)
            + self.fraction * wn(x, self.contaminant_mean, self.contaminant_sd)
    }
}

/// Location functional of a weighted fit with the scale held at `σ₀`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceSetup {
    /// One of WEM, WCEM-unwrap or WCEM-dist.
    pub kind: EstimatorKind,
    pub mixture: LocationMixture,
    pub raf: RafKind,
    /// Kernel bandwidth, or the log-scale bandwidth for WCEM-dist.
    pub bandwidth: f64,
}

#[derive(Clone, Copy, Debug)]
struct Mass {
    at: f64,
    amount: f64,
}

#[derive(Clone, Copy, Debug, Default)]
struct Node {
    x: f64,
    wq: f64,
    f: f64,
    fhat: f64,
    mhat: f64,
    u: f64,
}

impl Node {
    fn delta(&self) -> f64 {
        if self.mhat > 0.0 {
            self.fhat / self.mhat - 1.0
        } else if self.fhat > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

fn normal_pdf(x: f64, sd: f64) -> f64 {
    (-0.5 * (x / sd).powi(2)).exp() / (sd * TAU.sqrt())
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// `∫_a^b φ_h(x - s) WN(s; m, v) ds` in closed form.
fn smoothed_on_interval(x: f64, m: f64, var: f64, h: f64, a: f64, b: f64) -> f64 {
    let h2 = h * h;
    let tot = var + h2;
    let sd_cond = (var * h2 / tot).sqrt();
    let radius = (6.0 * var.sqrt() / TAU).ceil() as i32 + 2;
    (-radius..=radius)
        .map(|j| {
            let mj = m + TAU * j as f64;
            let mc = (mj * h2 + x * var) / tot;
            normal_pdf(x - mj, tot.sqrt()) * (normal_cdf((b - mc) / sd_cond) - normal_cdf((a - mc) / sd_cond))
        })
        .sum()
}

/// Log-distance grids for the distance functional.
#[derive(Clone, Debug)]
struct LogGrid {
    s: Vec<f64>,
    weight: Vec<f64>,
    data: Vec<f64>,
    model: Vec<f64>,
}

/// The location functional `T(F)` and the pieces of its influence function.
#[derive(Clone, Debug)]
pub struct LocationFunctional {
    setup: InfluenceSetup,
    location: f64,
    denominator: f64,
    model_log_density: Vec<f64>,
    grid: Option<LogGrid>,
    base: Vec<Node>,
}

impl LocationFunctional {
    /// Solves the population estimating equation for `T(F)` and computes `D(F)`.
    pub fn solve(setup: InfluenceSetup) -> Result<Self> {
        if !matches!(setup.kind, EstimatorKind::Wem | EstimatorKind::WcemUnwrap | EstimatorKind::WcemDist) {
            return Err(Error::InvalidArgument(format!("no location functional for {}", setup.kind)));
        }
        let m = setup.mixture;
        if !(m.sigma > 0.0 && setup.bandwidth > 0.0 && (0.0..1.0).contains(&m.fraction)) {
            return Err(Error::InvalidArgument("invalid influence setup".into()));
        }
        setup.raf.validate()?;
        let mut me = Self { setup, location: 0.0, denominator: f64::NAN, model_log_density: Vec::new(), grid: None, base: Vec::new() };
        if setup.kind == EstimatorKind::WcemDist {
            me.model_log_density = me.log_grid_s().iter().map(|&s| me.model_log_distance_density(s)).collect();
        }
        me.location = root_near(|mu| Ok(me.equation(mu, None)), 0.0, 0.01, PI / 2.0, ROOT_TOL)?;
        me.denominator = match setup.kind {
            EstimatorKind::Wem => me.torus_denominator(),
            _ => me.numeric_denominator(),
        };
        me.grid = me.grid_for(me.location);
        me.base = me.nodes(me.location, me.grid.as_ref(), None);
        if !(me.denominator.is_finite() && me.denominator != 0.0) {
            return Err(Error::Numerical("degenerate influence denominator".into()));
        }
        Ok(me)
    }

    pub fn location(&self) -> f64 {
        self.location
    }

    pub fn denominator(&self) -> f64 {
        self.denominator
    }

    /// `-dG/dμ` at the solution by central differences.
    pub fn numeric_denominator(&self) -> f64 {
        let t = self.location;
        -(self.equation(t + DIFF_STEP, None) - self.equation(t - DIFF_STEP, None)) / (2.0 * DIFF_STEP)
    }

    fn sigma(&self) -> f64 {
        self.setup.mixture.sigma
    }

    fn in_domain(mu: f64, z: f64) -> bool {
        z > mu - PI && z <= mu + PI
    }

    fn log_grid_s(&self) -> Vec<f64> {
        let s_max = (PI / self.sigma()).powi(2).ln();
        let count = ((s_max - LOG_GRID_LO) / LOG_GRID_STEP).ceil() as usize;
        let step = (s_max - LOG_GRID_LO) / count as f64;
        (0..=count).map(|k| LOG_GRID_LO + k as f64 * step).collect()
    }

    // density of log((X - μ)²/σ²) under the unwrapped model
    fn model_log_distance_density(&self, s: f64) -> f64 {
        let r = self.sigma() * (0.5 * s).exp();
        wn(r, 0.0, self.sigma()) * r
    }

    fn log_grid(&self, mu: f64) -> LogGrid {
        let s = self.log_grid_s();
        let n = s.len();
        let step = s[1] - s[0];
        let weight = (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * step } else { step }).collect();
        let mix = self.setup.mixture;
        let data = s
            .iter()
            .map(|&si| {
                let r = self.sigma() * (0.5 * si).exp();
                0.5 * r * (mix.density(mu + r) + mix.density(mu - r))
            })
            .collect();
        LogGrid { s, weight, data, model: self.model_log_density.clone() }
    }

    fn smooth_on_log_grid(&self, grid: &LogGrid, values: &[f64], s: f64) -> f64 {
        let b = self.setup.bandwidth;
        let step = grid.s[1] - grid.s[0];
        let reach = KERNEL_REACH * b;
        let lo = (((s - reach - grid.s[0]) / step).floor().max(0.0) as usize).min(grid.s.len());
        let hi = (((s + reach - grid.s[0]) / step).ceil().max(0.0) as usize + 1).min(grid.s.len());
        (lo..hi).map(|k| grid.weight[k] * values[k] * normal_pdf(s - grid.s[k], b)).sum()
    }

    fn torus_score(&self, x: f64, mu: f64, var: f64) -> (f64, f64) {
        // (E_ω[x + 2πj - μ], Var_ω[x + 2πj - μ]) under the replica posterior
        let z = x - mu;
        let z = z - TAU * (z / TAU).round();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for j in -4..=4 {
            let v = z + TAU * j as f64;
            let w = (-0.5 * v * v / var).exp();
            s0 += w;
            s1 += w * v;
            s2 += w * v * v;
        }
        let mean = s1 / s0;
        (mean, s2 / s0 - mean * mean)
    }

    fn point(&self, mu: f64, x: f64, grid: Option<&LogGrid>, mass: Option<Mass>) -> Node {
        let mix = self.setup.mixture;
        let (s2, h) = (self.sigma().powi(2), self.setup.bandwidth);
        let f = mix.density(x);
        match self.setup.kind {
            EstimatorKind::Wem => {
                let mut fhat = (1.0 - mix.fraction) * wn(x, 0.0, (s2 + h * h).sqrt())
                    + mix.fraction * wn(x, mix.contaminant_mean, (mix.contaminant_sd.powi(2) + h * h).sqrt());
                if let Some(m) = mass {
                    fhat = (1.0 - m.amount) * fhat + m.amount * wn(x, m.at, h);
                }
                let mhat = wn(x, mu, (s2 + h * h).sqrt());
                Node { x, wq: 0.0, f, fhat, mhat, u: self.torus_score(x, mu, s2).0 / s2 }
            }
            EstimatorKind::WcemUnwrap => {
                let (a, b) = (mu - PI, mu + PI);
                let mut fhat = (1.0 - mix.fraction) * smoothed_on_interval(x, 0.0, s2, h, a, b)
                    + mix.fraction * smoothed_on_interval(x, mix.contaminant_mean, mix.contaminant_sd.powi(2), h, a, b);
                if let Some(m) = mass.filter(|m| Self::in_domain(mu, m.at)) {
                    fhat = (1.0 - m.amount) * fhat + m.amount * normal_pdf(x - m.at, h);
                }
                let mhat = normal_pdf(x - mu, (s2 + h * h).sqrt());
                Node { x, wq: 0.0, f, fhat, mhat, u: (x - mu) / s2 }
            }
            _ => {
                if x == mu {
                    return Node { x, wq: 0.0, f, fhat: 1.0, mhat: 1.0, u: 0.0 };
                }
                let grid = grid.expect("log grid for the distance functional");
                let s = ((x - mu).powi(2) / s2).ln();
                let mut fhat = self.smooth_on_log_grid(grid, &grid.data, s);
                if let Some(m) = mass.filter(|m| Self::in_domain(mu, m.at) && m.at != mu) {
                    let sz = ((m.at - mu).powi(2) / s2).ln();
                    fhat = (1.0 - m.amount) * fhat + m.amount * normal_pdf(s - sz, h);
                }
                let mhat = self.smooth_on_log_grid(grid, &grid.model, s);
                Node { x, wq: 0.0, f, fhat, mhat, u: (x - mu) / s2 }
            }
        }
    }

    fn nodes(&self, mu: f64, grid: Option<&LogGrid>, mass: Option<Mass>) -> Vec<Node> {
        if self.setup.kind == EstimatorKind::Wem {
            let step = TAU / TORUS_NODES as f64;
            return (0..TORUS_NODES)
                .map(|k| Node { wq: step, ..self.point(mu, mu - PI + k as f64 * step, grid, mass) })
                .collect();
        }
        let n = SIMPSON_PANELS;
        let step = TAU / n as f64;
        (0..=n)
            .map(|k| {
                let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                Node { wq: w * step / 3.0, ..self.point(mu, mu - PI + k as f64 * step, grid, mass) }
            })
            .collect()
    }

    fn grid_for(&self, mu: f64) -> Option<LogGrid> {
        (self.setup.kind == EstimatorKind::WcemDist).then(|| self.log_grid(mu))
    }

    /// Population estimating equation `∫ w u dF_t` at location `mu`.
    fn equation(&self, mu: f64, mass: Option<Mass>) -> f64 {
        let grid = self.grid_for(mu);
        let counts = match (self.setup.kind, mass) {
            (EstimatorKind::Wem, Some(_)) => true,
            (_, Some(m)) => Self::in_domain(mu, m.at),
            _ => false,
        };
        let mass = mass.filter(|_| counts);
        let raf = self.setup.raf;
        let body: f64 = self
            .nodes(mu, grid.as_ref(), mass)
            .iter()
            .map(|nd| nd.wq * raf.weight(nd.delta()) * nd.u * nd.f)
            .sum();
        match mass {
            Some(m) => {
                let at = self.point(mu, m.at, grid.as_ref(), Some(m));
                (1.0 - m.amount) * body + m.amount * raf.weight(at.delta()) * at.u
            }
            None => body,
        }
    }

    fn torus_denominator(&self) -> f64 {
        let mu = self.location;
        let (s2, h) = (self.sigma().powi(2), self.setup.bandwidth);
        let raf = self.setup.raf;
        self.nodes(mu, None, None)
            .iter()
            .map(|nd| {
                let d = nd.delta();
                let (mean, var) = self.torus_score(nd.x, mu, s2);
                let du = -1.0 / s2 + var / (s2 * s2);
                let u_hat = self.torus_score(nd.x, mu, s2 + h * h).0 / (s2 + h * h);
                nd.wq * nd.f * (raf.weight_deriv(d) * (d + 1.0) * u_hat * mean / s2 - raf.weight(d) * du)
            })
            .sum()
    }

    /// Influence function at `z`.
    pub fn influence(&self, z: f64) -> f64 {
        let mu = self.location;
        if self.setup.kind != EstimatorKind::Wem && !Self::in_domain(mu, z) {
            return 0.0;
        }
        let at = self.point(mu, z, self.grid.as_ref(), None);
        let (s2, h) = (self.sigma().powi(2), self.setup.bandwidth);
        let kernel = |x: f64| match self.setup.kind {
            EstimatorKind::Wem => wn(x, z, h),
            EstimatorKind::WcemUnwrap => normal_pdf(x - z, h),
            _ => {
                if x == mu || z == mu {
                    0.0
                } else {
                    normal_pdf(((x - mu).powi(2) / s2).ln() - ((z - mu).powi(2) / s2).ln(), h)
                }
            }
        };
        let raf = self.setup.raf;
        let correction: f64 = self
            .base
            .iter()
            .filter(|nd| nd.fhat > 0.0)
            .map(|nd| {
                let d = nd.delta();
                nd.wq * raf.weight_deriv(d) * (d + 1.0) * (kernel(nd.x) / nd.fhat - 1.0) * nd.u * nd.f
            })
            .sum();
        (raf.weight(at.delta()) * at.u + correction) / self.denominator
    }

    /// `[T(F_t) - T(F)] / t` for the point-mass perturbation `F_t = (1-t)F + tΔ_z`.
    pub fn finite_difference(&self, z: f64, t: f64) -> Result<f64> {
        let mass = Some(Mass { at: z, amount: t });
        let moved = root_near(|mu| Ok(self.equation(mu, mass)), self.location, 1e-3, PI / 2.0, ROOT_TOL)?;
        Ok((moved - self.location) / t)
    }
}

/// Influence function of the location functional at `z`.
pub fn influence_location(z: f64, setup: InfluenceSetup) -> Result<f64> {
    Ok(LocationFunctional::solve(setup)?.influence(z))
}

/// Influence function on a grid of points, solving for `T(F)` once.
pub fn influence_curve(zs: &[f64], setup: InfluenceSetup) -> Result<Vec<f64>> {
    let lf = LocationFunctional::solve(setup)?;
    Ok(crate::par::map_slice(zs, |&z| lf.influence(z)))
}

/// Finite-difference approximation of the influence function at `z`.
pub fn finite_difference_influence(z: f64, setup: InfluenceSetup, t: f64) -> Result<f64> {
    LocationFunctional::solve(setup)?.finite_difference(z, t)
}
