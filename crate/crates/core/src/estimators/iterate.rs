use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::estep::{classify_one, Classified};
use super::select::check_convergence;
use super::{EstimatorKind, FitConfig, FitResult, TraceEntry};
use crate::error::{Error, Result};
use crate::kde::{
    log_linear_kde_unchecked, log_torus_kde_at_sample, log_wn_at_sample, smoothed_params, Bandwidth,
    DistanceReference, LogDistanceKde, SmoothedReference, UnwrappedChi2, MIN_MC_SIZE,
};
use crate::par;
use crate::residual::{distance_residual_with, pearson_from_logs};
use crate::torus::{
    column, log_normal_density, mean_resultant_length, wrap_unchecked, AngleVector, EllipticalGenerator, LatticeBox,
    LatticeVector, Spd, WrappedModelParams, LATTICE_CAP, MAX_DIM,
};

// observations per partial sum; fixed so reductions do not depend on threading
const CHUNK: usize = 64;
// largest automatically chosen lattice radius
const AUTO_RADIUS_MAX: u32 = 3;
const LOW_WEIGHT_WARNING: f64 = 0.1;

pub(crate) struct FitContext<'a> {
    data: &'a [AngleVector],
    kind: EstimatorKind,
    cfg: &'a FitConfig,
    generator: &'a dyn EllipticalGenerator,
    lattice: LatticeBox,
    log_kde: Vec<f64>,
    reference_draws: Vec<f64>,
}

struct Evaluation {
    classes: Vec<Classified>,
    weights: Vec<f64>,
    residuals: Vec<f64>,
    log_likelihood: f64,
    distance_bandwidth: Option<f64>,
}

pub(crate) struct StepInfo {
    pub mean_weight: f64,
    pub log_likelihood: f64,
    pub ridge_applied: bool,
}

/// Lattice radius from the centred adequacy rule applied to the marginal
/// circular standard deviations of the data.
fn auto_radius(data: &[AngleVector], p: usize) -> u32 {
    let sd: Vec<f64> = (0..p)
        .map(|d| {
            let r = mean_resultant_length(&column(data, d)).unwrap_or(0.0);
            (-2.0 * r.max(1e-12).ln()).sqrt().min(10.0)
        })
        .collect();
    let mut j = LatticeBox::adequate_radius(&vec![0.0; p], &sd).clamp(1, AUTO_RADIUS_MAX);
    while j > 1 && (2 * j as u128 + 1).pow(p as u32) > LATTICE_CAP as u128 {
        j -= 1;
    }
    j
}

struct Moments {
    s0: f64,
    w: f64,
    s1: [f64; MAX_DIM],
    s2: Vec<f64>,
}

impl Moments {
    fn new(p: usize) -> Self {
        Self { s0: 0.0, w: 0.0, s1: [0.0; MAX_DIM], s2: vec![0.0; p * p] }
    }

    #[inline]
    fn add(&mut self, weight: f64, v: &[f64]) {
        let p = v.len();
        self.s0 += weight;
        for r in 0..p {
            let wr = weight * v[r];
            self.s1[r] += wr;
            for s in 0..=r {
                self.s2[r * p + s] += wr * v[s];
            }
        }
    }

    fn merge(&mut self, other: &Self) {
        self.s0 += other.s0;
        self.w += other.w;
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        for (a, b) in self.s2.iter_mut().zip(&other.s2) {
            *a += b;
        }
    }
}

impl<'a> FitContext<'a> {
    pub fn new(
        data: &'a [AngleVector],
        kind: EstimatorKind,
        cfg: &'a FitConfig,
        generator: &'a dyn EllipticalGenerator,
    ) -> Result<Self> {
        cfg.validate(kind)?;
        let p = data.first().map(AngleVector::dim).ok_or_else(|| Error::InvalidArgument("no observations".into()))?;
        if let Some(bad) = data.iter().find(|y| y.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, found: bad.dim() });
        }
        if p > MAX_DIM {
            return Err(Error::DimensionTooLarge(p));
        }
        let radius = cfg.lattice_radius.unwrap_or_else(|| auto_radius(data, p));
        let lattice = LatticeBox::new(radius, p)?;
        let log_kde = match kind {
            EstimatorKind::Wem | EstimatorKind::WcemTorus => {
                let h = Bandwidth::new(cfg.bandwidth.unwrap_or(f64::NAN))?;
                log_torus_kde_at_sample(data, h, radius)?
            }
            _ => Vec::new(),
        };
        let reference_draws = match (kind, cfg.distance_reference) {
            (EstimatorKind::WcemDist, DistanceReference::UnwrappedChi2 { mc_size, seed }) => {
                if mc_size < MIN_MC_SIZE {
                    return Err(Error::InvalidArgument(format!(
                        "unwrapped distance reference needs at least {MIN_MC_SIZE} draws, got {mc_size}"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..mc_size * p).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { data, kind, cfg, generator, lattice, log_kde, reference_draws })
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    fn evaluate(&self, params: &WrappedModelParams) -> Result<Evaluation> {
        let p = self.dim();
        let classes = par::map_slice(self.data, |y| classify_one(y.as_slice(), params, self.generator, &self.lattice));
        let log_likelihood = classes.iter().map(|c| c.log_density).sum();
        let mut distance_bandwidth = None;
        let residuals: Vec<f64> = match self.kind {
            EstimatorKind::Em | EstimatorKind::Cem => Vec::new(),
            EstimatorKind::Wem | EstimatorKind::WcemTorus => {
                let h = Bandwidth::new(self.cfg.bandwidth.unwrap_or(f64::NAN))?;
                let smoothed = smoothed_params(params, h)?;
                let log_m = log_wn_at_sample(self.data, &smoothed, &self.lattice);
                self.log_kde.iter().zip(&log_m).map(|(&f, &m)| pearson_from_logs(f, m)).collect()
            }
            EstimatorKind::WcemUnwrap => {
                let h = self.cfg.bandwidth.unwrap_or(f64::NAN);
                let sample: Vec<Vec<f64>> = classes.iter().map(|c| c.offset[..p].to_vec()).collect();
                let smoothed = params.scatter().add_diagonal(h * h)?;
                let origin = [0.0; MAX_DIM];
                par::map_slice(&sample, |x| {
                    pearson_from_logs(
                        log_linear_kde_unchecked(x, &sample, h),
                        log_normal_density(x, &origin[..p], &smoothed),
                    )
                })
            }
            EstimatorKind::WcemDist => {
                let d2: Vec<f64> = classes.iter().map(|c| c.d2).collect();
                let kde = LogDistanceKde::new(&d2, self.cfg.distance_bandwidth)?;
                let b = kde.bandwidth();
                distance_bandwidth = Some(b);
                let reference = match self.cfg.distance_reference {
                    DistanceReference::Chi2 => SmoothedReference::chi2(p, b)?,
                    DistanceReference::UnwrappedChi2 { seed, .. } => {
                        let u = UnwrappedChi2::from_standard_draws(params.scatter(), &self.reference_draws, seed);
                        SmoothedReference::unwrapped(&u, b)?
                    }
                };
                par::map_slice(&d2, |&t| distance_residual_with(t, &kde, &reference))
            }
        };
        let weights = if residuals.is_empty() {
            vec![1.0; self.data.len()]
        } else {
            residuals.iter().map(|&d| self.cfg.raf.weight(d)).collect()
        };
        Ok(Evaluation { classes, weights, residuals, log_likelihood, distance_bandwidth })
    }

    fn accumulate(&self, params: &WrappedModelParams, eval: &Evaluation) -> Moments {
        let p = self.dim();
        let n = self.data.len();
        let chunks = par::map_range(n.div_ceil(CHUNK), |c| {
            let mut m = Moments::new(p);
            let mut v = [0.0; MAX_DIM];
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let w = eval.weights[i];
                m.w += w;
                if w == 0.0 {
                    continue;
                }
                let cl = &eval.classes[i];
                if self.kind.is_classification() {
                    let a = -2.0 * self.generator.score_ratio(cl.d2);
                    m.add(w * a, &cl.offset[..p]);
                } else {
                    for j in self.lattice.iter() {
                        for d in 0..p {
                            v[d] = cl.z[d] + TAU * j[d] as f64;
                        }
                        let d2 = params.scatter().mahalanobis_sq(&v[..p]);
                        let omega = (self.generator.log_h(d2) - cl.log_mix).exp();
                        let a = -2.0 * self.generator.score_ratio(d2) * omega;
                        m.add(w * a, &v[..p]);
                    }
                }
            }
            m
        });
        let mut total = Moments::new(p);
        chunks.iter().for_each(|m| total.merge(m));
        total
    }

    fn m_step(&self, params: &WrappedModelParams, eval: &Evaluation, iteration: usize) -> Result<(WrappedModelParams, bool)> {
        let p = self.dim();
        let m = self.accumulate(params, eval);
        if self.kind.is_weighted() && m.w < (p + 1) as f64 {
            return Err(Error::SingularUpdate { weight_sum: m.w, required: p + 1 });
        }
        if !(m.s0 > 0.0) {
            return Err(Error::SingularUpdate { weight_sum: m.s0, required: p + 1 });
        }
        let shift: Vec<f64> = (0..p).map(|d| m.s1[d] / m.s0).collect();
        let mu: Vec<f64> = (0..p).map(|d| wrap_unchecked(params.mu()[d] + shift[d])).collect();
        let sigma = DMatrix::from_fn(p, p, |r, s| {
            let (r, s) = if s > r { (s, r) } else { (r, s) };
            (m.s2[r * p + s] - m.s0 * shift[r] * shift[s]) / m.w
        });
        let (scatter, ridge) = Spd::with_ridge(sigma, self.cfg.ridge)
            .map_err(|_| Error::DegenerateScatter { iteration, mu: mu.clone() })?;
        Ok((WrappedModelParams::from_spd(AngleVector::new(mu)?, scatter)?, ridge))
    }

    pub fn step(&self, params: &WrappedModelParams, iteration: usize) -> Result<(WrappedModelParams, StepInfo)> {
        let eval = self.evaluate(params)?;
        let (next, ridge_applied) = self.m_step(params, &eval, iteration)?;
        let mean_weight = eval.weights.iter().sum::<f64>() / eval.weights.len() as f64;
        Ok((next, StepInfo { mean_weight, log_likelihood: eval.log_likelihood, ridge_applied }))
    }

    pub fn run(&self, start: WrappedModelParams) -> Result<FitResult> {
        if start.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: start.dim() });
        }
        let mut params = start;
        let mut trace = Vec::new();
        let mut warnings = Vec::new();
        let mut converged = false;
        for iteration in 1..=self.cfg.max_iter {
            let (next, info) = self.step(&params, iteration)?;
            let conv = check_convergence(&params, &next, self.cfg.tol);
            if info.ridge_applied {
                warnings.push(format!("ridge applied to scatter at iteration {iteration}"));
            }
            trace.push(TraceEntry {
                iteration,
                mu_change: conv.mu_change,
                sigma_change: conv.sigma_change,
                mean_weight: info.mean_weight,
                log_likelihood: info.log_likelihood,
                ridge_applied: info.ridge_applied,
            });
            params = next;
            if conv.converged {
                converged = true;
                break;
            }
        }
        if !converged {
            warnings.push(format!("no convergence within {} iterations", self.cfg.max_iter));
        }
        let eval = self.evaluate(&params)?;
        let p = self.dim();
        let mean_weight = eval.weights.iter().sum::<f64>() / eval.weights.len() as f64;
        if self.kind.is_weighted() && mean_weight < LOW_WEIGHT_WARNING {
            warnings.push(format!("suspicious fit: mean weight {mean_weight:.3}"));
        }
        let unwrapped = self
            .data
            .iter()
            .zip(&eval.classes)
            .map(|(y, c)| (0..p).map(|d| y[d] + TAU * c.winding[d] as f64).collect())
            .collect();
        Ok(FitResult {
            kind: self.kind,
            windings: eval.classes.iter().map(|c| LatticeVector(c.winding[..p].to_vec())).collect(),
            distances: eval.classes.iter().map(|c| c.d2).collect(),
            unwrapped,
            log_likelihood: eval.log_likelihood,
            weights: eval.weights,
            residuals: eval.residuals,
            iterations: trace.len(),
            converged,
            trace,
            warnings,
            lattice_radius: self.lattice.radius(),
            bandwidth: if self.kind.is_weighted() && !self.kind.uses_distance_bandwidth() { self.cfg.bandwidth } else { None },
            distance_bandwidth: eval.distance_bandwidth,
            params,
        })
    }
}
