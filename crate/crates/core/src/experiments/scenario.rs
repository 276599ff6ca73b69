use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{wrap_unchecked, AngleVector, WrappedModelParams, MAX_DIM};

/// Point-mass style contamination: a fraction of the sample is shifted along
/// the minor axis of the scatter and jittered.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContaminationSpec {
    /// Contaminated fraction `ε`; `⌈εn⌉` points are replaced.
    pub fraction: f64,
    /// Shift length along the minor eigenvector.
    pub shift: f64,
    /// Marginal standard deviation of the wrapped normal jitter.
    pub noise_sd: f64,
    /// Affected dimensions; `None` means all of them when `p <= 2` and the first
    /// two otherwise.
    pub dims: Option<Vec<usize>>,
}

impl Default for ContaminationSpec {
    fn default() -> Self {
        Self { fraction: 0.0, shift: std::f64::consts::PI, noise_sd: 0.05, dims: None }
    }
}

impl ContaminationSpec {
    pub fn affected_dims(&self, dim: usize) -> Vec<usize> {
        self.dims.clone().unwrap_or_else(|| if dim <= 2 { (0..dim).collect() } else { vec![0, 1] })
    }

    pub fn count(&self, n: usize) -> usize {
        ((self.fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Simulation design: `Σ = σ² R` with a random correlation matrix `R` of fixed
/// condition number, mean direction zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub n: usize,
    pub dim: usize,
    /// Marginal scale `σ`.
    pub sigma: f64,
    pub condition_number: f64,
    pub contamination: ContaminationSpec,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            n: 250,
            dim: 2,
            sigma: std::f64::consts::PI / 8.0,
            condition_number: 20.0,
            contamination: ContaminationSpec::default(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n == 0 || self.dim == 0 {
            return bad("scenario needs positive n and dim".into());
        }
        if self.dim > MAX_DIM {
            return Err(Error::DimensionTooLarge(self.dim));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be positive, got {}", self.sigma));
        }
        let c = &self.contamination;
        if !(0.0..1.0).contains(&c.fraction) {
            return bad(format!("contamination fraction must lie in [0, 1), got {}", c.fraction));
        }
        if !(c.noise_sd >= 0.0 && c.shift.is_finite()) {
            return bad("contamination shift and noise must be finite and non-negative".into());
        }
        if let Some(d) = c.affected_dims(self.dim).iter().find(|&&d| d >= self.dim) {
            return bad(format!("contaminated dimension {d} out of range"));
        }
        Ok(())
    }
}

/// A simulated sample with its ground truth.
#[derive(Clone, Debug)]
pub struct ContaminatedSample {
    pub data: Vec<AngleVector>,
    pub outlier_mask: Vec<bool>,
    pub truth: WrappedModelParams,
    /// Unit shift direction of the outliers (zero outside the affected dims).
    pub shift_direction: Vec<f64>,
}

fn haar_orthogonal<R: Rng + ?Sized>(p: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(rng));
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..p {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

fn to_correlation(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let d: Vec<f64> = (0..p).map(|i| a[(i, i)].sqrt()).collect();
    DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { a[(i, j)] / (d[i] * d[j]) })
}

fn condition(m: &DMatrix<f64>) -> (f64, SymmetricEigen<f64, nalgebra::Dyn>) {
    let e = m.clone().symmetric_eigen();
    let max = e.eigenvalues.max();
    let min = e.eigenvalues.min();
    (max / min, e)
}

/// Random correlation matrix with condition number `kappa`: eigenvalues are
/// log-uniform between 1 and `kappa` with both ends attained, rotated by a Haar
/// orthogonal matrix, and rescaled to unit diagonal by alternating projection.
pub fn random_correlation<R: Rng + ?Sized>(dim: usize, kappa: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(Error::InvalidArgument(format!("condition number must be >= 1, got {kappa}")));
    }
    if dim == 0 || dim > MAX_DIM {
        return Err(Error::InvalidArgument(format!("unsupported dimension {dim}")));
    }
    if kappa == 1.0 {
        return Ok(DMatrix::identity(dim, dim));
    }
    if dim == 1 {
        return Err(Error::InvalidArgument("a 1x1 correlation matrix cannot have condition number above 1".into()));
    }
    let log_k = kappa.ln();
    for _ in 0..50 {
        let mut logs: Vec<f64> = (0..dim).map(|i| match i {
            0 => 0.0,
            1 => log_k,
            _ => rng.random::<f64>() * log_k,
        }).collect();
        let q = haar_orthogonal(dim, rng);
        let mut a = &q * DMatrix::from_diagonal(&logs.iter().map(|l| l.exp()).collect::<Vec<_>>().into()) * q.transpose();
        for _ in 0..500 {
            let r = to_correlation(&a);
            let (cond, eig) = condition(&r);
            if (cond / kappa - 1.0).abs() < 1e-9 {
                return Ok((&r + r.transpose()) * 0.5);
            }
            logs = eig.eigenvalues.iter().map(|l| l.ln()).collect();
            let (lo, hi) = logs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
            let scale = log_k / (hi - lo);
            let lam: Vec<f64> = logs.iter().map(|l| ((l - lo) * scale).exp()).collect();
            a = &eig.eigenvectors * DMatrix::from_diagonal(&lam.into()) * eig.eigenvectors.transpose();
        }
    }
    Err(Error::Numerical(format!("could not reach condition number {kappa} in dimension {dim}")))
}

/// Minor eigenvector of the sub-block of `sigma` on `dims`, embedded in `R^p`
/// with its first non-zero entry positive.
pub fn minor_direction(sigma: &DMatrix<f64>, dims: &[usize]) -> Vec<f64> {
    let k = dims.len();
    let sub = DMatrix::from_fn(k, k, |i, j| sigma[(dims[i], dims[j])]);
    let eig = sub.symmetric_eigen();
    let imin = eig.eigenvalues.imin();
    let mut u: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
    if u.iter().find(|v| v.abs() > 1e-12).is_some_and(|v| *v < 0.0) {
        u.iter_mut().for_each(|v| *v = -*v);
    }
    let mut full = vec![0.0; sigma.nrows()];
    for (i, &d) in dims.iter().enumerate() {
        full[d] = u[i];
    }
    full
}

/// Draws `n` points from the wrapped normal model.
pub fn sample_wrapped_normal<R: Rng + ?Sized>(params: &WrappedModelParams, n: usize, rng: &mut R) -> Vec<AngleVector> {
    let p = params.dim();
    let (mut e, mut x) = ([0.0; MAX_DIM], [0.0; MAX_DIM]);
    (0..n)
        .map(|_| {
            for v in e.iter_mut().take(p) {
                *v = StandardNormal.sample(rng);
            }
            params.scatter().apply_lower(&e[..p], &mut x[..p]);
            let y = (0..p).map(|d| x[d] + params.mu()[d]).collect();
            AngleVector::new(y).expect("finite draws")
        })
        .collect()
}

/// Simulates one contaminated sample.
pub fn generate_contaminated(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Result<ContaminatedSample> {
    scenario.validate()?;
    let p = scenario.dim;
    let corr = random_correlation(p, scenario.condition_number, rng)?;
    let truth = WrappedModelParams::new(AngleVector::zeros(p), corr * scenario.sigma.powi(2))?;
    let mut data = sample_wrapped_normal(&truth, scenario.n, rng);
    let spec = &scenario.contamination;
    let dims = spec.affected_dims(p);
    let direction = minor_direction(truth.sigma(), &dims);
    let mut mask = vec![false; scenario.n];
    for i in rand::seq::index::sample(rng, scenario.n, spec.count(scenario.n)).into_iter() {
        mask[i] = true;
        let mut y = data[i].as_slice().to_vec();
        for &d in &dims {
            let jitter: f64 = StandardNormal.sample(rng);
            y[d] = wrap_unchecked(y[d] + spec.shift * direction[d] + spec.noise_sd * jitter);
        }
        data[i] = AngleVector::new(y)?;
    }
    Ok(ContaminatedSample { data, outlier_mask: mask, truth, shift_direction: direction })
}
