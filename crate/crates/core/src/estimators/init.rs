use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::torus::{circular_correlation, circular_mean, column, mean_resultant_length, AngleVector, Spd, WrappedModelParams};

/// Subsample size `p + p(p+1)/2 + 5`.
pub fn default_subsample_size(dim: usize) -> usize {
    dim + dim * (dim + 1) / 2 + 5
}

/// Moment-type start: circular means, `-2 log ρ̂` marginal variances and
/// circular correlations for the off-diagonal terms.
pub fn moment_start(sample: &[AngleVector], ridge: f64) -> Result<WrappedModelParams> {
    let p = sample.first().map(AngleVector::dim).ok_or_else(|| Error::InvalidArgument("empty sample".into()))?;
    let cols: Vec<Vec<f64>> = (0..p).map(|d| column(sample, d)).collect();
    let mu = cols.iter().map(|c| circular_mean(c)).collect::<Result<Vec<_>>>()?;
    let sd = cols
        .iter()
        .map(|c| mean_resultant_length(c).map(|r| (-2.0 * r.min(1.0).ln()).max(0.0).sqrt()))
        .collect::<Result<Vec<_>>>()?;
    let mut sigma = DMatrix::zeros(p, p);
    for r in 0..p {
        sigma[(r, r)] = sd[r] * sd[r];
        for s in 0..r {
            let rho = match circular_correlation(&cols[r], &cols[s]) {
                Ok(v) => v,
                Err(Error::DegenerateCorrelation) => 0.0,
                Err(e) => return Err(e),
            };
            sigma[(r, s)] = rho * sd[r] * sd[s];
            sigma[(s, r)] = sigma[(r, s)];
        }
    }
    let (scatter, _) = Spd::with_ridge(sigma, ridge)?;
    WrappedModelParams::from_spd(AngleVector::new(mu)?, scatter)
}

/// Starting values from `n_subsamples` random subsamples drawn without
/// replacement. Subsamples with an undefined mean or a scatter that stays
/// singular after the ridge are dropped.
pub fn initialize<R: Rng + ?Sized>(
    data: &[AngleVector],
    n_subsamples: usize,
    subsample_size: usize,
    ridge: f64,
    rng: &mut R,
) -> Result<Vec<WrappedModelParams>> {
    let n = data.len();
    if subsample_size < 2 || n <= subsample_size {
        return Err(Error::InvalidArgument(format!(
            "need more than {subsample_size} observations for subsampling, got {n}"
        )));
    }
    let mut starts = Vec::with_capacity(n_subsamples);
    for _ in 0..n_subsamples {
        let idx = rand::seq::index::sample(rng, n, subsample_size);
        let sub: Vec<AngleVector> = idx.iter().map(|i| data[i].clone()).collect();
        match moment_start(&sub, ridge) {
            Ok(s) => starts.push(s),
            Err(e) => log::debug!("dropping starting subsample: {e}"),
        }
    }
    if starts.is_empty() {
        return Err(Error::InitializationFailed);
    }
    Ok(starts)
}
