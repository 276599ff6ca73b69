use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::numeric::LogSumExp;
use crate::torus::{center, AngleVector, EllipticalGenerator, LatticeBox, LatticeVector, WrappedModelParams, MAX_DIM};

/// One observation after the expectation/classification step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Classified {
    /// Winding coefficients of the most probable replica.
    pub winding: [i32; MAX_DIM],
    /// That replica minus `μ`.
    pub offset: [f64; MAX_DIM],
    /// Its squared Mahalanobis distance.
    pub d2: f64,
    /// `log Σ_j h(d²_j)` over the lattice.
    pub log_mix: f64,
    /// Log wrapped density at the observation.
    pub log_density: f64,
    /// Shift of the lattice centre, see [`center`].
    pub shift: [i32; MAX_DIM],
    /// Observation minus `μ`, reduced to `[-π, π]^p`.
    pub z: [f64; MAX_DIM],
}

fn norm_then_lex(a: &[i32], b: &[i32]) -> std::cmp::Ordering {
    let na: i64 = a.iter().map(|&v| i64::from(v) * i64::from(v)).sum();
    let nb: i64 = b.iter().map(|&v| i64::from(v) * i64::from(v)).sum();
    na.cmp(&nb).then_with(|| a.cmp(b))
}

/// Expectation and classification step for a single observation. Ties in the
/// posterior go to the winding vector of smallest norm, then lexicographically.
#[inline]
pub(crate) fn classify_one(
    y: &[f64],
    params: &WrappedModelParams,
    generator: &dyn EllipticalGenerator,
    lattice: &LatticeBox,
) -> Classified {
    let p = y.len();
    let mut out = Classified {
        winding: [0; MAX_DIM],
        offset: [0.0; MAX_DIM],
        d2: f64::INFINITY,
        log_mix: f64::NEG_INFINITY,
        log_density: f64::NEG_INFINITY,
        shift: [0; MAX_DIM],
        z: [0.0; MAX_DIM],
    };
    center(y, params.mu().as_slice(), &mut out.z[..p], &mut out.shift[..p]);
    let mut acc = LogSumExp::default();
    let mut best = f64::NEG_INFINITY;
    let (mut v, mut actual) = ([0.0; MAX_DIM], [0i32; MAX_DIM]);
    for j in lattice.iter() {
        for d in 0..p {
            v[d] = out.z[d] + TAU * j[d] as f64;
            actual[d] = out.shift[d] + j[d];
        }
        let d2 = params.scatter().mahalanobis_sq(&v[..p]);
        let lh = generator.log_h(d2);
        acc.add(lh);
        let better = lh > best
            || (lh == best && norm_then_lex(&actual[..p], &out.winding[..p]) == std::cmp::Ordering::Less);
        if better {
            best = lh;
            out.d2 = d2;
            out.winding[..p].copy_from_slice(&actual[..p]);
            out.offset[..p].copy_from_slice(&v[..p]);
        }
    }
    out.log_mix = acc.value();
    out.log_density = generator.log_normalizer(p) - 0.5 * params.scatter().log_det() + out.log_mix;
    out
}

/// Posterior probabilities of the lattice replicas of `y`, keyed by the actual
/// winding vector `ĵ` with unwrapped point `y + 2πĵ`. The lattice is centred
/// on the replica closest to `μ`.
pub fn posterior_lattice_weights(
    y: &AngleVector,
    params: &WrappedModelParams,
    generator: &dyn EllipticalGenerator,
    lattice: &LatticeBox,
) -> Result<Vec<(LatticeVector, f64)>> {
    let p = params.dim();
    if y.dim() != p || lattice.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: y.dim().max(lattice.dim()) });
    }
    let c = classify_one(y.as_slice(), params, generator, lattice);
    if c.log_mix == f64::NEG_INFINITY {
        return Err(Error::DensityUnderflow);
    }
    let mut v = [0.0; MAX_DIM];
    Ok(lattice
        .iter()
        .map(|j| {
            for d in 0..p {
                v[d] = c.z[d] + TAU * j[d] as f64;
            }
            let lw = generator.log_h(params.scatter().mahalanobis_sq(&v[..p])) - c.log_mix;
            let winding = (0..p).map(|d| c.shift[d] + j[d]).collect();
            (LatticeVector(winding), lw.exp())
        })
        .collect())
}

/// Classification step: the winding vector of the most probable replica.
pub fn classify(
    y: &AngleVector,
    params: &WrappedModelParams,
    generator: &dyn EllipticalGenerator,
    lattice: &LatticeBox,
) -> Result<LatticeVector> {
    let p = params.dim();
    if y.dim() != p || lattice.dim() != p {
        return Err(Error::DimensionMismatch { expected: p, found: y.dim().max(lattice.dim()) });
    }
    let c = classify_one(y.as_slice(), params, generator, lattice);
    Ok(LatticeVector(c.winding[..p].to_vec()))
}
