use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of lattice points a box may hold.
pub const LATTICE_CAP: usize = 1_000_000;

/// Integer winding coefficients, one per torus dimension.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeVector(pub Vec<i32>);

impl LatticeVector {
    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|&j| i64::from(j) * i64::from(j)).sum()
    }
}

/// The truncated lattice `{-J, ..., J}^p`, enumerated lexicographically with the
/// first coordinate most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeBox {
    radius: u32,
    dim: usize,
    coeffs: Vec<i32>,
}

impl LatticeBox {
    pub fn new(radius: u32, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("lattice dimension must be positive".into()));
        }
        let side = 2 * u128::from(radius) + 1;
        let points = u32::try_from(dim)
            .ok()
            .and_then(|d| side.checked_pow(d))
            .unwrap_or(u128::MAX);
        if points > LATTICE_CAP as u128 {
            return Err(Error::LatticeTooLarge { points, cap: LATTICE_CAP });
        }
        let r = radius as i32;
        let len = points as usize;
        let mut coeffs = Vec::with_capacity(len * dim);
        let mut cur = vec![-r; dim];
        for _ in 0..len {
            coeffs.extend_from_slice(&cur);
            for d in (0..dim).rev() {
                if cur[d] < r {
                    cur[d] += 1;
                    break;
                }
                cur[d] = -r;
            }
        }
        Ok(Self { radius, dim, coeffs })
    }

    /// Smallest radius `J >= 1` such that `μ_d ± 4σ_d` lies inside `(-2πJ, 2πJ]`
    /// for every dimension, where `σ_d` are the marginal standard deviations.
    pub fn adequate_radius(mu: &[f64], marginal_sd: &[f64]) -> u32 {
        let tau = std::f64::consts::TAU;
        mu.iter()
            .zip(marginal_sd)
            .map(|(&m, &s)| {
                let mut j = 1u32;
                while !(m - 4.0 * s > -tau * j as f64 && m + 4.0 * s <= tau * j as f64) {
                    j += 1;
                }
                j
            })
            .max()
            .unwrap_or(1)
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coeffs.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Iterates lattice points as coefficient slices.
    pub fn iter(&self) -> std::slice::ChunksExact<'_, i32> {
        self.coeffs.chunks_exact(self.dim)
    }

    pub fn enumerate(&self) -> Vec<LatticeVector> {
        self.iter().map(|c| LatticeVector(c.to_vec())).collect()
    }
}
