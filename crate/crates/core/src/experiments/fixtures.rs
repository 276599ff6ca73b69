//! Synthetic stand-ins for the backbone torsion-angle tables used in the
//! case studies. Both mark a planted main cluster; everything else is
//! structure a robust fit should treat as outlying.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::sample_wrapped_normal;
use crate::error::Result;
use crate::table::AngleTable;
use crate::torus::{AngleVector, Spd, WrappedModelParams};

/// An angle table with a mask of the planted main cluster.
#[derive(Clone, Debug)]
pub struct LabelledTable {
    pub table: AngleTable,
    pub main_cluster: Vec<bool>,
}

fn cluster(mean_deg: &[f64], sd_deg: &[f64], corr: &DMatrix<f64>) -> Result<WrappedModelParams> {
    let p = mean_deg.len();
    let sd: Vec<f64> = sd_deg.iter().map(|s| s.to_radians()).collect();
    let sigma = DMatrix::from_fn(p, p, |i, j| corr[(i, j)] * sd[i] * sd[j]);
    WrappedModelParams::new(AngleVector::from_degrees(mean_deg)?, sigma)
}

fn far_from(params: &WrappedModelParams, y: &AngleVector, d2_min: f64) -> bool {
    let scatter: &Spd = params.scatter();
    let diff: Vec<f64> = y.as_slice().iter().zip(params.mu().as_slice()).map(|(a, m)| crate::torus::to_signed(a - m)).collect();
    scatter.mahalanobis_sq(&diff) > d2_min
}

fn assemble(columns: &[&str], groups: Vec<(Vec<AngleVector>, bool)>, rng: &mut ChaCha8Rng) -> Result<LabelledTable> {
    let mut rows: Vec<(AngleVector, bool)> =
        groups.into_iter().flat_map(|(g, main)| g.into_iter().map(move |y| (y, main))).collect();
    // interleave so row order carries no label information
    for i in (1..rows.len()).rev() {
        rows.swap(i, rng.random_range(0..=i));
    }
    let (data, main_cluster): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(LabelledTable { table: AngleTable::new(columns.iter().map(|c| c.to_string()).collect(), data)?, main_cluster })
}

/// 490 (φ, ψ) pairs: a right-handed helix cluster holding 54% of the points,
/// a sheet region, a left-handed helix patch and diffuse loop conformations.
pub fn protein_like(seed: u64) -> Result<LabelledTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corr = |r: f64| DMatrix::from_row_slice(2, 2, &[1.0, r, r, 1.0]);
    let helix = cluster(&[-63.0, -43.0], &[9.0, 10.0], &corr(-0.3))?;
    let sheet = cluster(&[-120.0, 130.0], &[18.0, 15.0], &corr(-0.2))?;
    let left = cluster(&[60.0, 40.0], &[10.0, 12.0], &corr(0.0))?;
    let mut diffuse = Vec::new();
    while diffuse.len() < 40 {
        let y = AngleVector::new(vec![rng.random_range(0.0..std::f64::consts::TAU), rng.random_range(0.0..std::f64::consts::TAU)])?;
        if far_from(&helix, &y, 25.0) {
            diffuse.push(y);
        }
    }
    let groups = vec![
        (sample_wrapped_normal(&helix, 265, &mut rng), true),
        (sample_wrapped_normal(&sheet, 150, &mut rng), false),
        (sample_wrapped_normal(&left, 35, &mut rng), false),
        (diffuse, false),
    ];
    assemble(&["phi", "psi"], groups, &mut rng)
}

/// 260 seven-angle nucleotide conformations: 232 around an A-form backbone
/// and a separate 28-point cluster.
pub fn rna_like(seed: u64) -> Result<LabelledTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corr = DMatrix::from_fn(7, 7, |i, j| if i == j { 1.0 } else if i.abs_diff(j) == 1 { 0.25 } else { 0.0 });
    let a_form = cluster(&[-68.0, 178.0, 54.0, 82.0, -153.0, -71.0, -158.0], &[12.0; 7], &corr)?;
    let other = cluster(&[-60.0, 170.0, 180.0, 145.0, -100.0, 60.0, -120.0], &[14.0; 7], &corr)?;
    let groups =
        vec![(sample_wrapped_normal(&a_form, 232, &mut rng), true), (sample_wrapped_normal(&other, 28, &mut rng), false)];
    assemble(&["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "chi"], groups, &mut rng)
}
