use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resultant lengths below this are treated as an undefined mean direction.
pub const MEAN_RESULTANT_TOL: f64 = 1e-12;

/// Reduces an angle to `[0, 2π)`.
pub fn wrap(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("angle {x}")));
    }
    Ok(wrap_unchecked(x))
}

/// [`wrap`] without the finiteness check, for hot loops over validated data.
#[inline]
pub fn wrap_unchecked(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    // rem_euclid can round tiny negatives up to exactly 2π
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Maps an angle to the signed range `[-π, π)`.
#[inline]
pub fn to_signed(x: f64) -> f64 {
    let w = wrap_unchecked(x);
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Chord length `sqrt(2(1 - cos d))` between two angles `d` apart.
#[inline]
pub fn chord(d: f64) -> f64 {
    (2.0 * (1.0 - d.cos())).max(0.0).sqrt()
}

/// A point on the p-torus, each coordinate stored in `[0, 2π)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    /// Validates finiteness and wraps each coordinate.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("angle vector must be non-empty".into()));
        }
        values
            .into_iter()
            .map(wrap)
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn from_degrees(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|d| d.to_radians()).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Coordinates in `[-π, π)`.
    pub fn to_signed(&self) -> Vec<f64> {
        self.0.iter().map(|&x| to_signed(x)).collect()
    }
}

impl TryFrom<Vec<f64>> for AngleVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<AngleVector> for Vec<f64> {
    fn from(v: AngleVector) -> Self {
        v.0
    }
}

impl std::ops::Index<usize> for AngleVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mean cosine, mean sine and resultant length of a sample of angles.
fn mean_resultant<I: IntoIterator<Item = f64>>(angles: I) -> Result<(f64, f64, f64)> {
    let (mut c, mut s, mut n) = (0.0, 0.0, 0usize);
    for a in angles {
        if !a.is_finite() {
            return Err(Error::NonFinite(format!("angle {a}")));
        }
        c += a.cos();
        s += a.sin();
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let (c, s) = (c / n as f64, s / n as f64);
    Ok((c, s, c.hypot(s)))
}

/// Length of the mean resultant vector, in `[0, 1]`.
pub fn mean_resultant_length(angles: &[f64]) -> Result<f64> {
    Ok(mean_resultant(angles.iter().copied())?.2.min(1.0))
}

/// Circular mean direction in `[0, 2π)`.
pub fn circular_mean(angles: &[f64]) -> Result<f64> {
    let (c, s, r) = mean_resultant(angles.iter().copied())?;
    if r < MEAN_RESULTANT_TOL {
        return Err(Error::UndefinedMean(r));
    }
    Ok(wrap_unchecked(s.atan2(c)))
}

/// Circular-circular correlation of two paired angle samples.
pub fn circular_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let (ma, mb) = (circular_mean(a)?, circular_mean(b)?);
    let (mut num, mut sa, mut sb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let (u, v) = ((x - ma).sin(), (y - mb).sin());
        num += u * v;
        sa += u * u;
        sb += v * v;
    }
    let den = (sa * sb).sqrt();
    if den <= f64::MIN_POSITIVE {
        return Err(Error::DegenerateCorrelation);
    }
    Ok((num / den).clamp(-1.0, 1.0))
}

/// Per-component chord distances between two mean directions.
pub fn angular_separation(a: &AngleVector, b: &AngleVector) -> Result<Vec<f64>> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    Ok(a.0.iter().zip(&b.0).map(|(x, y)| chord(x - y)).collect())
}

/// Extracts coordinate `d` of every observation.
pub fn column(data: &[AngleVector], d: usize) -> Vec<f64> {
    data.iter().map(|y| y.0[d]).collect()
}
