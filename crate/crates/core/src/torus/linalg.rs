use nalgebra::DMatrix;

use crate::error::{Error, Result};

use super::MAX_DIM;

/// A symmetric positive definite matrix together with its Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Spd {
    matrix: DMatrix<f64>,
    // lower factor, row-major packed for the forward solves in hot loops
    lower: Vec<f64>,
    log_det: f64,
}

impl Spd {
    /// Factorizes `m`. Fails when `m` is not square, not finite, visibly
    /// asymmetric or not positive definite.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let p = m.nrows();
        if p == 0 || m.ncols() != p {
            return Err(Error::InvalidArgument(format!(
                "scatter must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if p > MAX_DIM {
            return Err(Error::DimensionTooLarge(p));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scatter entry".into()));
        }
        let scale = m.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
        for i in 0..p {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-9 * scale {
                    return Err(Error::InvalidArgument("scatter is not symmetric".into()));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        let chol = sym.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let mut lower = vec![0.0; p * p];
        let mut log_det = 0.0;
        for i in 0..p {
            let d = l[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite);
            }
            log_det += 2.0 * d.ln();
            for j in 0..=i {
                lower[i * p + j] = l[(i, j)];
            }
        }
        Ok(Self { matrix: sym, lower, log_det })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.len();
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidArgument("scatter rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
    }

    pub fn identity(p: usize) -> Self {
        Self::new(DMatrix::identity(p, p)).expect("identity is SPD")
    }

    /// Factorizes `m`, adding `ridge * trace(m)/p` to the diagonal if the plain
    /// factorization fails. Returns whether the ridge was needed.
    pub fn with_ridge(m: DMatrix<f64>, ridge: f64) -> Result<(Self, bool)> {
        match Self::new(m.clone()) {
            Ok(s) => Ok((s, false)),
            Err(Error::NotPositiveDefinite) if ridge > 0.0 => {
                let p = m.nrows();
                let shift = ridge * m.trace() / p as f64;
                if !(shift > 0.0) {
                    return Err(Error::NotPositiveDefinite);
                }
                let repaired = m + DMatrix::identity(p, p) * shift;
                Self::new(repaired).map(|s| (s, true))
            }
            Err(e) => Err(e),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn marginal_sd(&self) -> Vec<f64> {
        self.matrix.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    /// Solves `L y = v` into `out`.
    #[inline]
    pub fn forward_solve(&self, v: &[f64], out: &mut [f64]) {
        let p = self.dim();
        for i in 0..p {
            let row = &self.lower[i * p..i * p + i + 1];
            let mut acc = v[i];
            for k in 0..i {
                acc -= row[k] * out[k];
            }
            out[i] = acc / row[i];
        }
    }

    /// The squared Mahalanobis norm `vᵀ Σ⁻¹ v`.
    #[inline]
    pub fn mahalanobis_sq(&self, v: &[f64]) -> f64 {
        let mut buf = [0.0; MAX_DIM];
        let out = &mut buf[..self.dim()];
        self.forward_solve(v, out);
        out.iter().map(|x| x * x).sum()
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        let chol = self.matrix.clone().cholesky().expect("factorized at construction");
        chol.inverse()
    }

    /// Applies the lower factor: returns `L z`.
    pub fn apply_lower(&self, z: &[f64], out: &mut [f64]) {
        let p = self.dim();
        for i in 0..p {
            out[i] = (0..=i).map(|k| self.lower[i * p + k] * z[k]).sum();
        }
    }

    /// `Σ + c I`.
    pub fn add_diagonal(&self, c: f64) -> Result<Self> {
        let p = self.dim();
        Self::new(&self.matrix + DMatrix::identity(p, p) * c)
    }
}

/// Kullback-Leibler type divergence `tr(A B⁻¹) - log det(A B⁻¹) - p`.
pub fn scatter_divergence(estimate: &Spd, truth: &Spd) -> Result<f64> {
    if estimate.dim() != truth.dim() {
        return Err(Error::DimensionMismatch { expected: truth.dim(), found: estimate.dim() });
    }
    let p = truth.dim() as f64;
    let tr = (estimate.matrix() * truth.inverse()).trace();
    Ok(tr - (estimate.log_det() - truth.log_det()) - p)
}
