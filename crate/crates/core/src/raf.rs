//! Residual adjustment functions and the weight function built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual adjustment function. Every variant satisfies `A(0) = 0` and
/// `A'(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RafKind {
    /// Generalized Kullback-Leibler, `log(τδ + 1)/τ`, `τ ∈ (0, 1]`.
    Gkl { tau: f64 },
    /// Power divergence, `((δ + 1)^{λ+1} - 1)/(λ + 1)`, `λ > -1`.
    Pwd { lambda: f64 },
    /// Symmetric chi-squared, `2δ/(δ + 2)`.
    Schi,
    /// `A(δ) = δ`: every weight is one and the fit is the unweighted likelihood fit.
    Identity,
}

impl Default for RafKind {
    fn default() -> Self {
        Self::Gkl { tau: 0.25 }
    }
}

impl RafKind {
    pub fn gkl(tau: f64) -> Result<Self> {
        let k = Self::Gkl { tau };
        k.validate().map(|_| k)
    }

    pub fn pwd(lambda: f64) -> Result<Self> {
        let k = Self::Pwd { lambda };
        k.validate().map(|_| k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Gkl { tau } if !(tau > 0.0 && tau <= 1.0) => {
                Err(Error::InvalidArgument(format!("GKL tau must lie in (0, 1], got {tau}")))
            }
            Self::Pwd { lambda } if !(lambda > -1.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("PWD lambda must exceed -1, got {lambda}")))
            }
            _ => Ok(()),
        }
    }

    /// `A(δ)` for `δ >= -1`.
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            Self::Gkl { tau } => (tau * delta).ln_1p() / tau,
            Self::Pwd { lambda } => ((delta + 1.0).powf(lambda + 1.0) - 1.0) / (lambda + 1.0),
            Self::Schi => 2.0 * delta / (delta + 2.0),
            Self::Identity => delta,
        }
    }

    /// `A'(δ)`.
    pub fn deriv(&self, delta: f64) -> f64 {
        match *self {
            Self::Gkl { tau } => 1.0 / (tau * delta + 1.0),
            Self::Pwd { lambda } => (delta + 1.0).powf(lambda),
            Self::Schi => 4.0 / (delta + 2.0).powi(2),
            Self::Identity => 1.0,
        }
    }

    /// `w(δ) = min{1, [A(δ) + 1]⁺ / (δ + 1)}`. Infinite residuals get weight 0.
    pub fn weight(&self, delta: f64) -> f64 {
        if matches!(self, Self::Identity) {
            return 1.0;
        }
        if delta.is_nan() || delta == f64::INFINITY {
            return 0.0;
        }
        let num = (self.eval(delta) + 1.0).max(0.0);
        let den = delta + 1.0;
        if den <= 0.0 {
            return if num > 0.0 { 1.0 } else { 0.0 };
        }
        (num / den).min(1.0)
    }

    /// `w'(δ)`: zero where the weight is capped at one or clipped at zero.
    pub fn weight_deriv(&self, delta: f64) -> f64 {
        if matches!(self, Self::Identity) || !delta.is_finite() {
            return 0.0;
        }
        let den = delta + 1.0;
        let a1 = self.eval(delta) + 1.0;
        if den <= 0.0 || a1 <= 0.0 || a1 / den >= 1.0 {
            return 0.0;
        }
        (self.deriv(delta) - a1 / den) / den
    }
}
