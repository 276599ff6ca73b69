//! Small numerical kernels: streaming log-sum-exp, quadrature and bracketed
//! root finding.

use crate::error::{Error, Result};

/// Streaming `log Σ exp(x_i)` that never overflows.
#[derive(Clone, Copy, Debug)]
pub struct LogSumExp {
    max: f64,
    sum: f64,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, sum: 0.0 }
    }
}

impl LogSumExp {
    #[inline]
    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - x).exp() + 1.0;
            self.max = x;
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        if self.sum == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let mut acc = LogSumExp::default();
    xs.iter().for_each(|&x| acc.add(x));
    acc.value()
}

/// Trapezoid rule for a periodic integrand over one period `[a, a + len)`.
pub fn periodic_trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, len: f64, n: usize) -> f64 {
    let h = len / n as f64;
    (0..n).map(|k| f(a + k as f64 * h)).sum::<f64>() * h
}

/// Composite Simpson rule with `n` (rounded up to even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        if depth == 0 {
            return Err(Error::Numerical("adaptive quadrature hit its depth limit".into()));
        }
        Ok(rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Finds a root of `f` inside `[lo, hi]`, where `f(lo)` and `f(hi)` differ in
/// sign, using the Illinois variant of regula falsi.
pub fn bracketed_root<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!("root not bracketed in [{lo}, {hi}]")));
    }
    let mut side = 0i8;
    for _ in 0..200 {
        let x = (lo * fhi - hi * flo) / (fhi - flo);
        let x = if x.is_finite() && x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let fx = f(x)?;
        if fx == 0.0 || (hi - lo).abs() < tol {
            return Ok(x);
        }
        if fx.signum() == fhi.signum() {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
        if (hi - lo).abs() < tol {
            return Ok(0.5 * (lo + hi));
        }
    }
    Err(Error::Numerical("root search did not converge".into()))
}

/// Expands a bracket around `x0` until `f` changes sign, then solves.
pub fn root_near<F: FnMut(f64) -> Result<f64>>(mut f: F, x0: f64, step: f64, max_width: f64, tol: f64) -> Result<f64> {
    let f0 = f(x0)?;
    if f0 == 0.0 {
        return Ok(x0);
    }
    let mut w = step;
    while w <= max_width {
        for x in [x0 - w, x0 + w] {
            let fx = f(x)?;
            if fx.signum() != f0.signum() {
                let (a, b) = if x < x0 { (x, x0) } else { (x0, x) };
                return bracketed_root(&mut f, a, b, tol);
            }
        }
        w *= 1.6;
    }
    Err(Error::Numerical(format!("no sign change within {max_width} of {x0}")))
}
