//! Quadrature versions of the scores, used to check the closed forms.
//!
//! Nothing in the fitting path calls into this module. Integrands are split
//! at their jump points so that every piece handed to the adaptive Simpson
//! rule is smooth.

use crate::special::erf;
use crate::{Error, Result};

use super::{ForecastTriple, RelativeErrorSet};

const MAX_DEPTH: u32 = 60;
/// Each piece is pre-split into this many panels before adaptation starts.
const INITIAL_PANELS: usize = 16;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integration bounds must be finite"));
    }
    if a == b {
        return Ok(0.0);
    }
    let h = (b - a) / INITIAL_PANELS as f64;
    let panel_tol = tol / INITIAL_PANELS as f64;
    let mut total = 0.0;
    for k in 0..INITIAL_PANELS {
        let lo = a + h * k as f64;
        let hi = if k + 1 == INITIAL_PANELS { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_step(f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
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
    if depth == 0 || m <= a || m >= b {
        return Err(Error::Numeric(format!(
            "adaptive Simpson did not converge on [{a}, {b}] (residual {delta:e})"
        )));
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

/// CRPS by direct integration of `[P(y) − H(y − y_obs)]²`, where `P` is the
/// Gaussian forecast cdf. The window is `[μ − 12σ, μ + 12σ]`, widened to
/// contain the observation, and split at it.
pub fn crps_quadrature_oracle(t: &ForecastTriple) -> Result<f64> {
    t.validate()?;
    let (mu, sigma, y_obs) = (t.mu, t.sigma, t.y_obs);
    let cdf = |y: f64| 0.5 * (erf((y - mu) / (std::f64::consts::SQRT_2 * sigma)) + 1.0);
    let lo = (mu - 12.0 * sigma).min(y_obs);
    let hi = (mu + 12.0 * sigma).max(y_obs);
    let tol = 1e-10;
    let below = adaptive_simpson(&|y| cdf(y).powi(2), lo, y_obs, 0.5 * tol)?;
    let above = adaptive_simpson(&|y| (1.0 - cdf(y)).powi(2), y_obs, hi, 0.5 * tol)?;
    Ok(below + above)
}

/// Reliability score by direct integration of `[Φ(η) − C(η)]²` with
/// `Φ(η) = ½(erf(η) + 1)` and `C` the empirical cdf of the set, over
/// `[min η − window, max η + window]`. The constant term is retained.
pub fn rs_quadrature_oracle_window(set: &RelativeErrorSet, window: f64) -> Result<f64> {
    let etas = set.etas();
    let n = etas.len() as f64;
    let mut knots = Vec::with_capacity(etas.len() + 2);
    knots.push(etas[0] - window);
    knots.extend_from_slice(etas);
    knots.push(etas[etas.len() - 1] + window);
    let pieces = knots.len() - 1;
    let tol = 1e-9 / pieces as f64;
    let mut total = 0.0;
    for (k, w) in knots.windows(2).enumerate() {
        // C(η) is constant (= k/N) strictly between consecutive knots.
        let level = k as f64 / n;
        let g = |eta: f64| (0.5 * (erf(eta) + 1.0) - level).powi(2);
        total += adaptive_simpson(&g, w[0], w[1], tol)?;
    }
    Ok(total)
}

/// [`rs_quadrature_oracle_window`] with the default ±10 window.
pub fn rs_quadrature_oracle(set: &RelativeErrorSet) -> Result<f64> {
    rs_quadrature_oracle_window(set, 10.0)
}
