//! Closed-form scores for Gaussian forecasts.
//!
//! Two scores are provided, both negatively oriented:
//!
//! - the continuous ranked probability score (CRPS) of a single Gaussian
//!   forecast `N(μ, σ²)` against an observation, and
//! - the reliability score (RS) of an ensemble of forecasts, the integrated
//!   squared gap between the standard normal cdf (in `erf` form) and the
//!   empirical cdf of the relative errors `η = ε / (√2 σ)`.
//!
//! Both come with their `σ`-derivatives and their known minimizers. The
//! [`oracle`] submodule holds slow quadrature versions that are only used to
//! check the closed forms.

pub mod oracle;

use serde::{Deserialize, Serialize};

use crate::special::{erf, erf_inv, FRAC_1_SQRT_PI, SQRT_2_OVER_PI};
use crate::{Error, Result};

/// `½√(2/π)`, the additive constant of the reliability score.
pub const RS_CONSTANT: f64 = 0.5 * SQRT_2_OVER_PI;

/// One Gaussian forecast `N(mu, sigma²)` paired with its observation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastTriple {
    pub mu: f64,
    pub sigma: f64,
    pub y_obs: f64,
}

impl ForecastTriple {
    pub fn new(mu: f64, sigma: f64, y_obs: f64) -> Result<Self> {
        let t = Self { mu, sigma, y_obs };
        t.validate()?;
        Ok(t)
    }

    /// Signed error `y_obs − mu`.
    #[inline]
    pub fn eps(&self) -> f64 {
        self.y_obs - self.mu
    }

    /// Relative error `ε / (√2 σ)`.
    #[inline]
    pub fn eta(&self) -> f64 {
        self.eps() / (std::f64::consts::SQRT_2 * self.sigma)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.mu.is_finite() && self.sigma.is_finite() && self.y_obs.is_finite()) {
            return Err(Error::domain(format!("non-finite forecast triple {self:?}")));
        }
        if self.sigma <= 0.0 {
            return Err(Error::domain(format!("sigma must be positive, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Relative errors sorted in non-decreasing order.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeErrorSet {
    etas: Vec<f64>,
}

impl RelativeErrorSet {
    /// Wraps an already sorted vector. Fails if the input is empty, contains
    /// a non-finite value, or is out of order.
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::domain("relative error set is empty"));
        }
        if let Some(bad) = etas.iter().find(|e| !e.is_finite()) {
            return Err(Error::domain(format!("non-finite relative error {bad}")));
        }
        if let Some(i) = etas.windows(2).position(|w| w[0] > w[1]) {
            return Err(Error::Contract(format!(
                "relative errors not sorted at position {}: {} > {}",
                i + 1,
                etas[i],
                etas[i + 1]
            )));
        }
        Ok(Self { etas })
    }

    /// Sorts arbitrary relative errors. Equal values keep their input order.
    pub fn from_unsorted(mut etas: Vec<f64>) -> Result<Self> {
        if let Some(bad) = etas.iter().find(|e| !e.is_finite()) {
            return Err(Error::domain(format!("non-finite relative error {bad}")));
        }
        etas.sort_by(f64::total_cmp);
        Self::new(etas)
    }

    /// Builds the set from forecast triples.
    pub fn from_triples(triples: &[ForecastTriple]) -> Result<Self> {
        let etas = triples
            .iter()
            .map(|t| t.validate().map(|_| t.eta()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_unsorted(etas)
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }
}

/// CRPS of `N(μ, σ²)` as a function of the error `ε` and `σ`. No validation.
#[inline]
pub(crate) fn crps_raw(eps: f64, sigma: f64) -> f64 {
    let z = eps / sigma;
    eps * erf(z * std::f64::consts::FRAC_1_SQRT_2)
        + sigma * (SQRT_2_OVER_PI * (-0.5 * z * z).exp() - FRAC_1_SQRT_PI)
}

#[inline]
pub(crate) fn crps_dsigma_raw(eps: f64, sigma: f64) -> f64 {
    let z = eps / sigma;
    SQRT_2_OVER_PI * (-0.5 * z * z).exp() - FRAC_1_SQRT_PI
}

/// Closed-form CRPS of a Gaussian forecast.
///
/// Zero only for a deterministic forecast that hits the observation, and
/// tends to the absolute error `|y_obs − μ|` as `σ → 0`.
pub fn crps_gaussian(t: &ForecastTriple) -> Result<f64> {
    t.validate()?;
    Ok(crps_raw(t.eps(), t.sigma).max(0.0))
}

/// Derivative of [`crps_gaussian`] with respect to `σ` at fixed error.
pub fn crps_dsigma(t: &ForecastTriple) -> Result<f64> {
    t.validate()?;
    Ok(crps_dsigma_raw(t.eps(), t.sigma))
}

/// The `σ` minimizing the CRPS for a fixed error: `|ε| / √(log 2)`.
pub fn crps_sigma_min(eps: f64) -> f64 {
    eps.abs() / std::f64::consts::LN_2.sqrt()
}

/// Closed-form reliability score of a sorted relative-error set.
///
/// With `drop_constant` the trailing `−½√(2/π)` is omitted; that variant is
/// the one used when fitting.
pub fn reliability_score(set: &RelativeErrorSet, drop_constant: bool) -> f64 {
    rs_sorted(set.etas(), drop_constant)
}

pub(crate) fn rs_sorted(etas: &[f64], drop_constant: bool) -> f64 {
    let n = etas.len() as f64;
    let sum: f64 = etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| rs_term(k + 1, eta, n))
        .sum();
    if drop_constant {
        sum
    } else {
        sum - RS_CONSTANT
    }
}

/// The `i`-th summand (1-based rank) of the reliability score.
#[inline]
pub(crate) fn rs_term(rank: usize, eta: f64, n: f64) -> f64 {
    let two_i_minus_1 = (2 * rank - 1) as f64;
    eta / n * (erf(eta) + 1.0) - eta * two_i_minus_1 / (n * n) + (-eta * eta).exp() * FRAC_1_SQRT_PI / n
}

#[inline]
pub(crate) fn rs_dsigma_raw(rank: usize, eta: f64, sigma: f64, n: f64) -> f64 {
    let two_i_minus_1 = (2 * rank - 1) as f64;
    eta / (n * sigma) * (two_i_minus_1 / n - erf(eta) - 1.0)
}

/// Derivative of the `i`-th reliability summand with respect to `σ_i`,
/// holding the error and the rank `i` (1-based) fixed.
pub fn rs_dsigma(rank: usize, eta: f64, sigma: f64, n: usize) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if rank == 0 || rank > n {
        return Err(Error::domain(format!("rank {rank} outside 1..={n}")));
    }
    if !eta.is_finite() {
        return Err(Error::domain(format!("non-finite relative error {eta}")));
    }
    Ok(rs_dsigma_raw(rank, eta, sigma, n as f64))
}

/// Relative errors minimizing the reliability score for `n` samples:
/// `η_i = erf⁻¹((2i − 1)/n − 1)`, ascending. These place the empirical cdf
/// at the uniform quantiles.
pub fn rs_optimal_etas(n: usize) -> Vec<f64> {
    let nf = n as f64;
    (1..=n)
        .map(|i| erf_inv((2 * i - 1) as f64 / nf - 1.0))
        .collect()
}

/// Minimum attainable reliability score for `n` samples.
///
/// With the constant retained this tends to zero as `n` grows; with
/// `drop_constant` it tends to `½√(2/π) ≈ 0.39894`.
///
/// # Panics
/// If `n == 0`.
pub fn rs_min(n: usize, drop_constant: bool) -> f64 {
    assert!(n >= 1, "rs_min needs at least one sample");
    let nf = n as f64;
    let sum: f64 = rs_optimal_etas(n).iter().map(|e| (-e * e).exp()).sum();
    let v = sum * FRAC_1_SQRT_PI / nf;
    if drop_constant {
        v
    } else {
        v - RS_CONSTANT
    }
}
