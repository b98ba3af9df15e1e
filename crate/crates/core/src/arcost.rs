//! The accuracy-reliability cost.
//!
//! `AR(σ) = β · mean CRPS(ε_i, σ_i) + (1 − β) · RS(η)` with
//! `η_i = ε_i / (√2 σ_i)`, and `β = RS_min / (CRPS_min + RS_min)` computed once
//! from the errors.
//!
//! `CRPS_min` here is `(√(log 4) / 2N) Σ |ε_i|`. The absolute value keeps it
//! non-negative for errors of mixed sign; the minimum of the mean CRPS is
//! really `erf(√(log 2)/√2) · mean|ε| ≈ 0.5949 · mean|ε|`, about 1% above
//! this rescaled mean error, but the weighting only needs the scale.

use serde::{Deserialize, Serialize};

use crate::scores::{crps_dsigma_raw, crps_raw, rs_dsigma_raw, rs_min, rs_term, RS_CONSTANT};
use crate::{Error, Result};

/// An input point with the signed error of the mean prediction there.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSample {
    pub x: Vec<f64>,
    pub eps: f64,
}

impl ErrorSample {
    pub fn new(x: Vec<f64>, eps: f64) -> Self {
        Self { x, eps }
    }
}

/// Checks that a dataset is non-empty, finite, and of one input dimension,
/// returning that dimension.
pub fn check_samples(data: &[ErrorSample]) -> Result<usize> {
    let first = data.first().ok_or_else(|| Error::domain("no error samples"))?;
    let d = first.x.len();
    for (i, s) in data.iter().enumerate() {
        if s.x.len() != d {
            return Err(Error::Dimension { expected: d, got: s.x.len() });
        }
        if !s.eps.is_finite() || s.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite value in sample {i}")));
        }
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArWeights {
    pub beta: f64,
    pub crps_min_total: f64,
    pub rs_min_val: f64,
}

impl ArWeights {
    /// A hand-picked β, bypassing the automatic weighting.
    pub fn manual(beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::domain(format!("beta must lie in [0, 1], got {beta}")));
        }
        Ok(Self { beta, crps_min_total: f64::NAN, rs_min_val: f64::NAN })
    }
}

/// `(√(log 4) / 2N) Σ |ε_i|`.
pub fn crps_min_total(eps: &[f64]) -> Result<f64> {
    if eps.is_empty() {
        return Err(Error::domain("no errors given"));
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::domain("non-finite error"));
    }
    let n = eps.len() as f64;
    let sum: f64 = eps.iter().map(|e| e.abs()).sum();
    Ok((4f64.ln()).sqrt() / (2.0 * n) * sum)
}

/// β from the errors alone; both minima are frozen into the returned weights.
pub fn compute_beta(eps: &[f64], drop_constant: bool) -> Result<ArWeights> {
    let crps_min = crps_min_total(eps)?;
    let rs_min_val = rs_min(eps.len(), drop_constant);
    let denom = crps_min + rs_min_val;
    let beta = if denom > 0.0 { rs_min_val / denom } else { 0.5 };
    Ok(ArWeights { beta, crps_min_total: crps_min, rs_min_val })
}

fn check_inputs(sigmas: &[f64], eps: &[f64]) -> Result<()> {
    if sigmas.len() != eps.len() {
        return Err(Error::Dimension { expected: eps.len(), got: sigmas.len() });
    }
    if eps.is_empty() {
        return Err(Error::domain("no errors given"));
    }
    if let Some(s) = sigmas.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(Error::domain(format!("sigma must be positive and finite, got {s}")));
    }
    if eps.iter().any(|e| !e.is_finite()) {
        return Err(Error::domain("non-finite error"));
    }
    Ok(())
}

/// Evaluates the AR cost and, if `grad` is given, its gradient with respect
/// to `σ`. Ranks come from a stable sort of `η` and are treated as constant
/// when differentiating. Inputs are assumed valid.
pub(crate) fn eval_unchecked(
    sigmas: &[f64],
    eps: &[f64],
    weights: &ArWeights,
    drop_constant: bool,
    grad: Option<&mut [f64]>,
) -> f64 {
    let n = eps.len();
    let nf = n as f64;
    let beta = weights.beta;
    let etas: Vec<f64> = eps
        .iter()
        .zip(sigmas)
        .map(|(e, s)| e / (std::f64::consts::SQRT_2 * s))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| etas[a].total_cmp(&etas[b]));

    let crps_sum: f64 = eps.iter().zip(sigmas).map(|(e, s)| crps_raw(*e, *s)).sum();
    let rs_sum: f64 = order
        .iter()
        .enumerate()
        .map(|(k, &i)| rs_term(k + 1, etas[i], nf))
        .sum();
    let rs = if drop_constant { rs_sum } else { rs_sum - RS_CONSTANT };

    if let Some(g) = grad {
        for (k, &i) in order.iter().enumerate() {
            g[i] = beta / nf * crps_dsigma_raw(eps[i], sigmas[i])
                + (1.0 - beta) * rs_dsigma_raw(k + 1, etas[i], sigmas[i], nf);
        }
    }
    beta * crps_sum / nf + (1.0 - beta) * rs
}

/// The AR cost of a `σ` vector against fixed errors.
pub fn ar_cost(sigmas: &[f64], eps: &[f64], weights: &ArWeights, drop_constant: bool) -> Result<f64> {
    check_inputs(sigmas, eps)?;
    Ok(eval_unchecked(sigmas, eps, weights, drop_constant, None))
}

/// Gradient of [`ar_cost`] with respect to each `σ_i`.
pub fn ar_grad(
    sigmas: &[f64],
    eps: &[f64],
    weights: &ArWeights,
    drop_constant: bool,
) -> Result<Vec<f64>> {
    Ok(ar_cost_grad(sigmas, eps, weights, drop_constant)?.1)
}

/// Cost and gradient in one pass.
pub fn ar_cost_grad(
    sigmas: &[f64],
    eps: &[f64],
    weights: &ArWeights,
    drop_constant: bool,
) -> Result<(f64, Vec<f64>)> {
    check_inputs(sigmas, eps)?;
    let mut g = vec![0.0; eps.len()];
    let v = eval_unchecked(sigmas, eps, weights, drop_constant, Some(&mut g));
    Ok((v, g))
}

/// Mean CRPS and reliability score as separate terms, useful for reports.
pub fn ar_terms(sigmas: &[f64], eps: &[f64], drop_constant: bool) -> Result<(f64, f64)> {
    check_inputs(sigmas, eps)?;
    let n = eps.len() as f64;
    let crps = eps.iter().zip(sigmas).map(|(e, s)| crps_raw(*e, *s)).sum::<f64>() / n;
    let mut etas: Vec<f64> = eps
        .iter()
        .zip(sigmas)
        .map(|(e, s)| e / (std::f64::consts::SQRT_2 * s))
        .collect();
    etas.sort_by(f64::total_cmp);
    Ok((crps, crate::scores::rs_sorted(&etas, drop_constant)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scores::crps_sigma_min;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn crps_min_examples() {
        assert_eq!(crps_min_total(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let one = crps_min_total(&[1.0]).unwrap();
        assert!((one - 0.588_705_011_257_737_3).abs() < 1e-15);
        assert!((crps_min_total(&[1.0, -1.0]).unwrap() - one).abs() < 1e-15);
        assert!(crps_min_total(&[]).is_err());
    }

    #[test]
    fn beta_examples() {
        let w = compute_beta(&[0.0; 5], false).unwrap();
        assert_eq!(w.beta, 1.0);

        let eps: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 0.4 } else { -0.4 }).collect();
        let w = compute_beta(&eps, true).unwrap();
        // independent evaluation of both minima
        let rs_ref = 0.398_978_822_334_79;
        let crps_ref = 0.4 * (4f64.ln()).sqrt() / 2.0;
        assert!((w.rs_min_val - rs_ref).abs() < 1e-12);
        assert!((w.crps_min_total - crps_ref).abs() < 1e-15);
        assert!((w.beta - rs_ref / (rs_ref + crps_ref)).abs() < 1e-12);
        assert!((w.beta - 0.629).abs() < 1e-3);
    }

    #[test]
    fn beta_decreases_with_error_scale() {
        let mut last = f64::INFINITY;
        for k in 1..20 {
            let scale = k as f64 * 0.1;
            let eps: Vec<f64> = (0..30).map(|i| scale * ((i as f64) - 14.5) / 10.0).collect();
            let b = compute_beta(&eps, true).unwrap().beta;
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn manual_beta() {
        assert!(ArWeights::manual(0.3).is_ok());
        assert!(ArWeights::manual(1.3).is_err());
    }

    #[test]
    fn input_validation() {
        let w = ArWeights::manual(0.5).unwrap();
        assert!(matches!(ar_cost(&[1.0], &[1.0, 2.0], &w, true), Err(Error::Dimension { .. })));
        assert!(ar_cost(&[0.0], &[1.0], &w, true).is_err());
        assert!(ar_cost(&[], &[], &w, true).is_err());
        assert!(ar_grad(&[-1.0], &[1.0], &w, true).is_err());
    }

    #[test]
    fn crps_optimal_sigmas_give_constant_eta() {
        let eps = [0.3, -1.2, 0.8, 2.0, -0.1];
        let sig: Vec<f64> = eps.iter().map(|e| crps_sigma_min(*e)).collect();
        let w = compute_beta(&eps, false).unwrap();
        for (e, s) in eps.iter().zip(&sig) {
            let eta = e.abs() / (std::f64::consts::SQRT_2 * s);
            assert!((eta - 0.5 * (4f64.ln()).sqrt()).abs() < 1e-14);
        }
        let (_, rs) = ar_terms(&sig, &eps, false).unwrap();
        assert!(rs > rs_min(eps.len(), false));
        assert!(ar_cost(&sig, &eps, &w, false).unwrap().is_finite());
    }

    #[test]
    fn joint_scaling() {
        let eps = [0.3, -1.2, 0.8, 2.0, -0.1];
        let sig = [0.5, 0.9, 0.2, 1.1, 0.05];
        let c = 3.7;
        let (crps, rs) = ar_terms(&sig, &eps, true).unwrap();
        let eps2: Vec<f64> = eps.iter().map(|e| c * e).collect();
        let sig2: Vec<f64> = sig.iter().map(|s| c * s).collect();
        let (crps2, rs2) = ar_terms(&sig2, &eps2, true).unwrap();
        assert!((crps2 - c * crps).abs() < 1e-13);
        assert!((rs2 - rs).abs() < 1e-13);
        // scaling σ alone does change RS
        let sig3: Vec<f64> = sig.iter().map(|s| c * s).collect();
        let (_, rs3) = ar_terms(&sig3, &eps, true).unwrap();
        assert!((rs3 - rs).abs() > 1e-3);
    }

    fn brute_force_single(eps: f64, w: &ArWeights) -> f64 {
        // coarse grid then a fine 1e-4 grid around the best cell
        let cost = |s: f64| ar_cost(&[s], &[eps], w, true).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..=1000 {
            let s = k as f64 * 0.01;
            let c = cost(s);
            if c < best.0 {
                best = (c, s);
            }
        }
        let centre = best.1;
        for k in -100..=100 {
            let s = centre + k as f64 * 1e-4;
            if s <= 0.0 {
                continue;
            }
            let c = cost(s);
            if c < best.0 {
                best = (c, s);
            }
        }
        best.1
    }

    #[test]
    fn single_point_minimum_is_stationary() {
        let w = compute_beta(&[1.0], true).unwrap();
        let s = brute_force_single(1.0, &w);
        let g = ar_grad(&[s], &[1.0], &w, true).unwrap()[0];
        // within one grid cell of the stationary point
        let curvature = (ar_grad(&[s + 1e-4], &[1.0], &w, true).unwrap()[0] - g) / 1e-4;
        assert!(g.abs() <= curvature.abs() * 1e-4 + 1e-9, "grad {g}");
    }

    #[test]
    fn zero_errors_gradient() {
        let eps = [0.0; 6];
        let sig = [0.3, 1.0, 2.0, 0.7, 1.1, 0.2];
        let w = compute_beta(&eps, true).unwrap();
        let g = ar_grad(&sig, &eps, &w, true).unwrap();
        for gi in g {
            assert!((gi - w.beta * 0.233_694_977_255_109_07 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = 20;
            let eps: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let sig: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
            let w = compute_beta(&eps, true).unwrap();
            let g = ar_grad(&sig, &eps, &w, true).unwrap();
            for i in 0..n {
                let h = 1e-6 * sig[i].max(1.0);
                let mut up = sig.clone();
                up[i] += h;
                let mut dn = sig.clone();
                dn[i] -= h;
                let fd = (ar_cost(&up, &eps, &w, true).unwrap() - ar_cost(&dn, &eps, &w, true).unwrap())
                    / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-4), "{fd} vs {}", g[i]);
            }
        }
    }

    proptest! {
        #[test]
        fn rs_term_bounded_below(eps in proptest::collection::vec(-3.0..3.0f64, 1..30),
                                 seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sig: Vec<f64> = eps.iter().map(|_| rng.random_range(0.01..5.0)).collect();
            let (_, rs) = ar_terms(&sig, &eps, false).unwrap();
            prop_assert!(rs >= rs_min(eps.len(), false) - 1e-12);
            let w = compute_beta(&eps, false).unwrap();
            let ar = ar_cost(&sig, &eps, &w, false).unwrap();
            prop_assert!(ar >= (1.0 - w.beta) * rs_min(eps.len(), false) - 1e-12);
        }
    }
}
