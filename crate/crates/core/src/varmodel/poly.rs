//! Polynomial noise model with incremental order selection.
//!
//! The order starts at zero with `θ₀ = std(ε)`. Each round appends a zero
//! coefficient, warm-starts BFGS from the previous solution, and compares the
//! AR cost with the previous round. The loop ends when the change is within
//! `tol`, when order 10 is reached, or when the warm start is already a local
//! minimum of the larger model.

use serde::{Deserialize, Serialize};

use super::{check_dim, error_std, model_ar, InputMatrix, Parametric};
use crate::arcost::{check_samples, compute_beta, ErrorSample};
use crate::optim::{minimize, OptimOptions, OptimTrace};
use crate::{Error, Result};

pub const MAX_ORDER: usize = 10;
/// Lower bound of the polynomial noise level.
pub const SIGMA_FLOOR: f64 = 1e-3;

/// `p` above `2·floor`; below it, an exponential blend that decays to
/// `floor` and matches value and slope at `2·floor`.
#[inline]
pub fn smooth_floor(p: f64, floor: f64) -> f64 {
    if p >= 2.0 * floor {
        p
    } else {
        floor + floor * ((p - 2.0 * floor) / floor).exp()
    }
}

#[inline]
fn smooth_floor_deriv(p: f64, floor: f64) -> f64 {
    if p >= 2.0 * floor {
        1.0
    } else {
        ((p - 2.0 * floor) / floor).exp()
    }
}

/// `σ(x) = floor(Σ θ_l (x / x_scale)^l)`.
///
/// Fitting sets `x_scale` to the largest `|x|` of the data, which keeps the
/// powers within `[−1, 1]` without moving the origin of the monomials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialModel {
    pub thetas: Vec<f64>,
    #[serde(default = "one")]
    pub x_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl PolynomialModel {
    /// Coefficients in the raw input `x`.
    pub fn new(thetas: Vec<f64>) -> Self {
        Self { thetas, x_scale: 1.0 }
    }

    pub fn order(&self) -> usize {
        self.thetas.len().saturating_sub(1)
    }

    #[inline]
    fn raw(&self, x: f64) -> f64 {
        let t = x / self.x_scale;
        self.thetas.iter().rev().fold(0.0, |acc, th| acc * t + th)
    }

    pub fn predict_sigma(&self, x: &[f64]) -> Result<f64> {
        check_dim(1, x)?;
        Ok(smooth_floor(self.raw(x[0]), SIGMA_FLOOR))
    }
}

impl Parametric for PolynomialModel {
    fn n_params(&self) -> usize {
        self.thetas.len()
    }

    fn params(&self) -> Vec<f64> {
        self.thetas.clone()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.thetas.clear();
        self.thetas.extend_from_slice(p);
    }

    fn sigmas(&self, inputs: &InputMatrix) -> Vec<f64> {
        inputs.rows().map(|r| smooth_floor(self.raw(r[0]), SIGMA_FLOOR)).collect()
    }

    fn cost_grad<F>(&self, inputs: &InputMatrix, outer: F) -> (f64, Vec<f64>)
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let raw: Vec<f64> = inputs.rows().map(|r| self.raw(r[0])).collect();
        let sig: Vec<f64> = raw.iter().map(|p| smooth_floor(*p, SIGMA_FLOOR)).collect();
        let (v, up) = outer(&sig);
        let mut g = vec![0.0; self.thetas.len()];
        for ((row, p), u) in inputs.rows().zip(&raw).zip(&up) {
            let t = row[0] / self.x_scale;
            let mut basis = u * smooth_floor_deriv(*p, SIGMA_FLOOR);
            for gl in g.iter_mut() {
                *gl += basis;
                basis *= t;
            }
        }
        (v, g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyOptions {
    /// Stop once the AR cost changes by at most this much between orders.
    pub tol: f64,
    pub optim: OptimOptions,
    pub drop_constant: bool,
}

impl Default for PolyOptions {
    fn default() -> Self {
        Self { tol: 1e-5, optim: OptimOptions::default(), drop_constant: true }
    }
}

#[derive(Clone, Debug)]
pub struct PolyFit {
    pub model: PolynomialModel,
    /// AR cost after each order, starting with the order-0 initial guess.
    pub costs: Vec<f64>,
    pub traces: Vec<OptimTrace>,
}

/// Grows a polynomial `σ(x)` order by order, each order warm-started from
/// the previous optimum.
pub fn fit_polynomial(data: &[ErrorSample], opts: &PolyOptions) -> Result<PolyFit> {
    let d = check_samples(data)?;
    if d != 1 {
        return Err(Error::Unsupported(format!("polynomial noise model needs 1-D inputs, got {d}-D")));
    }
    if data.len() < 2 {
        return Err(Error::domain("polynomial fit needs at least two samples"));
    }
    let eps: Vec<f64> = data.iter().map(|s| s.eps).collect();
    let weights = compute_beta(&eps, opts.drop_constant)?;
    let inputs = InputMatrix::from_samples(data)?;

    let (lo, hi) = inputs
        .rows()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[0]), hi.max(r[0])));
    let amax = lo.abs().max(hi.abs());
    let mut model = PolynomialModel {
        thetas: vec![error_std(&eps).max(2.0 * SIGMA_FLOOR)],
        x_scale: if amax > 0.0 { amax } else { 1.0 },
    };

    let cost_of = |m: &PolynomialModel| model_ar(m, &inputs, &eps, &weights, opts.drop_constant);
    let mut costs = vec![cost_of(&model).0];
    let mut traces = Vec::new();

    let mut order = 0;
    while order < MAX_ORDER {
        order += 1;
        let mut x0 = model.thetas.clone();
        x0.push(0.0);
        let mut scratch = model.clone();
        let m = minimize(
            |p, g| {
                scratch.set_params(p);
                let (v, grad) = cost_of(&scratch);
                g.copy_from_slice(&grad);
                v
            },
            &x0,
            &opts.optim,
        )?;
        let stalled = m.trace.iterations() == 0;
        traces.push(m.trace);
        if stalled {
            // the lower-order solution is already optimal for this order
            break;
        }
        model.set_params(&m.x);
        let prev = *costs.last().expect("initial cost");
        costs.push(m.value);
        if (prev - m.value).abs() <= opts.tol {
            break;
        }
    }
    Ok(PolyFit { model, costs, traces })
}
