//! Parameterizations of the noise level `σ(x)`.
//!
//! Three families are provided:
//!
//! - [`PerPointModel`]: one free `log σ_i` per training point;
//! - [`PolynomialModel`]: a polynomial of order at most 10 in a 1-D input,
//!   grown one order at a time (see [`fit_polynomial`]);
//! - [`MlpModel`]: a `d → 20 → 5 → 1` network with `tanh`, saturating-linear
//!   and `exp(−z²)` activations (see [`fit_mlp`]).
//!
//! All of them are fitted by minimizing the AR cost of the errors with the
//! BFGS engine in [`crate::optim`].

mod mlp;
mod perpoint;
mod poly;

pub use mlp::{fit_mlp, MlpFit, MlpModel, MlpOptions, HIDDEN_1, HIDDEN_2};
pub use perpoint::{fit_per_point, PerPointModel, PerPointOptions};
pub use poly::{fit_polynomial, smooth_floor, PolyFit, PolyOptions, PolynomialModel, MAX_ORDER, SIGMA_FLOOR};

use serde::{Deserialize, Serialize};

use crate::arcost::{self, check_samples, ArWeights, ErrorSample};
use crate::{Error, Result};

/// Row-major matrix of input points.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix {
    data: Vec<f64>,
    dim: usize,
}

impl InputMatrix {
    pub fn from_samples(samples: &[ErrorSample]) -> Result<Self> {
        let dim = check_samples(samples)?;
        let data = samples.iter().flat_map(|s| s.x.iter().copied()).collect();
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or_else(|| Error::domain("no input rows"))?;
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            if r.len() != dim {
                return Err(Error::Dimension { expected: dim, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { data, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }

    /// Rows selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self { data, dim: self.dim }
    }
}

/// A model whose parameters are fitted by gradient-based minimization.
pub trait Parametric {
    fn n_params(&self) -> usize;
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, p: &[f64]);

    /// `σ` at every input row.
    fn sigmas(&self, inputs: &InputMatrix) -> Vec<f64>;

    /// Evaluates `outer` on the `σ` vector, which returns a cost and its
    /// gradient with respect to `σ`, and pulls that gradient back to the
    /// parameters.
    fn cost_grad<F>(&self, inputs: &InputMatrix, outer: F) -> (f64, Vec<f64>)
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>);
}

/// AR cost of a parametric model on error data, with its parameter gradient.
/// Non-positive or non-finite `σ` make the cost `+∞`.
pub(crate) fn model_ar<M: Parametric>(
    model: &M,
    inputs: &InputMatrix,
    eps: &[f64],
    weights: &ArWeights,
    drop_constant: bool,
) -> (f64, Vec<f64>) {
    model.cost_grad(inputs, |sig| {
        if sig.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return (f64::INFINITY, vec![0.0; sig.len()]);
        }
        let mut g = vec![0.0; sig.len()];
        let v = arcost::eval_unchecked(sig, eps, weights, drop_constant, Some(&mut g));
        (v, g)
    })
}

/// Gradient of the AR cost with respect to the model parameters.
pub fn param_grad<M: Parametric>(
    model: &M,
    data: &[ErrorSample],
    weights: &ArWeights,
    drop_constant: bool,
) -> Result<Vec<f64>> {
    let inputs = InputMatrix::from_samples(data)?;
    let eps: Vec<f64> = data.iter().map(|s| s.eps).collect();
    let mut outcome = Ok(());
    let (_, g) = model.cost_grad(&inputs, |sig| match arcost::ar_cost_grad(sig, &eps, weights, drop_constant) {
        Ok(r) => r,
        Err(e) => {
            outcome = Err(e);
            (f64::NAN, vec![0.0; sig.len()])
        }
    });
    outcome.map(|_| g)
}

/// AR cost of a parametric model on error data.
pub fn model_cost<M: Parametric>(
    model: &M,
    data: &[ErrorSample],
    weights: &ArWeights,
    drop_constant: bool,
) -> Result<f64> {
    let inputs = InputMatrix::from_samples(data)?;
    let eps: Vec<f64> = data.iter().map(|s| s.eps).collect();
    arcost::ar_cost(&model.sigmas(&inputs), &eps, weights, drop_constant)
}

/// Population standard deviation of the errors; the starting noise level.
pub(crate) fn error_std(eps: &[f64]) -> f64 {
    let n = eps.len() as f64;
    let mean = eps.iter().sum::<f64>() / n;
    (eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Any fitted variance model, tagged by family for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum VarianceModel {
    PerPoint(PerPointModel),
    Polynomial(PolynomialModel),
    Mlp(MlpModel),
}

impl VarianceModel {
    pub fn predict_sigma(&self, x: &[f64]) -> Result<f64> {
        match self {
            VarianceModel::PerPoint(m) => m.predict_sigma(x),
            VarianceModel::Polynomial(m) => m.predict_sigma(x),
            VarianceModel::Mlp(m) => m.predict_sigma(x),
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            VarianceModel::PerPoint(m) => m.input_dim(),
            VarianceModel::Polynomial(_) => Some(1),
            VarianceModel::Mlp(m) => Some(m.input_dim()),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            VarianceModel::PerPoint(_) => "per-point",
            VarianceModel::Polynomial(_) => "polynomial",
            VarianceModel::Mlp(_) => "mlp",
        }
    }
}

impl From<PerPointModel> for VarianceModel {
    fn from(m: PerPointModel) -> Self {
        VarianceModel::PerPoint(m)
    }
}

impl From<PolynomialModel> for VarianceModel {
    fn from(m: PolynomialModel) -> Self {
        VarianceModel::Polynomial(m)
    }
}

impl From<MlpModel> for VarianceModel {
    fn from(m: MlpModel) -> Self {
        VarianceModel::Mlp(m)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Dimension { expected, got: x.len() });
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Largest relative error between the analytic parameter gradient and
    /// central differences over the given coordinates.
    pub fn max_fd_error<M: Parametric + Clone>(
        model: &M,
        data: &[ErrorSample],
        weights: &ArWeights,
        coords: &[usize],
    ) -> f64 {
        let g = param_grad(model, data, weights, true).unwrap();
        let p0 = model.params();
        let mut worst: f64 = 0.0;
        for &k in coords {
            let h = 1e-6 * p0[k].abs().max(1.0);
            let mut m = model.clone();
            let mut p = p0.clone();
            p[k] += h;
            m.set_params(&p);
            let up = model_cost(&m, data, weights, true).unwrap();
            p[k] -= 2.0 * h;
            m.set_params(&p);
            let dn = model_cost(&m, data, weights, true).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let err = (fd - g[k]).abs() / g[k].abs().max(1e-3);
            worst = worst.max(err);
        }
        worst
    }
}
