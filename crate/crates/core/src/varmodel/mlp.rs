//! Feed-forward noise network `d → 20 → 5 → 1`.
//!
//! Hidden activations are `tanh` and the symmetric saturating linear
//! function (identity on `[−1, 1]`, clamped outside). The output unit applies
//! `exp(−z²)`, so the network predicts `σ ∈ (0, output_scale]`; a `1e−9`
//! share of the output is constant to keep `σ` strictly positive even when
//! `exp(−z²)` underflows.
//!
//! Inputs are mapped to `[−1, 1]` per dimension using the training range.
//!
//! Training minimizes `AR + λ · mean(w²)` over all weights and biases on a
//! random 70% of the data, stopping once the AR cost on the remaining 30% has
//! not improved for 10 iterations. The penalty is meant to be a share
//! `γ = 0.2` of the total. Since that share moves with the weights, `λ` is
//! found by fixed-point rounds: a first fit with `λ = 0`, then
//! `λ ← γ/(1 − γ) · AR / mean(w²)` at the current weights and a warm-started
//! refit, three times. Five restarts from independent Glorot-uniform
//! initializations (zero biases) are run and the one with the smallest final
//! objective is kept.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, InputMatrix, Parametric};
use crate::arcost::{self, check_samples, compute_beta, ArWeights, ErrorSample};
use crate::optim::{minimize_with_validation, multi_restart, OptimOptions, OptimTrace};
use crate::{Error, Result};

pub const HIDDEN_1: usize = 20;
pub const HIDDEN_2: usize = 5;
const OUTPUT_FLOOR: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Tanh,
    /// Symmetric saturating linear.
    Satlins,
    /// `exp(−z²)`, floored at `1e−9`.
    SquaredExp,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Satlins => z.clamp(-1.0, 1.0),
            Activation::SquaredExp => (1.0 - OUTPUT_FLOOR) * (-z * z).exp() + OUTPUT_FLOOR,
        }
    }

    /// Derivative given the pre-activation `z` and the output `a`.
    #[inline]
    fn deriv(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Satlins => {
                if z.abs() < 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::SquaredExp => -2.0 * z * (1.0 - OUTPUT_FLOOR) * (-z * z).exp(),
        }
    }
}

/// Dense layer; `weights` is row-major `outputs × inputs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
            activation,
        }
    }

    fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    #[inline]
    fn forward(&self, input: &[f64], z: &mut [f64], a: &mut [f64]) {
        for j in 0..self.outputs {
            let row = &self.weights[j * self.inputs..(j + 1) * self.inputs];
            let zj = row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + self.biases[j];
            z[j] = zj;
            a[j] = self.activation.apply(zj);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// Per-dimension input minimum of the `[−1, 1]` mapping.
    pub input_min: Vec<f64>,
    /// Per-dimension gain `2 / (max − min)` of the `[−1, 1]` mapping.
    pub input_gain: Vec<f64>,
    pub layers: Vec<Layer>,
    pub output_scale: f64,
}

impl MlpModel {
    /// All weights and biases zero; predicts `σ = output_scale` everywhere.
    pub fn zeros(input_dim: usize, output_scale: f64) -> Self {
        Self {
            input_min: vec![-1.0; input_dim],
            input_gain: vec![1.0; input_dim],
            layers: vec![
                Layer::zeros(input_dim, HIDDEN_1, Activation::Tanh),
                Layer::zeros(HIDDEN_1, HIDDEN_2, Activation::Satlins),
                Layer::zeros(HIDDEN_2, 1, Activation::SquaredExp),
            ],
            output_scale,
        }
    }

    /// Weights uniform in `±√(6 / (fan_in + fan_out))`, biases zero.
    pub fn random(input_dim: usize, output_scale: f64, seed: u64) -> Self {
        let mut m = Self::zeros(input_dim, output_scale);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        m.init_weights(&mut rng);
        m
    }

    fn init_weights<R: Rng>(&mut self, rng: &mut R) {
        for layer in &mut self.layers {
            let r = (6.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-r..=r);
            }
            layer.biases.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    /// Sets the output bias so that a network with zero last-layer weights
    /// predicts `sigma` (clamped to `[1e−3, 1] · output_scale`).
    pub fn set_initial_sigma(&mut self, sigma: f64) {
        let r = (sigma / self.output_scale).clamp(1e-3, 1.0);
        let last = self.layers.last_mut().expect("output layer");
        last.biases[0] = (-r.ln()).sqrt();
    }

    /// Sets the input mapping so that the given rows span `[−1, 1]`.
    pub fn fit_input_range(&mut self, inputs: &InputMatrix) {
        let d = inputs.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for r in inputs.rows() {
            for k in 0..d {
                lo[k] = lo[k].min(r[k]);
                hi[k] = hi[k].max(r[k]);
            }
        }
        for k in 0..d {
            let span = hi[k] - lo[k];
            if span > 0.0 {
                self.input_min[k] = lo[k];
                self.input_gain[k] = 2.0 / span;
            } else {
                self.input_min[k] = lo[k] - 1.0;
                self.input_gain[k] = 1.0;
            }
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_min.len()
    }

    fn normalize(&self, x: &[f64], out: &mut [f64]) {
        for k in 0..x.len() {
            out[k] = (x[k] - self.input_min[k]) * self.input_gain[k] - 1.0;
        }
    }

    pub fn predict_sigma(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x)?;
        let mut input = vec![0.0; x.len()];
        self.normalize(x, &mut input);
        for layer in &self.layers {
            let mut z = vec![0.0; layer.outputs];
            let mut a = vec![0.0; layer.outputs];
            layer.forward(&input, &mut z, &mut a);
            input = a;
        }
        Ok(self.output_scale * input[0])
    }

    /// Forward pass over all rows, keeping pre-activations and activations
    /// per layer (row-major `rows × width`).
    fn forward_batch(&self, inputs: &InputMatrix) -> (Vec<f64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n = inputs.len();
        let d = inputs.dim();
        let mut xn = vec![0.0; n * d];
        for (i, r) in inputs.rows().enumerate() {
            self.normalize(r, &mut xn[i * d..(i + 1) * d]);
        }
        let mut zs: Vec<Vec<f64>> = self.layers.iter().map(|l| vec![0.0; n * l.outputs]).collect();
        let mut acts: Vec<Vec<f64>> = zs.clone();
        for i in 0..n {
            for (l, layer) in self.layers.iter().enumerate() {
                let w = layer.outputs;
                let (before, after) = acts.split_at_mut(l);
                let input: &[f64] = if l == 0 {
                    &xn[i * d..(i + 1) * d]
                } else {
                    let prev = self.layers[l - 1].outputs;
                    &before[l - 1][i * prev..(i + 1) * prev]
                };
                layer.forward(input, &mut zs[l][i * w..(i + 1) * w], &mut after[0][i * w..(i + 1) * w]);
            }
        }
        (xn, zs, acts)
    }
}

impl Parametric for MlpModel {
    fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.biases);
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&p[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
    }

    fn sigmas(&self, inputs: &InputMatrix) -> Vec<f64> {
        let (_, _, acts) = self.forward_batch(inputs);
        acts.last().expect("output layer").iter().map(|a| self.output_scale * a).collect()
    }

    fn cost_grad<F>(&self, inputs: &InputMatrix, outer: F) -> (f64, Vec<f64>)
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let n = inputs.len();
        let d = inputs.dim();
        let (xn, zs, acts) = self.forward_batch(inputs);
        let sig: Vec<f64> = acts.last().expect("output layer").iter().map(|a| self.output_scale * a).collect();
        let (v, up) = outer(&sig);

        let n_layers = self.layers.len();
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.n_params();
        }
        let mut grad = vec![0.0; off];
        let max_width = self.layers.iter().map(|l| l.outputs).max().unwrap_or(1);
        let mut delta = vec![0.0; max_width];
        let mut next_delta = vec![0.0; max_width];

        for i in 0..n {
            if up[i] == 0.0 {
                continue;
            }
            let last = &self.layers[n_layers - 1];
            let (z, a) = (zs[n_layers - 1][i], acts[n_layers - 1][i]);
            delta[0] = up[i] * self.output_scale * last.activation.deriv(z, a);
            for l in (0..n_layers).rev() {
                let layer = &self.layers[l];
                let width = layer.outputs;
                let input: &[f64] = if l == 0 {
                    &xn[i * d..(i + 1) * d]
                } else {
                    let prev = self.layers[l - 1].outputs;
                    &acts[l - 1][i * prev..(i + 1) * prev]
                };
                let g = &mut grad[offsets[l]..offsets[l] + layer.n_params()];
                let (gw, gb) = g.split_at_mut(layer.weights.len());
                for j in 0..width {
                    let dj = delta[j];
                    gb[j] += dj;
                    for (gwk, xk) in gw[j * layer.inputs..(j + 1) * layer.inputs].iter_mut().zip(input) {
                        *gwk += dj * xk;
                    }
                }
                if l > 0 {
                    let prev = &self.layers[l - 1];
                    let pw = prev.outputs;
                    for k in 0..pw {
                        let s: f64 =
                            (0..width).map(|j| layer.weights[j * layer.inputs + k]).zip(&delta).map(|(w, d)| w * d).sum();
                        let (zk, ak) = (zs[l - 1][i * pw + k], acts[l - 1][i * pw + k]);
                        next_delta[k] = s * prev.activation.deriv(zk, ak);
                    }
                    std::mem::swap(&mut delta, &mut next_delta);
                }
            }
        }
        (v, grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpOptions {
    pub optim: OptimOptions,
    pub restarts: usize,
    /// Share of the data used for training; the rest drives early stopping.
    pub train_fraction: f64,
    /// Share `γ` of the weight penalty in the training objective.
    pub reg_share: f64,
    /// Updates of the penalty weight after the unpenalized first fit.
    pub reg_rounds: usize,
    pub output_scale: f64,
    pub drop_constant: bool,
    /// Start the output bias at the value giving `σ = std(ε)` instead of 0.
    pub output_bias_from_errors: bool,
}

impl Default for MlpOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions { max_iter: 1000, patience: 10, ..OptimOptions::default() },
            restarts: 5,
            train_fraction: 0.7,
            reg_share: 0.2,
            reg_rounds: 3,
            output_scale: 1.0,
            drop_constant: true,
            output_bias_from_errors: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MlpFit {
    pub model: MlpModel,
    /// Final training objective of each restart; `None` if it failed.
    pub restart_costs: Vec<Option<f64>>,
    pub best_index: usize,
    /// Penalty weight of the last round of the selected restart.
    pub lambda: f64,
    /// Optimizer trace of each round of the selected restart.
    pub traces: Vec<OptimTrace>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Training objective `AR + λ·mean(w²)` and its gradient.
pub(crate) fn regularized_objective(
    model: &MlpModel,
    inputs: &InputMatrix,
    eps: &[f64],
    weights: &ArWeights,
    drop_constant: bool,
    lambda: f64,
) -> (f64, Vec<f64>) {
    let (ar, mut g) = super::model_ar(model, inputs, eps, weights, drop_constant);
    let p = model.params();
    let np = p.len() as f64;
    if lambda == 0.0 {
        return (ar, g);
    }
    for (gk, wk) in g.iter_mut().zip(&p) {
        *gk += lambda * 2.0 * wk / np;
    }
    (ar + lambda * mean_square(&p), g)
}

fn mean_square(p: &[f64]) -> f64 {
    p.iter().map(|w| w * w).sum::<f64>() / p.len() as f64
}

/// `λ` for which the penalty `λ·mean(w²)` is a share `γ` of `AR + λ·mean(w²)`.
pub(crate) fn penalty_weight(ar: f64, msw: f64, share: f64) -> f64 {
    if share == 0.0 || !(msw > 0.0) || !ar.is_finite() {
        return 0.0;
    }
    share / (1.0 - share) * ar.max(0.0) / msw
}

/// Trains the noise network on error samples.
pub fn fit_mlp(data: &[ErrorSample], opts: &MlpOptions, seed: u64) -> Result<MlpFit> {
    let d = check_samples(data)?;
    if data.len() < 10 {
        return Err(Error::domain(format!("MLP fit needs at least 10 samples, got {}", data.len())));
    }
    if !(0.0 < opts.train_fraction && opts.train_fraction < 1.0) {
        return Err(Error::domain("train fraction must lie in (0, 1)"));
    }
    if !(0.0..1.0).contains(&opts.reg_share) {
        return Err(Error::domain("regularization share must lie in [0, 1)"));
    }
    if opts.restarts == 0 {
        return Err(Error::domain("at least one restart is needed"));
    }
    let n = data.len();
    let n_train = ((n as f64) * opts.train_fraction).round() as usize;
    if n_train < 1 || n_train >= n {
        return Err(Error::domain("data too small for a train/validation split"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let train_idx = order[..n_train].to_vec();
    let val_idx = order[n_train..].to_vec();
    let restart_seeds: Vec<u64> = (0..opts.restarts).map(|_| rng.random()).collect();

    let all = InputMatrix::from_samples(data)?;
    let train_x = all.select(&train_idx);
    let val_x = all.select(&val_idx);
    let train_eps: Vec<f64> = train_idx.iter().map(|&i| data[i].eps).collect();
    let val_eps: Vec<f64> = val_idx.iter().map(|&i| data[i].eps).collect();
    let train_w = compute_beta(&train_eps, opts.drop_constant)?;
    let val_w = compute_beta(&val_eps, opts.drop_constant)?;

    let mut template = MlpModel::zeros(d, opts.output_scale);
    template.fit_input_range(&train_x);
    let init_sigma = super::error_std(&train_eps);

    type Candidate = (MlpModel, f64, Vec<OptimTrace>);
    let fit_one = |s: u64| -> Result<(Candidate, f64)> {
        let mut model = template.clone();
        model.init_weights(&mut ChaCha8Rng::seed_from_u64(s));
        if opts.output_bias_from_errors {
            model.set_initial_sigma(init_sigma);
        }
        let mut scratch = model.clone();
        let mut val_model = model.clone();
        let mut lambda = 0.0;
        let mut traces = Vec::with_capacity(opts.reg_rounds + 1);
        let mut value = f64::INFINITY;
        for round in 0..=opts.reg_rounds {
            if round > 0 {
                let (ar, _) = regularized_objective(&model, &train_x, &train_eps, &train_w, opts.drop_constant, 0.0);
                lambda = penalty_weight(ar, mean_square(&model.params()), opts.reg_share);
            }
            let m = minimize_with_validation(
                |p, g| {
                    scratch.set_params(p);
                    let (v, grad) =
                        regularized_objective(&scratch, &train_x, &train_eps, &train_w, opts.drop_constant, lambda);
                    g.copy_from_slice(&grad);
                    v
                },
                &model.params(),
                &opts.optim,
                |p| {
                    val_model.set_params(p);
                    let sig = val_model.sigmas(&val_x);
                    arcost::ar_cost(&sig, &val_eps, &val_w, opts.drop_constant).unwrap_or(f64::INFINITY)
                },
            )?;
            model.set_params(&m.x);
            value = m.value;
            traces.push(m.trace);
        }
        Ok(((model, lambda, traces), value))
    };
    let r = multi_restart(fit_one, &restart_seeds)?;
    let (model, lambda, traces) = r.best;
    Ok(MlpFit {
        model,
        restart_costs: r.costs,
        best_index: r.best_index,
        lambda,
        traces,
        train_indices: train_idx,
        validation_indices: val_idx,
    })
}
