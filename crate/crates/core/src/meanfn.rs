//! Homoskedastic Gaussian-process regression used as the black-box mean.
//!
//! Squared-exponential kernel `k(x, x') = σ_f² exp(−‖x − x'‖² / 2ℓ²)` with an
//! isotropic length scale, zero prior mean and a constant noise variance.
//! Hyperparameters are fitted by minimizing the marginal negative log
//! likelihood in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::optim::{minimize, multi_restart, OptimOptions, OptimTrace};
use crate::varmodel::InputMatrix;
use crate::{Error, Result};

/// Largest diagonal jitter tried before giving up on a factorization.
pub const MAX_JITTER: f64 = 1e-6;

pub fn se_kernel(xi: &[f64], xj: &[f64], sigma_f: f64, ell: f64) -> Result<f64> {
    if !(ell > 0.0) {
        return Err(Error::domain(format!("length scale must be positive, got {ell}")));
    }
    if xi.len() != xj.len() {
        return Err(Error::Dimension { expected: xi.len(), got: xj.len() });
    }
    Ok(se(sq_dist(xi, xj), sigma_f, ell))
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

#[inline]
fn se(r2: f64, sigma_f: f64, ell: f64) -> f64 {
    sigma_f * sigma_f * (-r2 / (2.0 * ell * ell)).exp()
}

fn sq_dist_matrix(x: &InputMatrix) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| sq_dist(x.row(i), x.row(j)))
}

/// Cholesky factor of `K + noise·I`, escalating a diagonal jitter from
/// `1e−12` up to [`MAX_JITTER`] when needed. Returns the jitter used.
fn factor(r2: &DMatrix<f64>, sigma_f: f64, ell: f64, noise_var: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let n = r2.nrows();
    let base = r2.map(|d| se(d, sigma_f, ell)) + DMatrix::identity(n, n) * noise_var;
    let mut jitter = 0.0;
    loop {
        let k = if jitter > 0.0 { &base + DMatrix::identity(n, n) * jitter } else { base.clone() };
        if let Some(c) = Cholesky::new(k) {
            return Some((c, jitter));
        }
        jitter = if jitter == 0.0 { 1e-12 } else { jitter * 10.0 };
        if jitter > MAX_JITTER * (1.0 + 1e-9) {
            return None;
        }
    }
}

/// Serialized form of a [`GpModel`]; the factorization is rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct GpModelData {
    sigma_f: f64,
    ell: f64,
    noise_var: f64,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "GpModelData", into = "GpModelData")]
pub struct GpModel {
    pub sigma_f: f64,
    pub ell: f64,
    pub noise_var: f64,
    inputs: InputMatrix,
    targets: Vec<f64>,
    /// `(K + noise·I)⁻¹ y`.
    alpha: Vec<f64>,
    jitter: f64,
}

impl TryFrom<GpModelData> for GpModel {
    type Error = Error;

    fn try_from(d: GpModelData) -> Result<Self> {
        GpModel::new(InputMatrix::from_rows(&d.inputs)?, d.targets, d.sigma_f, d.ell, d.noise_var)
    }
}

impl From<GpModel> for GpModelData {
    fn from(m: GpModel) -> Self {
        GpModelData {
            sigma_f: m.sigma_f,
            ell: m.ell,
            noise_var: m.noise_var,
            inputs: m.inputs.rows().map(<[f64]>::to_vec).collect(),
            targets: m.targets,
        }
    }
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on training data.
    pub fn new(inputs: InputMatrix, targets: Vec<f64>, sigma_f: f64, ell: f64, noise_var: f64) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Dimension { expected: inputs.len(), got: targets.len() });
        }
        if inputs.is_empty() {
            return Err(Error::domain("GP needs at least one training point"));
        }
        if !(sigma_f > 0.0 && ell > 0.0 && noise_var >= 0.0) || !(sigma_f * ell * noise_var).is_finite() {
            return Err(Error::domain(format!(
                "invalid hyperparameters sigma_f={sigma_f}, ell={ell}, noise_var={noise_var}"
            )));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::domain("non-finite target"));
        }
        let r2 = sq_dist_matrix(&inputs);
        let (chol, jitter) = factor(&r2, sigma_f, ell, noise_var)
            .ok_or_else(|| Error::Numeric(format!("kernel matrix not positive definite with jitter {MAX_JITTER}")))?;
        let alpha = chol.solve(&DVector::from_column_slice(&targets));
        Ok(Self { sigma_f, ell, noise_var, inputs, targets, alpha: alpha.as_slice().to_vec(), jitter })
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.dim()
    }

    /// Diagonal jitter that was needed to factor the kernel matrix.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: x.len() });
        }
        Ok(self
            .inputs
            .rows()
            .zip(&self.alpha)
            .map(|(xi, a)| se(sq_dist(x, xi), self.sigma_f, self.ell) * a)
            .sum())
    }
}

pub fn gp_predict_mean(model: &GpModel, x: &[f64]) -> Result<f64> {
    model.predict_mean(x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpOptions {
    /// Fixed noise variance; learned when `None`.
    pub noise_var: Option<f64>,
    pub restarts: usize,
    pub optim: OptimOptions,
}

impl Default for GpOptions {
    fn default() -> Self {
        Self { noise_var: None, restarts: 3, optim: OptimOptions { max_iter: 200, ..OptimOptions::default() } }
    }
}

#[derive(Clone, Debug)]
pub struct GpFit {
    pub model: GpModel,
    /// Final negative log likelihood of each restart.
    pub restart_nll: Vec<Option<f64>>,
    pub trace: OptimTrace,
}

/// Marginal negative log likelihood and its gradient with respect to
/// `(log σ_f, log ℓ[, log noise])`. `+∞` when the kernel cannot be factored.
fn nll(r2: &DMatrix<f64>, y: &DVector<f64>, log_sf: f64, log_ell: f64, noise: f64, grad: &mut [f64]) -> f64 {
    let (sf, ell) = (log_sf.exp(), log_ell.exp());
    let Some((chol, _)) = factor(r2, sf, ell, noise) else {
        grad.iter_mut().for_each(|g| *g = 0.0);
        return f64::INFINITY;
    };
    let n = y.len();
    let alpha = chol.solve(y);
    let log_det: f64 = chol.l_dirty().diagonal().iter().take(n).map(|d| d.ln()).sum();
    let value = 0.5 * y.dot(&alpha) + log_det + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    // ∂/∂θ = −½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
    let w = &alpha * alpha.transpose() - chol.inverse();
    let (mut g_sf, mut g_ell, mut g_noise) = (0.0, 0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let kf = se(r2[(i, j)], sf, ell);
            let wij = w[(i, j)];
            g_sf += wij * 2.0 * kf;
            g_ell += wij * kf * r2[(i, j)] / (ell * ell);
        }
        g_noise += w[(j, j)] * noise;
    }
    grad[0] = -0.5 * g_sf;
    grad[1] = -0.5 * g_ell;
    if grad.len() > 2 {
        grad[2] = -0.5 * g_noise;
    }
    value
}

/// Fits the kernel hyperparameters by maximum marginal likelihood,
/// restarting from `opts.restarts` seeded initializations.
pub fn gp_fit(inputs: &InputMatrix, targets: &[f64], opts: &GpOptions, seed: u64) -> Result<GpFit> {
    let n = inputs.len();
    if n < 2 {
        return Err(Error::domain(format!("GP fit needs at least 2 points, got {n}")));
    }
    if targets.len() != n {
        return Err(Error::Dimension { expected: n, got: targets.len() });
    }
    if let Some(v) = opts.noise_var {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::domain(format!("invalid fixed noise variance {v}")));
        }
    }
    if opts.restarts == 0 {
        return Err(Error::domain("at least one restart is needed"));
    }
    let r2 = sq_dist_matrix(inputs);
    let y = DVector::from_column_slice(targets);
    let mean = targets.iter().sum::<f64>() / n as f64;
    let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = (var + mean * mean).sqrt().max(1e-3);
    let span = r2.max().sqrt().max(1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..opts.restarts)
        .map(|_| {
            let log_ell = (span * rng.random_range(0.05..0.5)).ln();
            let mut p = vec![scale.ln(), log_ell];
            if opts.noise_var.is_none() {
                p.push((scale * scale * rng.random_range(0.01..0.3)).ln());
            }
            p
        })
        .collect();
    let seeds: Vec<u64> = (0..starts.len() as u64).collect();

    let fixed_noise = opts.noise_var;
    let objective = |p: &[f64], g: &mut [f64]| {
        let noise = fixed_noise.unwrap_or_else(|| p[2].exp());
        nll(&r2, &y, p[0], p[1], noise, g)
    };
    let r = multi_restart(
        |s| {
            let m = minimize(objective, &starts[s as usize], &opts.optim)?;
            let v = m.value;
            Ok(((m.x, m.trace), v))
        },
        &seeds,
    )?;
    let (p, trace) = r.best;
    let noise = fixed_noise.unwrap_or_else(|| p[2].exp());
    let model = GpModel::new(inputs.clone(), targets.to_vec(), p[0].exp(), p[1].exp(), noise)?;
    Ok(GpFit { model, restart_nll: r.costs, trace })
}
