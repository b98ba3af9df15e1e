use serde::{Deserialize, Serialize};

use super::{error_std, model_ar, InputMatrix, Parametric};
use crate::arcost::{check_samples, compute_beta, ErrorSample};
use crate::optim::{minimize, Minimum, OptimOptions};
use crate::{Error, Result};

/// One free noise level per training point, stored as `log σ_i`.
///
/// When the training inputs are kept, [`predict_sigma`](Self::predict_sigma)
/// answers with the level of the nearest training point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerPointModel {
    pub log_sigmas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<Vec<f64>>,
}

impl PerPointModel {
    pub fn new(log_sigmas: Vec<f64>) -> Self {
        Self { log_sigmas, inputs: Vec::new() }
    }

    pub fn sigma(&self, i: usize) -> f64 {
        self.log_sigmas[i].exp()
    }

    pub fn sigmas_vec(&self) -> Vec<f64> {
        self.log_sigmas.iter().map(|l| l.exp()).collect()
    }

    pub fn input_dim(&self) -> Option<usize> {
        self.inputs.first().map(Vec::len)
    }

    pub fn predict_sigma(&self, x: &[f64]) -> Result<f64> {
        let d = self
            .input_dim()
            .ok_or_else(|| Error::Unsupported("per-point model without stored inputs".into()))?;
        super::check_dim(d, x)?;
        let nearest = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, p)| (i, p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .expect("non-empty inputs");
        Ok(self.sigma(nearest))
    }
}

impl Parametric for PerPointModel {
    fn n_params(&self) -> usize {
        self.log_sigmas.len()
    }

    fn params(&self) -> Vec<f64> {
        self.log_sigmas.clone()
    }

    fn set_params(&mut self, p: &[f64]) {
        self.log_sigmas.copy_from_slice(p);
    }

    fn sigmas(&self, _inputs: &InputMatrix) -> Vec<f64> {
        self.sigmas_vec()
    }

    fn cost_grad<F>(&self, _inputs: &InputMatrix, outer: F) -> (f64, Vec<f64>)
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let sig = self.sigmas_vec();
        let (v, g) = outer(&sig);
        // dσ/d log σ = σ
        (v, g.iter().zip(&sig).map(|(g, s)| g * s).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerPointOptions {
    pub optim: OptimOptions,
    pub drop_constant: bool,
}

impl Default for PerPointOptions {
    fn default() -> Self {
        Self {
            optim: OptimOptions { max_iter: 2000, ..OptimOptions::default() },
            drop_constant: true,
        }
    }
}

/// Minimizes the AR cost directly over the `N` noise levels, starting from
/// the standard deviation of the errors.
pub fn fit_per_point(data: &[ErrorSample], opts: &PerPointOptions) -> Result<(PerPointModel, Minimum)> {
    check_samples(data)?;
    let eps: Vec<f64> = data.iter().map(|s| s.eps).collect();
    let weights = compute_beta(&eps, opts.drop_constant)?;
    let inputs = InputMatrix::from_samples(data)?;
    let start = error_std(&eps).max(1e-8).ln();
    let mut model = PerPointModel::new(vec![start; data.len()]);
    let x0 = model.params();
    let mut scratch = model.clone();
    let m = minimize(
        |p, g| {
            scratch.set_params(p);
            let (v, grad) = model_ar(&scratch, &inputs, &eps, &weights, opts.drop_constant);
            g.copy_from_slice(&grad);
            v
        },
        &x0,
        &opts.optim,
    )?;
    model.set_params(&m.x);
    model.inputs = data.iter().map(|s| s.x.clone()).collect();
    Ok((model, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arcost::ar_cost;
    use crate::scores::crps_sigma_min;
    use crate::varmodel::testutil::max_fd_error;

    fn samples(eps: &[f64]) -> Vec<ErrorSample> {
        eps.iter().enumerate().map(|(i, e)| ErrorSample::new(vec![i as f64], *e)).collect()
    }

    #[test]
    fn unit_sigmas() {
        let m = PerPointModel::new(vec![0.0; 4]);
        assert!(m.sigmas_vec().iter().all(|s| *s == 1.0));
        assert!(m.predict_sigma(&[0.0]).is_err());
    }

    #[test]
    fn nearest_neighbour_prediction() {
        let mut m = PerPointModel::new(vec![0.0, 1.0]);
        m.inputs = vec![vec![0.0], vec![1.0]];
        assert_eq!(m.predict_sigma(&[0.9]).unwrap(), 1f64.exp());
        assert!(m.predict_sigma(&[0.9, 1.0]).is_err());
    }

    #[test]
    fn beats_crps_only_and_grid() {
        for eps in [vec![0.7, 0.7], vec![0.5, 0.5, 0.5], vec![-1.0, 0.3, 0.9]] {
            let data = samples(&eps);
            let (model, _) = fit_per_point(&data, &PerPointOptions::default()).unwrap();
            let w = compute_beta(&eps, true).unwrap();
            let fitted = ar_cost(&model.sigmas_vec(), &eps, &w, true).unwrap();
            let crps_only: Vec<f64> = eps.iter().map(|e| crps_sigma_min(*e)).collect();
            assert!(fitted <= ar_cost(&crps_only, &eps, &w, true).unwrap() + 1e-12);
            // full grid over log σ for N ≤ 3
            let grid: Vec<f64> = (0..41).map(|k| (-3.0 + 0.1 * k as f64).exp()).collect();
            let n = eps.len();
            let mut idx = vec![0usize; n];
            loop {
                let sig: Vec<f64> = idx.iter().map(|&k| grid[k]).collect();
                assert!(fitted <= ar_cost(&sig, &eps, &w, true).unwrap() + 1e-9);
                let mut j = 0;
                while j < n {
                    idx[j] += 1;
                    if idx[j] < grid.len() {
                        break;
                    }
                    idx[j] = 0;
                    j += 1;
                }
                if j == n {
                    break;
                }
            }
        }
    }

    #[test]
    fn scale_equivariance() {
        let eps = vec![0.3, -0.8, 1.2, 0.05, -0.4, 0.9];
        let twice: Vec<f64> = eps.iter().map(|e| 2.0 * e).collect();
        let (a, _) = fit_per_point(&samples(&eps), &PerPointOptions::default()).unwrap();
        let (b, _) = fit_per_point(&samples(&twice), &PerPointOptions::default()).unwrap();
        for (sa, sb) in a.sigmas_vec().iter().zip(b.sigmas_vec()) {
            assert!((sb / sa - 2.0).abs() < 1e-3, "{sa} {sb}");
        }
    }

    #[test]
    fn empty_input() {
        assert!(fit_per_point(&[], &PerPointOptions::default()).is_err());
    }

    #[test]
    fn single_point_matches_brute_force() {
        let (model, _) = fit_per_point(&samples(&[1.0]), &PerPointOptions::default()).unwrap();
        let w = compute_beta(&[1.0], true).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for k in 1..=100_000 {
            let s = k as f64 * 1e-4;
            let c = ar_cost(&[s], &[1.0], &w, true).unwrap();
            if c < best.0 {
                best = (c, s);
            }
        }
        assert!((model.sigma(0) - best.1).abs() < 1e-4, "{} vs {}", model.sigma(0), best.1);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let eps = [0.3, -0.8, 1.2, 0.05, -0.4, 0.9, 0.2];
        let data = samples(&eps);
        let w = compute_beta(&eps, true).unwrap();
        let model = PerPointModel::new(vec![-0.5, 0.1, 0.3, -2.0, 0.0, 0.4, -1.0]);
        let coords: Vec<usize> = (0..eps.len()).collect();
        assert!(max_fd_error(&model, &data, &w, &coords) < 1e-4);
    }
}
