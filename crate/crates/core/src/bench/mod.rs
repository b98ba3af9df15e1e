//! Synthetic benchmarks: datasets, NLPD, and the multi-run protocol.
//!
//! One run samples a training set, fits the mean (a homoskedastic GP, or the
//! exact zero mean on 5D), fits a noise model to the training errors and
//! scores the NLPD on a fresh test set. Runs are seeded from a master seed,
//! the dataset and the run index only, so every estimator sees the same data
//! in the same run.

mod datasets;
mod metrics;

pub use datasets::{generate, BuiltIn, CustomDataset, Dataset, DatasetSpec, Sample};
pub use metrics::{mean_std, nlpd, pearson, quantile, quartiles, Quartiles};

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arcost::ErrorSample;
use crate::meanfn::{gp_fit, GpModel, GpOptions};
use crate::scores::ForecastTriple;
use crate::varmodel::{fit_mlp, fit_polynomial, InputMatrix, MlpOptions, PolyOptions, VarianceModel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Constant `σ` from the GP's learned noise variance.
    Gp,
    ArNn,
    ArPoly,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::Gp, Estimator::ArNn, Estimator::ArPoly];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Gp => "gp",
            Estimator::ArNn => "ar-nn",
            Estimator::ArPoly => "ar-poly",
        }
    }

    /// Column heading used in the summary table.
    pub fn label(self) -> &'static str {
        match self {
            Estimator::Gp => "GP",
            Estimator::ArNn => "AR-NN",
            Estimator::ArPoly => "AR-Poly",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gp" => Some(Estimator::Gp),
            "ar-nn" | "nn" => Some(Estimator::ArNn),
            "ar-poly" | "poly" => Some(Estimator::ArPoly),
            _ => None,
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n_runs: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Points of the 1-D `σ` recovery grid.
    pub grid_points: usize,
    pub master_seed: u64,
    pub gp: GpOptions,
    pub mlp: MlpOptions,
    pub poly: PolyOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_runs: 20,
            n_train: 100,
            n_test: 900,
            grid_points: 200,
            master_seed: 0,
            gp: GpOptions::default(),
            mlp: MlpOptions::default(),
            poly: PolyOptions::default(),
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of tags into an independent seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |s, &t| splitmix64(s ^ splitmix64(t)))
}

fn name_tag(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Seeds of one run: data, test set, mean fit, noise fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub data: u64,
    pub test: u64,
    pub mean: u64,
    pub fit: u64,
}

impl RunSeeds {
    pub fn new(master: u64, dataset: &Dataset, run: usize) -> Self {
        let base = [name_tag(dataset.name()), run as u64];
        let s = |k: u64| derive_seed(master, &[base[0], base[1], k]);
        Self { data: s(0), test: s(1), mean: s(2), fit: s(3) }
    }
}

/// Fitted mean function of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MeanModel {
    Exact,
    Gp(GpModel),
}

/// Fitted noise level of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SigmaModel {
    Constant { sigma: f64 },
    Fitted { model: VarianceModel },
}

impl SigmaModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            SigmaModel::Constant { sigma } => Ok(*sigma),
            SigmaModel::Fitted { model } => model.predict_sigma(x),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub seeds: RunSeeds,
    pub nlpd: f64,
    /// Mean absolute deviation of `σ̂` from the truth on the recovery grid.
    pub sigma_mad: Option<f64>,
    /// `σ̂` on the recovery grid (1-D datasets).
    pub sigma_grid: Option<Vec<f64>>,
    pub sigma_model: SigmaModel,
    pub wall_time_s: f64,
}

/// Across-run `σ̂` statistics on the recovery grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryBands {
    pub x: Vec<f64>,
    pub truth: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population standard deviation across runs.
    pub std: Vec<f64>,
}

impl RecoveryBands {
    /// Builds bands from per-run `σ̂` curves on a common grid.
    pub fn from_curves(x: Vec<f64>, truth: Vec<f64>, curves: &[&[f64]]) -> Result<Self> {
        if curves.is_empty() {
            return Err(Error::domain("no runs to aggregate"));
        }
        let m = x.len();
        if truth.len() != m || curves.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension { expected: m, got: truth.len() });
        }
        let mut mean = Vec::with_capacity(m);
        let mut std = Vec::with_capacity(m);
        let mut col = vec![0.0; curves.len()];
        for k in 0..m {
            for (c, v) in curves.iter().zip(col.iter_mut()) {
                *v = c[k];
            }
            let (mu, sd) = mean_std(&col);
            mean.push(mu);
            std.push(sd);
        }
        Ok(Self { x, truth, mean, std })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    /// Mean absolute deviation of the run-averaged `σ̂` from the truth.
    pub mad: f64,
    /// Share of grid points where the truth lies within mean ± 2 std.
    pub coverage: f64,
}

pub fn sigma_recovery(bands: &RecoveryBands) -> RecoverySummary {
    let m = bands.x.len() as f64;
    let mut mad = 0.0;
    let mut inside = 0usize;
    for k in 0..bands.x.len() {
        let d = (bands.mean[k] - bands.truth[k]).abs();
        mad += d;
        if d <= 2.0 * bands.std[k] {
            inside += 1;
        }
    }
    RecoverySummary { mad: mad / m, coverage: inside as f64 / m }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub estimator: Estimator,
    /// Successful runs, in run order.
    pub runs: Vec<RunResult>,
    /// Failed runs as `(run, message)`.
    pub failures: Vec<(usize, String)>,
    pub quartiles: Option<Quartiles>,
    pub bands: Option<RecoveryBands>,
}

impl ExperimentReport {
    pub fn nlpds(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.nlpd).collect()
    }

    pub fn recovery(&self) -> Option<RecoverySummary> {
        self.bands.as_ref().map(sigma_recovery)
    }
}

fn check_combination(dataset: &Dataset, estimator: Estimator) -> Result<()> {
    if estimator == Estimator::ArPoly && dataset.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "polynomial noise model needs 1-D inputs, dataset {} has {}",
            dataset.name(),
            dataset.dim()
        )));
    }
    if estimator == Estimator::Gp && dataset.exact_mean() {
        return Err(Error::Unsupported(format!("no GP mean is fitted on dataset {}", dataset.name())));
    }
    Ok(())
}

/// Fits the mean function of a run on its training sample.
pub fn fit_mean(dataset: &Dataset, train: &Sample, cfg: &ExperimentConfig, seed: u64) -> Result<MeanModel> {
    if dataset.exact_mean() {
        return Ok(MeanModel::Exact);
    }
    let x = InputMatrix::from_rows(&train.inputs)?;
    Ok(MeanModel::Gp(gp_fit(&x, &train.targets, &cfg.gp, seed)?.model))
}

fn predict_mean(dataset: &Dataset, mean: &MeanModel, x: &[f64]) -> Result<f64> {
    match mean {
        MeanModel::Exact => Ok(dataset.mean(x)),
        MeanModel::Gp(gp) => gp.predict_mean(x),
    }
}

/// Fits the noise model of `estimator` to training errors.
pub fn fit_sigma(
    estimator: Estimator,
    mean: &MeanModel,
    errors: &[ErrorSample],
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<SigmaModel> {
    Ok(match estimator {
        Estimator::Gp => match mean {
            MeanModel::Gp(gp) => SigmaModel::Constant { sigma: gp.noise_var.sqrt().max(f64::MIN_POSITIVE) },
            MeanModel::Exact => return Err(Error::Unsupported("GP noise level needs a fitted GP".into())),
        },
        Estimator::ArNn => SigmaModel::Fitted { model: fit_mlp(errors, &cfg.mlp, seed)?.model.into() },
        Estimator::ArPoly => SigmaModel::Fitted { model: fit_polynomial(errors, &cfg.poly)?.model.into() },
    })
}

/// Executes run `run` of an experiment.
pub fn run_one(dataset: &Dataset, estimator: Estimator, cfg: &ExperimentConfig, run: usize) -> Result<RunResult> {
    check_combination(dataset, estimator)?;
    let start = Instant::now();
    let seeds = RunSeeds::new(cfg.master_seed, dataset, run);
    let train = generate(&DatasetSpec { dataset: *dataset, n: cfg.n_train, seed: seeds.data });
    let mean = fit_mean(dataset, &train, cfg, seeds.mean)?;
    let errors = train
        .inputs
        .iter()
        .zip(&train.targets)
        .map(|(x, y)| Ok(ErrorSample::new(x.clone(), y - predict_mean(dataset, &mean, x)?)))
        .collect::<Result<Vec<_>>>()?;
    let sigma_model = fit_sigma(estimator, &mean, &errors, cfg, seeds.fit)?;

    let test = generate(&DatasetSpec { dataset: *dataset, n: cfg.n_test, seed: seeds.test });
    let triples = test
        .inputs
        .iter()
        .zip(&test.targets)
        .map(|(x, y)| ForecastTriple::new(predict_mean(dataset, &mean, x)?, sigma_model.predict(x)?, *y))
        .collect::<Result<Vec<_>>>()?;
    let nlpd = nlpd(&triples)?;

    let (sigma_grid, sigma_mad) = if dataset.dim() == 1 {
        let grid = dataset.grid(cfg.grid_points)?;
        let sig = grid.iter().map(|&g| sigma_model.predict(&[g])).collect::<Result<Vec<_>>>()?;
        let mad = grid.iter().zip(&sig).map(|(&g, s)| (s - dataset.sigma(&[g])).abs()).sum::<f64>() / grid.len() as f64;
        (Some(sig), Some(mad))
    } else {
        (None, None)
    };
    Ok(RunResult { run, seeds, nlpd, sigma_mad, sigma_grid, sigma_model, wall_time_s: start.elapsed().as_secs_f64() })
}

/// Runs `cfg.n_runs` independent runs (in parallel) and aggregates them.
pub fn run_experiment(dataset: &Dataset, estimator: Estimator, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    check_combination(dataset, estimator)?;
    let outcomes: Vec<Result<RunResult>> =
        (0..cfg.n_runs).into_par_iter().map(|r| run_one(dataset, estimator, cfg, r)).collect();
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(res) => runs.push(res),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    let nl: Vec<f64> = runs.iter().map(|r| r.nlpd).collect();
    let quartiles = if nl.is_empty() { None } else { Some(quartiles(&nl)?) };
    let bands = if dataset.dim() == 1 && !runs.is_empty() {
        let x = dataset.grid(cfg.grid_points)?;
        let truth = x.iter().map(|&g| dataset.sigma(&[g])).collect();
        let curves: Vec<&[f64]> = runs.iter().filter_map(|r| r.sigma_grid.as_deref()).collect();
        Some(RecoveryBands::from_curves(x, truth, &curves)?)
    } else {
        None
    };
    Ok(ExperimentReport { dataset: dataset.name().to_string(), estimator, runs, failures, quartiles, bands })
}

/// Column-normalized 2-D histogram of predicted versus true `σ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMap {
    pub bins: usize,
    pub lo: f64,
    pub hi: f64,
    /// `density[c][r]`: column `c` bins predicted `σ`, row `r` bins true `σ`.
    pub density: Vec<Vec<f64>>,
    pub counts: Vec<u64>,
    pub pearson: f64,
}

impl DensityMap {
    pub fn center(&self, k: usize) -> f64 {
        self.lo + (self.hi - self.lo) * (k as f64 + 0.5) / self.bins as f64
    }

    fn bin(&self, v: f64) -> usize {
        let t = (v - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (t.floor().max(0.0) as usize).min(self.bins - 1)
    }

    pub fn populated_columns(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Share of populated columns whose densest row lies within `tol` of
    /// the column's predicted `σ`.
    pub fn diagonal_fraction(&self, tol: f64) -> f64 {
        let mut hit = 0usize;
        let mut total = 0usize;
        for (c, col) in self.density.iter().enumerate() {
            if self.counts[c] == 0 {
                continue;
            }
            total += 1;
            let r = col.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(r, _)| r).unwrap_or(0);
            if (self.center(c) - self.center(r)).abs() <= tol + 1e-12 {
                hit += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}

/// Samples `n_samples` uniform inputs and bins `(predict(x), σ_true(x))`
/// on `[lo, hi]²`, then scales every non-empty column to a maximum of 1.
pub fn density_plot_5d<P>(
    predict: P,
    dataset: &Dataset,
    n_samples: usize,
    bins: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<DensityMap>
where
    P: Fn(&[f64]) -> Result<f64> + Sync,
{
    if bins == 0 || n_samples < 2 || !(range.1 > range.0) {
        return Err(Error::domain("density map needs bins > 0, at least 2 samples and a valid range"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = datasets::sample_with(dataset, n_samples, &mut rng).inputs;
    let pred = xs.par_iter().map(|x| predict(x)).collect::<Result<Vec<f64>>>()?;
    let truth: Vec<f64> = xs.iter().map(|x| dataset.sigma(x)).collect();
    let mut map = DensityMap {
        bins,
        lo: range.0,
        hi: range.1,
        density: vec![vec![0.0; bins]; bins],
        counts: vec![0; bins],
        pearson: pearson(&pred, &truth),
    };
    for (p, t) in pred.iter().zip(&truth) {
        let (c, r) = (map.bin(*p), map.bin(*t));
        map.density[c][r] += 1.0;
        map.counts[c] += 1;
    }
    for col in &mut map.density {
        let m = col.iter().cloned().fold(0.0, f64::max);
        if m > 0.0 {
            col.iter_mut().for_each(|v| *v /= m);
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests;
