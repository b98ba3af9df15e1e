use std::path::PathBuf;

use arvar_core::bench::{BuiltIn, Estimator};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Score,
    Fit,
    Bench,
    Gen,
}

/// Variance model family selected by `--model`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    PerPoint,
    Poly,
    Nn,
}

/// Every parameter of one invocation.
///
/// Dataset and estimator lists are kept sorted and free of duplicates so
/// that equal configurations serialize identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    pub runs: usize,
    /// Training points per run, and sample size for `gen`.
    pub n_train: usize,
    pub n_test: usize,
    /// Training points per run on the 5-D dataset.
    pub n_train_5d: usize,
    /// Inputs sampled for the 5-D density map.
    pub density_samples: usize,
    pub datasets: Vec<BuiltIn>,
    pub estimators: Vec<Estimator>,
    pub model: ModelFamily,
    pub tol: f64,
    pub drop_constant: bool,
    pub output_scale: f64,
    pub plots: bool,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            input: None,
            out_dir: None,
            seed: 0,
            runs: 20,
            n_train: 100,
            n_test: 900,
            n_train_5d: 10_000,
            density_samples: 100_000,
            datasets: vec![BuiltIn::G, BuiltIn::Y, BuiltIn::W],
            estimators: Estimator::ALL.to_vec(),
            model: ModelFamily::Nn,
            tol: 1e-5,
            drop_constant: true,
            output_scale: 1.0,
            plots: false,
        }
    }

    /// Sorts and deduplicates the selections.
    pub fn canonicalize(mut self) -> Self {
        self.datasets.sort();
        self.datasets.dedup();
        self.estimators.sort();
        self.estimators.dedup();
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.clone().canonicalize()).expect("config serializes")
    }

    pub fn from_json(s: &str) -> CliResult<Self> {
        Ok(serde_json::from_str::<Self>(s)?.canonicalize())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn validate(&self) -> CliResult<()> {
        if matches!(self.command, Command::Score | Command::Fit) && self.input.is_none() {
            return Err(CliError::input("an input file is required"));
        }
        if self.runs == 0 {
            return Err(CliError::input("--runs must be at least 1"));
        }
        if self.n_train < 2 || self.n_test == 0 || self.n_train_5d < 2 || self.density_samples < 2 {
            return Err(CliError::input("sample sizes must be positive (training sets need 2 points)"));
        }
        if !(self.tol >= 0.0) {
            return Err(CliError::input(format!("--tol must be non-negative, got {}", self.tol)));
        }
        if !(self.output_scale > 0.0 && self.output_scale.is_finite()) {
            return Err(CliError::input(format!("--output-scale must be positive, got {}", self.output_scale)));
        }
        if self.command == Command::Bench && (self.datasets.is_empty() || self.estimators.is_empty()) {
            return Err(CliError::input("bench needs at least one dataset and one estimator"));
        }
        if self.command == Command::Gen && self.datasets.is_empty() {
            return Err(CliError::input("gen needs at least one dataset"));
        }
        Ok(())
    }
}
