use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A user-supplied generative model.
#[derive(Clone, Copy, Debug)]
pub struct CustomDataset {
    pub name: &'static str,
    pub lower: &'static [f64],
    pub upper: &'static [f64],
    pub mean: fn(&[f64]) -> f64,
    pub sigma: fn(&[f64]) -> f64,
}

#[derive(Clone, Copy, Debug)]
pub enum Dataset {
    G,
    Y,
    W,
    FiveD,
    Custom(CustomDataset),
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

/// Name and identity of the built-in datasets, used for parsing and output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BuiltIn {
    G,
    Y,
    W,
    #[serde(rename = "5D")]
    FiveD,
}

impl BuiltIn {
    pub const ALL: [BuiltIn; 4] = [BuiltIn::G, BuiltIn::Y, BuiltIn::W, BuiltIn::FiveD];

    pub fn dataset(self) -> Dataset {
        match self {
            BuiltIn::G => Dataset::G,
            BuiltIn::Y => Dataset::Y,
            BuiltIn::W => Dataset::W,
            BuiltIn::FiveD => Dataset::FiveD,
        }
    }

    pub fn name(self) -> &'static str {
        self.dataset().name()
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "G" => Some(BuiltIn::G),
            "Y" => Some(BuiltIn::Y),
            "W" => Some(BuiltIn::W),
            "5D" | "FIVED" => Some(BuiltIn::FiveD),
            _ => None,
        }
    }
}

impl std::fmt::Display for BuiltIn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Dataset {
    pub fn name(&self) -> &'static str {
        match self {
            Dataset::G => "G",
            Dataset::Y => "Y",
            Dataset::W => "W",
            Dataset::FiveD => "5D",
            Dataset::Custom(c) => c.name,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Dataset::FiveD => 5,
            Dataset::Custom(c) => c.lower.len(),
            _ => 1,
        }
    }

    /// Per-dimension `(lower, upper)` bounds of the input domain.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        match self {
            Dataset::G | Dataset::Y => vec![(0.0, 1.0)],
            Dataset::W => vec![(0.0, PI)],
            Dataset::FiveD => vec![(0.0, 1.0); 5],
            Dataset::Custom(c) => c.lower.iter().copied().zip(c.upper.iter().copied()).collect(),
        }
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        match self {
            Dataset::G => 2.0 * (2.0 * PI * x[0]).sin(),
            Dataset::Y => {
                let t = x[0];
                2.0 * ((-30.0 * (t - 0.25).powi(2)).exp() + (PI * t * t).sin()) - 2.0
            }
            Dataset::W => (2.5 * x[0]).sin() * (1.5 * x[0]).sin(),
            Dataset::FiveD => 0.0,
            Dataset::Custom(c) => (c.mean)(x),
        }
    }

    pub fn sigma(&self, x: &[f64]) -> f64 {
        match self {
            Dataset::G => 0.5 * x[0] + 0.5,
            Dataset::Y => (2.0 * PI * x[0]).sin().exp() / 3.0,
            Dataset::W => 0.01 + 0.25 * (1.0 - (2.5 * x[0]).sin()).powi(2),
            Dataset::FiveD => {
                let s: f64 = x.iter().map(|v| 5.0 * v).sum();
                0.45 * ((PI + s).cos() + 1.2)
            }
            Dataset::Custom(c) => (c.sigma)(x),
        }
    }

    /// Whether experiments use the true mean instead of fitting one.
    pub fn exact_mean(&self) -> bool {
        matches!(self, Dataset::FiveD)
    }

    /// Evenly spaced grid over a 1-D domain.
    pub fn grid(&self, n: usize) -> Result<Vec<f64>> {
        if self.dim() != 1 {
            return Err(Error::Unsupported(format!("grid over {}-dimensional dataset {}", self.dim(), self.name())));
        }
        let (lo, hi) = self.bounds()[0];
        Ok(match n {
            0 => vec![],
            1 => vec![0.5 * (lo + hi)],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        })
    }
}

#[derive(Clone, Debug)]
pub struct DatasetSpec {
    pub dataset: Dataset,
    pub n: usize,
    pub seed: u64,
}

/// Samples drawn from a dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<f64>,
    pub true_mean: Vec<f64>,
    pub true_sigma: Vec<f64>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Draws `n` inputs uniformly on the domain with targets `f(x) + σ(x)·z`.
pub fn generate(spec: &DatasetSpec) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sample_with(&spec.dataset, spec.n, &mut rng)
}

pub(crate) fn sample_with<R: Rng>(ds: &Dataset, n: usize, rng: &mut R) -> Sample {
    let bounds = ds.bounds();
    let mut s = Sample {
        inputs: Vec::with_capacity(n),
        targets: Vec::with_capacity(n),
        true_mean: Vec::with_capacity(n),
        true_sigma: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let x: Vec<f64> = bounds.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>()).collect();
        let z: f64 = rng.sample(StandardNormal);
        let (m, sd) = (ds.mean(&x), ds.sigma(&x));
        s.targets.push(m + sd * z);
        s.true_mean.push(m);
        s.true_sigma.push(sd);
        s.inputs.push(x);
    }
    s
}
