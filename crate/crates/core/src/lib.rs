//! Heteroskedastic variance estimation with the accuracy-reliability (AR)
//! cost function.
//!
//! Given single-point predictions and their errors `ε = y_obs − μ`, the AR
//! cost scores a vector of forecast standard deviations by a weighted sum of
//! the mean Gaussian CRPS (accuracy) and a reliability score measuring how far
//! the standardized errors are from a standard normal sample. Minimizing it
//! over a parameterized `σ(x)` recovers input-dependent noise.
//!
//! Module map:
//! - [`scores`]: closed-form CRPS and reliability score, derivatives, minimizers.
//! - [`arcost`]: β weighting, AR cost and its gradient over `σ`.
//! - [`optim`]: BFGS with a strong-Wolfe cubic line search.
//! - [`varmodel`]: per-point, polynomial and MLP parameterizations of `σ(x)`.
//! - [`meanfn`]: homoskedastic Gaussian-process regression for the mean.
//! - [`bench`]: synthetic datasets, NLPD, and the multi-run experiment protocol.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arcost;
pub mod bench;
pub mod error;
pub mod meanfn;
pub mod optim;
pub mod scores;
pub mod special;
pub mod varmodel;

pub use arcost::{ArWeights, ErrorSample};
pub use error::{Error, Result};
pub use meanfn::GpModel;
pub use optim::{OptimOptions, OptimTrace};
pub use scores::{ForecastTriple, RelativeErrorSet};
pub use varmodel::{MlpModel, PerPointModel, PolynomialModel, VarianceModel};
