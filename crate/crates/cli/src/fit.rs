use std::fs;
use std::io::Write;
use std::path::Path;

use arvar_core::arcost::{ar_cost, compute_beta};
use arvar_core::varmodel::{
    fit_mlp, fit_per_point, fit_polynomial, MlpOptions, PerPointOptions, PolyOptions, VarianceModel,
};
use arvar_core::ErrorSample;
use serde::{Deserialize, Serialize};

use crate::csvio::{read_numeric, write_rows};
use crate::format::{exact, sig6};
use crate::{CliError, CliResult, ModelFamily, RunConfig};

pub const MODEL_FORMAT: &str = "arvar-model";
pub const MODEL_VERSION: u32 = 1;

/// On-disk form of a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub model: VarianceModel,
}

impl ModelFile {
    pub fn new(model: VarianceModel, seed: u64) -> Self {
        Self { format: MODEL_FORMAT.into(), version: MODEL_VERSION, seed, model }
    }
}

pub fn load_model(path: &Path) -> CliResult<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
        return Err(CliError::input(format!(
            "{}: unsupported model file {} v{}",
            path.display(),
            file.format,
            file.version
        )));
    }
    Ok(file)
}

/// Reads `x1..xd,eps` training errors.
pub fn read_errors(path: &Path) -> CliResult<Vec<ErrorSample>> {
    let table = read_numeric(path)?;
    let h = &table.header;
    let d = h.len().saturating_sub(1);
    let ok = d >= 1 && h[d] == "eps" && h[..d].iter().enumerate().all(|(i, n)| *n == format!("x{}", i + 1));
    if !ok {
        return Err(CliError::input(format!(
            "{}:1: header must be 'x1,...,xd,eps', found '{}'",
            path.display(),
            h.join(",")
        )));
    }
    Ok(table.rows.into_iter().map(|r| ErrorSample::new(r.values[..d].to_vec(), r.values[d])).collect())
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: VarianceModel,
    /// `σ̂` at the training inputs.
    pub sigmas: Vec<f64>,
    pub ar: f64,
}

pub fn fit_errors(data: &[ErrorSample], cfg: &RunConfig) -> CliResult<FitOutcome> {
    let d = data.first().map_or(0, |s| s.x.len());
    let model: VarianceModel = match cfg.model {
        ModelFamily::PerPoint => {
            let opts = PerPointOptions { drop_constant: cfg.drop_constant, ..Default::default() };
            let (mut m, _) = fit_per_point(data, &opts)?;
            m.inputs = data.iter().map(|s| s.x.clone()).collect();
            m.into()
        }
        ModelFamily::Poly => {
            if d != 1 {
                return Err(CliError::unsupported(format!(
                    "the polynomial model needs 1-D inputs, the file has {d} input columns"
                )));
            }
            let opts = PolyOptions { tol: cfg.tol, drop_constant: cfg.drop_constant, ..Default::default() };
            fit_polynomial(data, &opts)?.model.into()
        }
        ModelFamily::Nn => {
            let opts =
                MlpOptions { drop_constant: cfg.drop_constant, output_scale: cfg.output_scale, ..Default::default() };
            fit_mlp(data, &opts, cfg.seed)?.model.into()
        }
    };
    let sigmas = data.iter().map(|s| model.predict_sigma(&s.x)).collect::<arvar_core::Result<Vec<_>>>()?;
    let eps: Vec<f64> = data.iter().map(|s| s.eps).collect();
    let ar = ar_cost(&sigmas, &eps, &compute_beta(&eps, cfg.drop_constant)?, cfg.drop_constant)?;
    Ok(FitOutcome { model, sigmas, ar })
}

/// Fits a variance model to an error file and writes `model.json` and
/// `sigma.csv` to the output directory.
pub fn cmd_fit(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<FitOutcome> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::input("an input file is required"))?;
    let data = read_errors(path)?;
    let fit = fit_errors(&data, cfg)?;
    let dir = cfg.out_dir();
    fs::create_dir_all(&dir)?;
    let json = serde_json::to_string_pretty(&ModelFile::new(fit.model.clone(), cfg.seed))?;
    fs::write(dir.join("model.json"), json + "\n")?;
    let d = data[0].x.len();
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("sigma".into());
    write_rows(
        &dir.join("sigma.csv"),
        &header,
        data.iter().zip(&fit.sigmas).map(|(s, sig)| s.x.iter().chain([sig]).map(|v| exact(*v)).collect::<Vec<_>>()),
    )?;
    writeln!(out, "model {}", fit.model.family())?;
    writeln!(out, "n {}", data.len())?;
    if let VarianceModel::Polynomial(p) = &fit.model {
        writeln!(out, "order {}", p.order())?;
    }
    writeln!(out, "ar {}", sig6(fit.ar))?;
    writeln!(out, "wrote {}", dir.join("model.json").display())?;
    writeln!(out, "wrote {}", dir.join("sigma.csv").display())?;
    Ok(fit)
}
