use std::io::Write;
use std::path::Path;

use arvar_core::arcost::{ar_cost, compute_beta};
use arvar_core::bench::nlpd;
use arvar_core::scores::{crps_gaussian, reliability_score};
use arvar_core::{ForecastTriple, RelativeErrorSet};

use crate::csvio::{expect_header, read_numeric, write_rows};
use crate::format::sig6;
use crate::{CliError, CliResult, RunConfig};

pub const HEADER: [&str; 3] = ["mu", "sigma", "y_obs"];

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreReport {
    pub n: usize,
    pub mean_crps: f64,
    /// Reliability score without the constant term.
    pub rs_dropped: f64,
    /// Reliability score including the constant term.
    pub rs_full: f64,
    pub beta: f64,
    pub ar: f64,
    pub nlpd: f64,
    pub drop_constant: bool,
}

impl ScoreReport {
    /// Label and value pairs, in report order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mean_crps", self.mean_crps),
            ("rs_without_constant", self.rs_dropped),
            ("rs_with_constant", self.rs_full),
            ("beta", self.beta),
            ("ar", self.ar),
            ("nlpd", self.nlpd),
        ]
    }
}

pub fn read_triples(path: &Path) -> CliResult<Vec<ForecastTriple>> {
    let table = read_numeric(path)?;
    expect_header(path, &table, &HEADER)?;
    table
        .rows
        .iter()
        .map(|r| {
            ForecastTriple::new(r.values[0], r.values[1], r.values[2])
                .map_err(|e| CliError::input(format!("{}:{}: {e}", path.display(), r.line)))
        })
        .collect()
}

pub fn score_triples(triples: &[ForecastTriple], drop_constant: bool) -> CliResult<ScoreReport> {
    if triples.is_empty() {
        return Err(CliError::input("no forecasts to score"));
    }
    let n = triples.len();
    let mean_crps = triples.iter().map(crps_gaussian).sum::<arvar_core::Result<f64>>()? / n as f64;
    let set = RelativeErrorSet::from_triples(triples)?;
    let eps: Vec<f64> = triples.iter().map(ForecastTriple::eps).collect();
    let sigmas: Vec<f64> = triples.iter().map(|t| t.sigma).collect();
    let weights = compute_beta(&eps, drop_constant)?;
    Ok(ScoreReport {
        n,
        mean_crps,
        rs_dropped: reliability_score(&set, true),
        rs_full: reliability_score(&set, false),
        beta: weights.beta,
        ar: ar_cost(&sigmas, &eps, &weights, drop_constant)?,
        nlpd: nlpd(triples)?,
        drop_constant,
    })
}

/// Scores a `mu,sigma,y_obs` file. With an output directory, the report is
/// also written to `score.csv`.
pub fn cmd_score(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<ScoreReport> {
    let path = cfg.input.as_deref().ok_or_else(|| CliError::input("an input file is required"))?;
    let report = score_triples(&read_triples(path)?, cfg.drop_constant)?;
    writeln!(out, "n {}", report.n)?;
    for (k, v) in report.entries() {
        writeln!(out, "{k} {}", sig6(v))?;
    }
    writeln!(out, "drop_constant {}", report.drop_constant)?;
    if let Some(dir) = &cfg.out_dir {
        write_rows(
            &dir.join("score.csv"),
            &["quantity", "value"],
            report.entries().into_iter().map(|(k, v)| [k.to_string(), sig6(v)]),
        )?;
    }
    Ok(report)
}
