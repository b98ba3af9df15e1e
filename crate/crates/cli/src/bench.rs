use std::fs;
use std::io::Write;
use std::path::Path;

use arvar_core::bench::{
    density_plot_5d, derive_seed, run_experiment, BuiltIn, DensityMap, Estimator, ExperimentConfig,
    ExperimentReport, RunResult,
};
use arvar_core::varmodel::{MlpOptions, PolyOptions};
use rayon::prelude::*;

use crate::csvio::write_rows;
use crate::format::{exact, sig6};
use crate::{plot, CliError, CliResult, ExitKind, RunConfig};

/// Density map resolution and range for the 5-D dataset, whose `σ` lies in
/// `[0.09, 0.99]`.
pub const DENSITY_BINS: usize = 20;
pub const DENSITY_RANGE: (f64, f64) = (0.0, 1.1);
/// Distance from the diagonal within which a column's mode counts as on it.
pub const DENSITY_TOL: f64 = 0.15;

const DENSITY_TAG: u64 = 0x0064_656e_7369_7479;

/// Row labels of the summary table, in order.
pub const STATISTICS: [&str; 3] = ["1st quartile", "median", "3rd quartile"];

#[derive(Clone, Debug)]
pub struct Cell {
    pub dataset: BuiltIn,
    pub estimator: Estimator,
    pub outcome: Result<ExperimentReport, CliError>,
    /// Predicted versus true `σ` of the first run, for 5-D cells.
    pub density: Option<DensityMap>,
}

impl Cell {
    fn file_stem(&self) -> String {
        format!("{}_{}", self.dataset.name(), self.estimator.name())
    }
}

pub fn experiment_config(cfg: &RunConfig, dataset: BuiltIn) -> ExperimentConfig {
    let base = ExperimentConfig::default();
    ExperimentConfig {
        n_runs: cfg.runs,
        n_train: if dataset == BuiltIn::FiveD { cfg.n_train_5d } else { cfg.n_train },
        n_test: cfg.n_test,
        master_seed: cfg.seed,
        mlp: MlpOptions { drop_constant: cfg.drop_constant, output_scale: cfg.output_scale, ..base.mlp.clone() },
        poly: PolyOptions { tol: cfg.tol, drop_constant: cfg.drop_constant, ..base.poly.clone() },
        ..base
    }
}

/// Density map of a fitted 5-D run.
pub fn five_d_density(run: &RunResult, cfg: &RunConfig) -> CliResult<DensityMap> {
    let seed = derive_seed(cfg.seed, &[DENSITY_TAG]);
    Ok(density_plot_5d(
        |x| run.sigma_model.predict(x),
        &BuiltIn::FiveD.dataset(),
        cfg.density_samples,
        DENSITY_BINS,
        DENSITY_RANGE,
        seed,
    )?)
}

fn run_cell(cfg: &RunConfig, dataset: BuiltIn, estimator: Estimator) -> Cell {
    let outcome = run_experiment(&dataset.dataset(), estimator, &experiment_config(cfg, dataset)).map_err(CliError::from);
    let density = match (&outcome, dataset) {
        (Ok(rep), BuiltIn::FiveD) => rep.runs.first().and_then(|r| five_d_density(r, cfg).ok()),
        _ => None,
    };
    Cell { dataset, estimator, outcome, density }
}

/// Runs every selected (dataset, estimator) cell. Cells come back sorted by
/// dataset, then estimator.
pub fn run_cells(cfg: &RunConfig) -> Vec<Cell> {
    let cfg = cfg.clone().canonicalize();
    let pairs: Vec<(BuiltIn, Estimator)> =
        cfg.datasets.iter().flat_map(|d| cfg.estimators.iter().map(move |e| (*d, *e))).collect();
    pairs.into_par_iter().map(|(d, e)| run_cell(&cfg, d, e)).collect()
}

/// Writes the CSV outputs (and plots when enabled) of a finished bench.
///
/// Everything except `timings.csv` depends only on the configuration.
pub fn write_outputs(cfg: &RunConfig, cells: &[Cell], dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)?;
    // the output location is left out so that results compare across directories
    let recorded = RunConfig { out_dir: None, ..cfg.clone() };
    fs::write(dir.join("config.json"), recorded.to_json() + "\n")?;

    let ok = || cells.iter().filter_map(|c| c.outcome.as_ref().ok().map(|r| (c, r)));
    write_rows(
        &dir.join("runs.csv"),
        &["dataset", "estimator", "run", "seed", "nlpd", "sigma_mad"],
        ok().flat_map(|(c, rep)| {
            rep.runs.iter().map(move |r| {
                [
                    c.dataset.name().to_string(),
                    c.estimator.name().to_string(),
                    r.run.to_string(),
                    r.seeds.data.to_string(),
                    exact(r.nlpd),
                    r.sigma_mad.map(exact).unwrap_or_default(),
                ]
            })
        }),
    )?;
    write_rows(
        &dir.join("timings.csv"),
        &["dataset", "estimator", "run", "wall_time_s"],
        ok().flat_map(|(c, rep)| {
            rep.runs.iter().map(move |r| {
                [c.dataset.name().to_string(), c.estimator.name().to_string(), r.run.to_string(), r.wall_time_s.to_string()]
            })
        }),
    )?;

    let mut failures = Vec::new();
    for c in cells {
        match &c.outcome {
            Err(e) => failures.push([c.dataset.name().into(), c.estimator.name().into(), String::new(), e.message.clone()]),
            Ok(rep) => failures.extend(rep.failures.iter().map(|(run, msg)| {
                [c.dataset.name().into(), c.estimator.name().into(), run.to_string(), msg.clone()]
            })),
        }
    }
    write_rows(&dir.join("failures.csv"), &["dataset", "estimator", "run", "message"], failures)?;

    let estimators: Vec<Estimator> = {
        let mut e: Vec<Estimator> = cells.iter().map(|c| c.estimator).collect();
        e.sort();
        e.dedup();
        e
    };
    let mut datasets: Vec<BuiltIn> = cells.iter().map(|c| c.dataset).collect();
    datasets.dedup();
    let mut header = vec!["dataset".to_string(), "statistic".to_string()];
    header.extend(estimators.iter().map(|e| e.label().to_string()));
    let mut table = Vec::new();
    for d in &datasets {
        for (k, stat) in STATISTICS.iter().enumerate() {
            let mut row = vec![d.name().to_string(), stat.to_string()];
            for e in &estimators {
                let q = cells
                    .iter()
                    .find(|c| c.dataset == *d && c.estimator == *e)
                    .and_then(|c| c.outcome.as_ref().ok())
                    .and_then(|r| r.quartiles.as_ref());
                row.push(q.map(|q| exact([q.q1, q.median, q.q3][k])).unwrap_or_default());
            }
            table.push(row);
        }
    }
    write_rows(&dir.join("table1.csv"), &header, table)?;

    for (c, rep) in ok() {
        if let Some(b) = &rep.bands {
            let path = dir.join(format!("recovery_{}.csv", c.file_stem()));
            write_rows(
                &path,
                &["x", "sigma_true", "sigma_mean", "sigma_std"],
                (0..b.x.len()).map(|i| [exact(b.x[i]), exact(b.truth[i]), exact(b.mean[i]), exact(b.std[i])]),
            )?;
            if cfg.plots {
                plot::recovery(&dir.join(format!("recovery_{}.svg", c.file_stem())), c, b)?;
            }
        }
        if let Some(m) = &c.density {
            write_rows(
                &dir.join(format!("density_{}.csv", c.file_stem())),
                &["sigma_pred", "sigma_true", "density"],
                (0..m.bins).flat_map(|col| {
                    (0..m.bins).map(move |row| [exact(m.center(col)), exact(m.center(row)), exact(m.density[col][row])])
                }),
            )?;
            write_rows(
                &dir.join(format!("density_{}_summary.csv", c.file_stem())),
                &["samples", "bins", "pearson", "populated_columns", "diagonal_tol", "diagonal_fraction"],
                [[
                    cfg.density_samples.to_string(),
                    m.bins.to_string(),
                    exact(m.pearson),
                    m.populated_columns().to_string(),
                    exact(DENSITY_TOL),
                    exact(m.diagonal_fraction(DENSITY_TOL)),
                ]],
            )?;
            if cfg.plots {
                plot::density(&dir.join(format!("density_{}.svg", c.file_stem())), m)?;
            }
        }
    }
    Ok(())
}

fn print_summary(cells: &[Cell], out: &mut dyn Write) -> CliResult<()> {
    writeln!(out, "{:<4} {:<8} {:>5} {:>10} {:>10} {:>10}", "set", "method", "runs", "q1", "median", "q3")?;
    for c in cells {
        match &c.outcome {
            Ok(rep) => {
                let q = rep.quartiles.as_ref();
                let f = |v: Option<f64>| v.map(sig6).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:<4} {:<8} {:>5} {:>10} {:>10} {:>10}",
                    c.dataset.name(),
                    c.estimator.label(),
                    rep.runs.len(),
                    f(q.map(|q| q.q1)),
                    f(q.map(|q| q.median)),
                    f(q.map(|q| q.q3)),
                )?;
                for (run, msg) in &rep.failures {
                    writeln!(out, "  run {run} failed: {msg}")?;
                }
            }
            Err(e) => writeln!(out, "{:<4} {:<8} skipped: {e}", c.dataset.name(), c.estimator.label())?,
        }
        if let Some(m) = &c.density {
            writeln!(
                out,
                "  density: pearson {} diagonal fraction {}",
                sig6(m.pearson),
                sig6(m.diagonal_fraction(DENSITY_TOL))
            )?;
        }
    }
    Ok(())
}

/// Runs the benchmark grid and writes its outputs. Fails only when no cell
/// produced a single run.
pub fn cmd_bench(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<Vec<Cell>> {
    let cells = run_cells(cfg);
    write_outputs(cfg, &cells, &cfg.out_dir())?;
    print_summary(&cells, out)?;
    let any_ok = cells.iter().any(|c| c.outcome.as_ref().is_ok_and(|r| !r.runs.is_empty()));
    if !any_ok {
        let kind = if cells.iter().all(|c| matches!(&c.outcome, Err(e) if e.kind == ExitKind::Unsupported)) {
            ExitKind::Unsupported
        } else {
            ExitKind::Numeric
        };
        return Err(CliError { kind, message: "every benchmark cell failed".into() });
    }
    Ok(cells)
}
