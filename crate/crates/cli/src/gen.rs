use std::io::Write;
use std::path::PathBuf;

use arvar_core::bench::{generate, DatasetSpec};

use crate::csvio::write_rows;
use crate::format::exact;
use crate::{CliResult, RunConfig};

/// Writes `n_train` samples of every selected dataset: `<name>.csv` with
/// the targets and the generating mean and `σ`, and `<name>_errors.csv` with
/// the exact-mean residuals in the layout `fit` reads.
pub fn cmd_gen(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<Vec<PathBuf>> {
    let dir = cfg.out_dir();
    let mut written = Vec::new();
    for ds in &cfg.datasets {
        let dataset = ds.dataset();
        let s = generate(&DatasetSpec { dataset, n: cfg.n_train, seed: cfg.seed });
        let xs: Vec<String> = (1..=dataset.dim()).map(|i| format!("x{i}")).collect();
        let row = |i: usize, tail: &[f64]| s.inputs[i].iter().chain(tail).map(|v| exact(*v)).collect::<Vec<_>>();

        let full = dir.join(format!("{}.csv", ds.name()));
        let header: Vec<String> = xs.iter().cloned().chain(["y", "f", "sigma"].map(String::from)).collect();
        write_rows(&full, &header, (0..s.len()).map(|i| row(i, &[s.targets[i], s.true_mean[i], s.true_sigma[i]])))?;

        let errs = dir.join(format!("{}_errors.csv", ds.name()));
        let header: Vec<String> = xs.iter().cloned().chain(["eps".to_string()]).collect();
        write_rows(&errs, &header, (0..s.len()).map(|i| row(i, &[s.targets[i] - s.true_mean[i]])))?;

        writeln!(out, "wrote {}", full.display())?;
        writeln!(out, "wrote {}", errs.display())?;
        written.extend([full, errs]);
    }
    Ok(written)
}
