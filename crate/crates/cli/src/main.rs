use std::path::PathBuf;
use std::process::ExitCode;

use arvar_cli::{run, Command, ModelFamily, RunConfig};
use arvar_core::bench::{BuiltIn, Estimator};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "arvar", version, about = "Heteroskedastic variance estimation with the accuracy-reliability cost")]
struct Cli {
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for output files (default: current directory).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Convention {
    /// Omit the constant term of the reliability score.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    drop_constant: bool,
}

#[derive(Subcommand)]
enum Sub {
    /// Score Gaussian forecasts from a `mu,sigma,y_obs` CSV.
    Score {
        input: PathBuf,
        #[command(flatten)]
        conv: Convention,
    },
    /// Fit a variance model to an `x1..xd,eps` CSV.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = ModelFamily::Nn)]
        model: ModelFamily,
        /// Stopping tolerance of the polynomial order search.
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Upper bound of the network output.
        #[arg(long, default_value_t = 1.0)]
        output_scale: f64,
        #[command(flatten)]
        conv: Convention,
    },
    /// Run the synthetic benchmark grid.
    Bench {
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_dataset, default_value = "G,Y,W")]
        datasets: Vec<BuiltIn>,
        #[arg(long, value_delimiter = ',', value_parser = parse_estimator, default_value = "gp,ar-nn,ar-poly")]
        estimators: Vec<Estimator>,
        #[arg(long, default_value_t = 100)]
        n_train: usize,
        #[arg(long, default_value_t = 900)]
        n_test: usize,
        /// Training points per run on the 5D dataset.
        #[arg(long, default_value_t = 10_000)]
        n_train_5d: usize,
        #[arg(long, default_value_t = 100_000)]
        density_samples: usize,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
        /// Also write SVG figures.
        #[arg(long)]
        plots: bool,
        #[command(flatten)]
        conv: Convention,
    },
    /// Write samples of the built-in datasets.
    Gen {
        #[arg(long, value_delimiter = ',', value_parser = parse_dataset, default_value = "G,Y,W,5D")]
        datasets: Vec<BuiltIn>,
        #[arg(long, default_value_t = 100)]
        n: usize,
    },
}

fn parse_dataset(s: &str) -> Result<BuiltIn, String> {
    BuiltIn::parse(s).ok_or_else(|| format!("unknown dataset '{s}' (expected G, Y, W or 5D)"))
}

fn parse_estimator(s: &str) -> Result<Estimator, String> {
    Estimator::parse(s).ok_or_else(|| format!("unknown estimator '{s}' (expected gp, ar-nn or ar-poly)"))
}

fn config(cli: Cli) -> RunConfig {
    let mut cfg = match cli.command {
        Sub::Score { input, conv } => RunConfig {
            input: Some(input),
            drop_constant: conv.drop_constant,
            ..RunConfig::new(Command::Score)
        },
        Sub::Fit { input, model, tol, output_scale, conv } => RunConfig {
            input: Some(input),
            model,
            tol,
            output_scale,
            drop_constant: conv.drop_constant,
            ..RunConfig::new(Command::Fit)
        },
        Sub::Bench { runs, datasets, estimators, n_train, n_test, n_train_5d, density_samples, tol, plots, conv } => {
            RunConfig {
                runs,
                datasets,
                estimators,
                n_train,
                n_test,
                n_train_5d,
                density_samples,
                tol,
                plots,
                drop_constant: conv.drop_constant,
                ..RunConfig::new(Command::Bench)
            }
        }
        Sub::Gen { datasets, n } => RunConfig { datasets, n_train: n, ..RunConfig::new(Command::Gen) },
    };
    cfg.seed = cli.seed;
    cfg.out_dir = cli.out_dir;
    cfg.canonicalize()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let print = cli.print_config;
    let cfg = config(cli);
    if print {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    let stdout = std::io::stdout();
    match run(&cfg, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("arvar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
