//! Library side of the `arvar` command-line tool.
//!
//! Each subcommand is a function taking a [`RunConfig`] and a writer for the
//! human-readable report; files go to the configured output directory.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod csvio;
pub mod fit;
pub mod format;
pub mod gen;
pub mod plot;
pub mod score;

use std::fmt;
use std::io::Write;

pub use config::{Command, ModelFamily, RunConfig};

/// Process exit status of a failed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitKind {
    Input = 2,
    Unsupported = 3,
    Numeric = 4,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Input, message: message.into() }
    }

    pub fn unsupported(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Unsupported, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        Self { kind: ExitKind::Numeric, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<arvar_core::Error> for CliError {
    fn from(e: arvar_core::Error) -> Self {
        use arvar_core::Error as E;
        let kind = match &e {
            E::Unsupported(_) => ExitKind::Unsupported,
            E::Optim { .. } | E::Numeric(_) => ExitKind::Numeric,
            E::Domain(_) | E::Contract(_) | E::Dimension { .. } | E::Json(_) => ExitKind::Input,
        };
        Self { kind, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::input(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Runs the command selected in `cfg`.
pub fn run(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    cfg.validate()?;
    match cfg.command {
        Command::Score => score::cmd_score(cfg, out).map(|_| ()),
        Command::Fit => fit::cmd_fit(cfg, out).map(|_| ()),
        Command::Bench => bench::cmd_bench(cfg, out).map(|_| ()),
        Command::Gen => gen::cmd_gen(cfg, out).map(|_| ()),
    }
}
