//! CSV input with line-numbered errors, and plain CSV output.

use std::fs;
use std::path::Path;

use crate::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// 1-based line in the file.
    pub line: u64,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Row>,
}

fn at(path: &Path, line: u64, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{}:{line}: {msg}", path.display()))
}

/// Reads a CSV file of finite numbers with a mandatory header row. Lines
/// starting with `#` are skipped.
pub fn read_numeric(path: &Path) -> CliResult<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| at(path, 1, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(at(path, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    at(path, line, format!("expected {expected_len} fields, found {len}"))
                }
                _ => at(path, line, e),
            }
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .zip(&header)
            .map(|(field, name)| match field.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(at(path, line, format!("column '{name}': non-finite value {v}"))),
                Err(_) => Err(at(path, line, format!("column '{name}': cannot parse '{field}' as a number"))),
            })
            .collect::<CliResult<Vec<f64>>>()?;
        rows.push(Row { line, values });
    }
    if rows.is_empty() {
        return Err(at(path, 1, "no data rows after the header"));
    }
    Ok(Table { header, rows })
}

/// Checks that the header is exactly `expected`.
pub fn expect_header(path: &Path, table: &Table, expected: &[&str]) -> CliResult<()> {
    if table.header.iter().map(String::as_str).eq(expected.iter().copied()) {
        Ok(())
    } else {
        Err(at(path, 1, format!("header must be '{}', found '{}'", expected.join(","), table.header.join(","))))
    }
}

/// Writes a header and rows of preformatted fields.
pub fn write_rows<S, I, R>(path: &Path, header: &[S], rows: I) -> CliResult<()>
where
    S: AsRef<str>,
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let io = |e: csv::Error| CliError::input(format!("{}: {e}", path.display()));
    w.write_record(header.iter().map(AsRef::as_ref)).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
