use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::CliError;

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

/// Shortest text that parses back to the same value; exact, so never fewer
/// significant digits than the number carries.
pub(crate) fn real(v: f64) -> String {
    format!("{v}")
}

/// Fixed-point text with `digits` significant digits, for tables read by
/// people. Non-finite values print as `NaN`, `inf` or `-inf`.
pub fn significant(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let text = format!("{v:.decimals$}");
    // rounding can carry into a new digit (999.9996 -> 1000.000)
    let rounded: f64 = text.parse().expect("formatted float");
    if rounded != 0.0 && rounded.abs().log10().floor() as i64 > magnitude && decimals > 0 {
        return format!("{v:.*}", decimals - 1);
    }
    text
}

/// Thin CSV writer over any sink.
pub(crate) struct CsvOut<'a> {
    inner: csv::Writer<&'a mut dyn Write>,
}

impl<'a> CsvOut<'a> {
    pub(crate) fn new(out: &'a mut dyn Write) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub(crate) fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> std::io::Result<()> {
        self.inner.write_record(fields).map_err(std::io::Error::other)
    }

    pub(crate) fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Reads a CSV with a header into string rows.
pub(crate) fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let header = rdr.headers().map_err(|e| CliError::io(path, e))?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}
