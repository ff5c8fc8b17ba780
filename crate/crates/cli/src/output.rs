//! CSV writing with a comment preamble.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::error::CliError;

pub struct Table {
    preamble: Vec<String>,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(command: &str, config_digest: &str, header: Vec<&'static str>) -> Self {
        Table {
            preamble: vec![
                format!("nvsvi {command}"),
                format!("config_sha256: {config_digest}"),
            ],
            header,
            rows: Vec::new(),
        }
    }

    pub fn note(&mut self, line: impl Into<String>) {
        self.preamble.push(line.into());
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        for line in &self.preamble {
            writeln!(w, "# {line}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.header)?;
        for row in &self.rows {
            csv.write_record(row)?;
        }
        csv.flush()
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => {
                let file = File::create(p).map_err(|e| CliError::io(p, e))?;
                self.write_to(BufWriter::new(file))
                    .map_err(|e| CliError::io(p, e))
            }
            None => self
                .write_to(io::stdout().lock())
                .map_err(|e| CliError::Io(format!("stdout: {e}"))),
        }
    }
}

/// Shortest round-trip representation in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
