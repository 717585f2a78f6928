//! CSV emission. Every file opens with `#` comment lines recording the
//! command, schema version, configuration hash and seed.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::harness::config::SCHEMA_VERSION;
use crate::{Error, Result};

/// Provenance written at the top of each output file.
#[derive(Debug, Clone)]
pub struct Header {
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub notes: Vec<String>,
}

impl Header {
    pub fn new(command: &str, config_sha256: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            config_sha256: config_sha256.into(),
            seed,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    fn write(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(
            w,
            "# simplexdiff {} schema={SCHEMA_VERSION} config_sha256={} seed={}",
            self.command, self.config_sha256, self.seed
        )?;
        for note in &self.notes {
            writeln!(w, "# {note}")?;
        }
        Ok(())
    }
}

/// Writes one CSV file: the header comment, a column row, then records.
/// Floats use Rust's shortest round-trip formatting (with an exponent for
/// very small or large magnitudes), so output is byte-identical for
/// identical inputs.
pub struct CsvOutput {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvOutput {
    pub fn create(path: &Path, header: &Header, columns: &[&str]) -> Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        header.write(&mut file)?;
        let mut writer = csv::Writer::from_writer(file);
        writer.write_record(columns)?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn row(&mut self, values: &[f64]) -> Result<()> {
        self.writer
            .write_record(values.iter().map(|v| format!("{v:?}")))?;
        Ok(())
    }

    pub fn text_row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush()?;
        Ok(self.path)
    }
}

/// A numeric CSV table read back from disk, skipping `#` comment lines.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
        let body: String = BufReader::new(file)
            .lines()
            .map(|l| l.map_err(Error::from))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l + "\n")
            .collect();
        let mut reader = csv::Reader::from_reader(body.as_bytes());
        let columns = reader.headers()?.iter().map(str::to_string).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row = record
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("{}: non-numeric field {f:?}", path.display()))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Config(format!("missing column {name:?}")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}
