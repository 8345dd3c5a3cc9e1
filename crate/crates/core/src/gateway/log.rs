//! Append-only JSON-lines prediction log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::PredictionRecord;
use crate::error::{Error, Result};

pub struct PredictionLogWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl PredictionLogWriter {
    /// Truncates any existing log at `path`.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(PredictionLogWriter { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(PredictionLogWriter { path: path.to_path_buf(), out: BufWriter::new(file) })
    }

    /// Each record is flushed so an aborted run leaves a complete prefix.
    pub fn write(&mut self, record: &PredictionRecord) -> Result<()> {
        let line = serde_json::to_string(record).expect("prediction records serialize");
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

pub fn parse_prediction_log<R: Read>(source_name: &str, reader: R) -> Result<Vec<PredictionRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::parse(source_name, i + 1, e.to_string()))?,
        );
    }
    Ok(out)
}

pub fn read_prediction_log(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_prediction_log(&path.display().to_string(), file)
}
