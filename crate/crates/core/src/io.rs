use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Result, TriageError};

/// Thin wrapper over `csv::Writer` that maps errors to [`TriageError`].
pub(crate) struct CsvWriter {
    path: PathBuf,
    inner: csv::Writer<File>,
}

impl CsvWriter {
    pub(crate) fn create(path: impl AsRef<Path>, header: &[&str]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| TriageError::io(&path, e))?;
        let mut w = CsvWriter {
            inner: csv::Writer::from_writer(file),
            path,
        };
        w.row(header)?;
        Ok(w)
    }

    pub(crate) fn row<S: AsRef<[u8]>>(&mut self, fields: &[S]) -> Result<()> {
        let path = &self.path;
        self.inner.write_record(fields).map_err(|e| TriageError::Format {
            path: path.clone(),
            message: e.to_string(),
        })
    }

    pub(crate) fn finish(mut self) -> Result<()> {
        let path = self.path.clone();
        self.inner.flush().map_err(|e| TriageError::io(path, e))
    }
}

pub(crate) fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = File::create(path).map_err(|e| TriageError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| TriageError::io(path, e))
}
