use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::CliError;

/// Write `bytes` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub(crate) fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    let path = dir.join(name);
    tmp.persist(&path).map_err(|e| e.error)?;
    Ok(path)
}

/// Either an output directory or the process's standard output.
pub(crate) struct Sink<'a> {
    pub dir: Option<PathBuf>,
    pub stdout: &'a mut dyn Write,
}

impl Sink<'_> {
    pub fn emit(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        match &self.dir {
            Some(dir) => {
                write_atomic(dir, name, bytes)?;
            }
            None => self.stdout.write_all(bytes)?,
        }
        Ok(())
    }
}

pub(crate) fn table_bytes<H: AsRef<[u8]>>(header: &[H], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    cpt_sense::io::write_table(&mut buf, header, rows)?;
    Ok(buf)
}

pub(crate) fn json_bytes(value: &serde_json::Value) -> Result<Vec<u8>, CliError> {
    let mut buf = serde_json::to_vec_pretty(value).map_err(cpt_sense::Error::from)?;
    buf.push(b'\n');
    Ok(buf)
}

/// Scenario labels made safe for file names.
pub(crate) fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
