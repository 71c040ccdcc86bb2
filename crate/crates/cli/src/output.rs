//! Output directory with CSV and JSON writers.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV with the given header; every value printed with 17 significant digits.
    pub fn csv<'a>(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = &'a [f64]>) -> Result<()> {
        let mut s = header.join(",");
        s.push('\n');
        for row in rows {
            for (k, v) in row.iter().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                write!(s, "{v:.16e}").expect("writing to a String");
            }
            s.push('\n');
        }
        self.write(name, &s)
    }

    /// Two-column field dump.
    pub fn field(&mut self, name: &str, header: [&str; 2], x: impl Iterator<Item = f64>, v: &[f64]) -> Result<()> {
        let rows: Vec<[f64; 2]> = x.zip(v).map(|(a, b)| [a, *b]).collect();
        self.csv(name, &header, rows.iter().map(|r| r.as_slice()))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }
}
