use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dualarray::{Error, Result};
use serde::Serialize;

use crate::Format;

/// Output directory writer; every artifact goes through here.
pub struct Output {
    dir: PathBuf,
    format: Format,
}

impl Output {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), format })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn file(&self, name: &str, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<()> {
        self.file(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// A table written as `<stem>.csv` via `csv`, or `<stem>.json` from `rows`.
    pub fn table<T: Serialize>(
        &self,
        stem: &str,
        rows: &T,
        csv: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        match self.format {
            Format::Csv => self.file(&format!("{stem}.csv"), csv),
            Format::Json => self.json(&format!("{stem}.json"), rows),
        }
    }
}

/// `A` or inclusive `A..B`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Validation(format!("invalid seed '{text}', expected N or A..B"));
    match text.split_once("..") {
        None => Ok(vec![text.trim().parse().map_err(|_| bad())?]),
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().parse().map_err(|_| bad())?;
            if b < a {
                return Err(bad());
            }
            Ok((a..=b).collect())
        }
    }
}
