use std::fs;
use std::path::{Path, PathBuf};

use burgers_fbsde::torus::{save_spacetime, write_spacetime_csv, SpaceTimeField};
use serde::Serialize;

use crate::config::Format;
use crate::error::CliResult;

/// One run's output directory.
pub struct Artifacts {
    dir: PathBuf,
    formats: Vec<Format>,
}

impl Artifacts {
    pub fn create(dir: &Path, formats: &[Format]) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            formats: formats.to_vec(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        fs::write(self.path(name), text)?;
        Ok(())
    }

    pub fn write_json(&self, name: &str, value: &impl Serialize) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// A field as `<stem>.json` + `<stem>.bin` and/or `<stem>.csv`, per the configured formats.
    pub fn write_field(&self, stem: &str, field: &SpaceTimeField<f64>) -> CliResult<()> {
        if self.formats.contains(&Format::Bin) || self.formats.contains(&Format::Json) {
            save_spacetime(field, &self.path(&format!("{stem}.json")))?;
        }
        if self.formats.contains(&Format::Csv) {
            let file = fs::File::create(self.path(&format!("{stem}.csv")))?;
            write_spacetime_csv(field, std::io::BufWriter::new(file))?;
        }
        Ok(())
    }

    pub fn write_table(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> CliResult<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
