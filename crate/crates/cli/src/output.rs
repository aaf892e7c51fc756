//! Run records (JSON lines) and CSV tables. Files are only ever appended to.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WallClock {
    /// Seconds since the Unix epoch at start.
    pub started: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub version: String,
    pub wall_clock: WallClock,
    pub payload: Value,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// A CSV table with fixed columns.
pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        Self { name, columns, rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = String>>(&mut self, row: I) {
        let row: Vec<String> = row.into_iter().collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

pub struct Sink {
    dir: PathBuf,
}

impl Sink {
    pub fn new(dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append(&self, name: &str) -> anyhow::Result<(fs::File, bool)> {
        let path = self.dir.join(name);
        let fresh = !path.exists();
        let f = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok((f, fresh))
    }

    pub fn record(&self, rec: &RunRecord) -> anyhow::Result<()> {
        let (mut f, _) = self.append("records.jsonl")?;
        writeln!(f, "{}", serde_json::to_string(rec)?)?;
        Ok(())
    }

    /// Appends rows; the header is written only when the file is new, and a
    /// header mismatch with an existing file is an error.
    pub fn table(&self, t: &Table) -> anyhow::Result<()> {
        let file = format!("{}.csv", t.name);
        let header = t.columns.join(",");
        let path = self.dir.join(&file);
        if path.exists() {
            let text = fs::read_to_string(&path)?;
            if text.lines().next() != Some(header.as_str()) {
                anyhow::bail!("{} has different columns; refusing to append", path.display());
            }
        }
        let (mut f, fresh) = self.append(&file)?;
        if fresh {
            writeln!(f, "{header}")?;
        }
        for r in &t.rows {
            writeln!(f, "{}", r.join(","))?;
        }
        Ok(())
    }

    /// A new file; never overwrites.
    pub fn create(&self, name: &str) -> anyhow::Result<fs::File> {
        let path = self.dir.join(name);
        OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    /// First free name of the form `stem-<k>.ext`.
    pub fn fresh_name(&self, stem: &str, ext: &str) -> String {
        (0..)
            .map(|k| format!("{stem}-{k}.{ext}"))
            .find(|n| !self.dir.join(n).exists())
            .expect("unbounded")
    }
}

pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}
