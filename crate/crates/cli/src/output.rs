use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::Format;

pub const TOOL: &str = "hybridsim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rows for the CSV rendering of a report; `version`, `s` and `seed` columns
/// are prepended on write.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

/// A finished report plus the provenance every artifact carries.
pub struct Artifact {
    pub command: &'static str,
    /// file name without extension, used under the output directory
    pub stem: String,
    pub s: u32,
    pub n: Value,
    pub seed: Option<u64>,
    pub report: Value,
    pub table: Option<Table>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    s: u32,
    n: &'a Value,
    seed: Option<u64>,
    report: &'a Value,
}

impl Artifact {
    pub fn render(&self, format: Format) -> Result<String> {
        match format {
            Format::Json => {
                let env = Envelope {
                    tool: TOOL,
                    version: VERSION,
                    command: self.command,
                    s: self.s,
                    n: &self.n,
                    seed: self.seed,
                    report: &self.report,
                };
                Ok(serde_json::to_string_pretty(&env)? + "\n")
            }
            Format::Csv => {
                let table = self
                    .table
                    .as_ref()
                    .with_context(|| format!("{} has no CSV rendering", self.command))?;
                let mut w = csv::Writer::from_writer(Vec::new());
                let mut header = vec!["version", "s", "seed"];
                header.extend(&table.header);
                w.write_record(&header)?;
                let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
                for row in &table.rows {
                    let mut rec = vec![VERSION.to_string(), self.s.to_string(), seed.clone()];
                    rec.extend(row.iter().cloned());
                    w.write_record(&rec)?;
                }
                Ok(String::from_utf8(w.into_inner()?)?)
            }
        }
    }
}

/// `--out` wins, then the output directory, then stdout.
pub fn destination(out: Option<&Path>, out_dir: Option<&Path>, stem: &str, ext: &str) -> Option<PathBuf> {
    match (out, out_dir) {
        (Some(path), _) => Some(path.to_path_buf()),
        (None, Some(dir)) => Some(dir.join(format!("{stem}.{ext}"))),
        (None, None) => None,
    }
}

pub fn emit(text: &str, dest: Option<&Path>) -> Result<()> {
    match dest {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}
