//! CSV writing: a comment header with provenance, a column row, then data.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::{serialize, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// SHA-256 of the canonical config document, as lowercase hex.
pub fn config_hash(config: &RunConfig) -> String {
    Sha256::digest(serialize(config).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits: enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Provenance lines shared by every file of one run.
#[derive(Debug, Clone)]
pub struct Header {
    pub hash: String,
    pub note: Option<String>,
}

impl Header {
    pub fn new(config: &RunConfig) -> Self {
        Header { hash: config_hash(config), note: config.note.clone() }
    }

    fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("# hybridq simulate {VERSION} | config sha256 {}", self.hash)];
        if let Some(note) = &self.note {
            out.push(format!("# note: {}", note.replace('\n', " ")));
        }
        out
    }
}

/// A column name with its meaning (written to the `# columns:` line).
pub type Column = (&'static str, &'static str);

pub fn write_csv(path: &Path, header: &Header, extra: &[String], columns: &[Column], rows: &[Vec<String>]) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in header.lines() {
        writeln!(w, "{line}")?;
    }
    for line in extra {
        writeln!(w, "# {line}")?;
    }
    let doc: Vec<String> = columns.iter().map(|(c, d)| format!("{c} = {d}")).collect();
    writeln!(w, "# columns: {}", doc.join("; "))?;
    writeln!(w, "{}", columns.iter().map(|c| c.0).collect::<Vec<_>>().join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()
}

/// The canonical config, commented with the same provenance header.
pub fn write_config(path: &Path, header: &Header, config: &RunConfig) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in header.lines() {
        writeln!(w, "{line}")?;
    }
    w.write_all(serialize(config).as_bytes())?;
    w.flush()
}

/// `name{suffix}.csv` inside `dir`.
pub fn file(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}{suffix}.csv"))
}
