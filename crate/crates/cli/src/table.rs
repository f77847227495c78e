//! Fixed-column CSV output. Floats use 17 significant digits so that files
//! round-trip and compare byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Table {
    name: &'static str,
    columns: &'static [&'static str],
    body: String,
}

impl Table {
    pub fn new(name: &'static str, columns: &'static [&'static str]) -> Self {
        let mut body = columns.join(",");
        body.push('\n');
        Self {
            name,
            columns,
            body,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(
            cells.len(),
            self.columns.len(),
            "row width for {}",
            self.name
        );
        let _ = writeln!(self.body, "{}", cells.join(","));
    }

    pub fn rows(&self) -> usize {
        self.body.lines().count() - 1
    }

    pub fn contents(&self) -> &str {
        &self.body
    }

    /// Writes the file and returns its SHA-256.
    pub fn write(&self, dir: &Path) -> std::io::Result<String> {
        std::fs::write(dir.join(self.name), &self.body)?;
        Ok(sha256_hex(self.body.as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Turns free text into a single CSV cell.
pub fn text(s: &str) -> String {
    s.replace([',', '\n'], ";").replace('"', "'")
}
