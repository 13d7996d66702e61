//! Output files: every file opens with the run manifest, either as `# `
//! comment lines (delimited tables) or as a `manifest` key (JSON).
//!
//! Nothing here depends on wall-clock time, so identical runs give
//! byte-identical files.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::{Error, Result};

pub const TOOL: &str = "transit-fuse";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub frame_lat0: f64,
    pub frame_lon0: f64,
}

impl Manifest {
    pub fn lines(&self) -> Vec<String> {
        vec![
            format!("{} {}", self.tool, self.version),
            format!("command: {}", self.command),
            format!("config_sha256: {}", self.config_sha256),
            format!("seed: {}", self.seed),
            format!("frame: {} {}", self.frame_lat0, self.frame_lon0),
        ]
    }
}

/// Writes the files of one command into the output directory.
pub struct OutputDir<'a> {
    pub dir: PathBuf,
    pub manifest: &'a Manifest,
    written: Vec<PathBuf>,
}

impl<'a> OutputDir<'a> {
    pub fn create(dir: &Path, manifest: &'a Manifest) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        Ok(OutputDir {
            dir: dir.to_path_buf(),
            manifest,
            written: Vec::new(),
        })
    }

    /// Files written so far, in order.
    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// A delimited table: manifest comment lines, then whatever `body`
    /// writes.
    pub fn table<F>(&mut self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |e| Error::io(&path, e);
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        for line in self.manifest.lines() {
            writeln!(w, "# {line}").map_err(io)?;
        }
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// A data file whose writer emits the manifest itself as its preamble.
    pub fn data<F>(&mut self, name: &str, body: F) -> Result<PathBuf>
    where
        F: FnOnce(&mut dyn Write, &[String]) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |e| Error::io(&path, e);
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut w, &self.manifest.lines()).map_err(io)?;
        w.flush().map_err(io)?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON object with the manifest under `manifest`, followed by
    /// the fields of `value`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut doc = serde_json::Map::new();
        doc.insert("manifest".into(), serde_json::to_value(self.manifest)?);
        match serde_json::to_value(value)? {
            serde_json::Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Drops leading `# ` manifest lines.
pub fn strip_manifest(text: &str) -> String {
    text.lines()
        .skip_while(|l| l.starts_with('#'))
        .flat_map(|l| [l, "\n"])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest() -> Manifest {
        Manifest {
            tool: TOOL,
            version: VERSION,
            command: "validate".into(),
            config_sha256: "ab".repeat(32),
            seed: 7,
            frame_lat0: 60.0,
            frame_lon0: 24.5,
        }
    }

    #[test]
    fn table_starts_with_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest();
        let mut out = OutputDir::create(dir.path(), &m).unwrap();
        let p = out.table("t.csv", |w| writeln!(w, "a,b\n1,2")).unwrap();
        let text = fs::read_to_string(p).unwrap();
        assert!(text.starts_with("# transit-fuse "));
        assert!(text.contains("# seed: 7\n"));
        assert_eq!(strip_manifest(&text), "a,b\n1,2\n");
    }

    #[test]
    fn json_carries_manifest_key() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest();
        let mut out = OutputDir::create(dir.path(), &m).unwrap();
        let p = out.json("x.json", &serde_json::json!({"n": 3})).unwrap();
        let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(v["manifest"]["seed"], 7);
        assert_eq!(v["n"], 3);
        assert_eq!(out.written().len(), 1);
    }
}
