//! Output directory handling: CSV/JSON files and the run manifest.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Config;

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    /// Writes `name` through `fill` and records it for the manifest.
    pub fn write<F>(&mut self, name: &str, fill: F) -> io::Result<()>
    where
        F: FnOnce(&mut dyn Write) -> io::Result<()>,
    {
        let f = fs::File::create(self.root.join(name))?;
        let mut w = BufWriter::new(f);
        fill(&mut w)?;
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        self.write(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, cfg: &Config, command: &str, seeds: Vec<u64>, started: Instant) -> io::Result<PathBuf> {
        let mut outputs = Vec::new();
        for name in &self.files {
            let bytes = fs::read(self.root.join(name))?;
            outputs.push(FileDigest {
                file: name.clone(),
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = RunManifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: cfg.run.seed,
            replica_seeds: seeds,
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            config: cfg.clone(),
            outputs,
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(self.root.join("manifest.json"))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub master_seed: u64,
    pub replica_seeds: Vec<u64>,
    pub wall_clock_seconds: f64,
    pub config: Config,
    pub outputs: Vec<FileDigest>,
}

/// JSON has no NaN; missing estimates become `null`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
