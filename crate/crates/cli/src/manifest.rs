//! Run manifests: every command records what it ran, on which inputs, with
//! which configuration and seed, so a seeded run can be reproduced exactly.

use std::path::PathBuf;
use std::time::Duration;

use ratemig_core::Result;

pub struct RunOutputs {
    pub out_dir: PathBuf,
    pub command: String,
    pub inputs: serde_json::Value,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    /// (file name, contents) pairs, written only after success.
    pub files: Vec<(String, String)>,
}

impl RunOutputs {
    pub fn new(out_dir: &std::path::Path, command: &str) -> Self {
        RunOutputs {
            out_dir: out_dir.to_path_buf(),
            command: command.to_string(),
            inputs: serde_json::json!({}),
            config: serde_json::json!({}),
            seed: None,
            files: Vec::new(),
        }
    }

    pub fn add_file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Writes every output and then the manifest.
    pub fn write(self, wall: Duration) -> Result<()> {
        std::fs::create_dir_all(&self.out_dir)?;
        for (name, contents) in &self.files {
            std::fs::write(self.out_dir.join(name), contents)?;
        }
        let manifest = serde_json::json!({
            "command": self.command,
            "inputs": self.inputs,
            "config": self.config,
            "seed": self.seed,
            "outputs": self.files.iter().map(|(n, _)| n).collect::<Vec<_>>(),
            "tool_version": env!("CARGO_PKG_VERSION"),
            "wall_time_secs": wall.as_secs_f64(),
        });
        std::fs::write(
            self.out_dir.join("manifest.json"),
            serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
        )?;
        Ok(())
    }
}
