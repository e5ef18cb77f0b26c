//! Run directories and reproducibility manifests.
//!
//! Every run writes into a fresh directory named
//! `run-<unix seconds>-<config hash>-<command>` under the output root
//! (env GK_OUTPUT_ROOT, default ./gk-runs), never overwriting an existing
//! one. The manifest records the config, its FNV-1a 64 hash, the package
//! version and an FNV-1a 64 hash of every output file, which is enough to
//! reproduce and verify each artifact byte for byte.

use crate::config::ExperimentConfig;
use std::fs;
use std::path::{Path, PathBuf};

pub const OUTPUT_ROOT_ENV: &str = "GK_OUTPUT_ROOT";

/// FNV-1a 64-bit hash (documented manifest hash).
pub fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct RunDir {
    pub path: PathBuf,
    pub config_hash: u64,
    outputs: Vec<(String, u64, u64)>,
    config_text: String,
    command: String,
}

impl RunDir {
    pub fn create(cfg: &ExperimentConfig) -> std::io::Result<Self> {
        let root = std::env::var(OUTPUT_ROOT_ENV).unwrap_or_else(|_| "gk-runs".to_string());
        let config_text = cfg.to_text();
        let config_hash = fnv64(config_text.as_bytes());
        let stamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let base = format!("run-{stamp}-{config_hash:016x}-{}", cfg.command);
        let mut path = Path::new(&root).join(&base);
        let mut suffix = 1u32;
        while path.exists() {
            suffix += 1;
            path = Path::new(&root).join(format!("{base}-{suffix}"));
        }
        fs::create_dir_all(&path)?;
        Ok(RunDir {
            path,
            config_hash,
            outputs: Vec::new(),
            config_text,
            command: cfg.command.clone(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> std::io::Result<()> {
        let file = self.path.join(name);
        fs::write(&file, contents)?;
        self.outputs
            .push((name.to_string(), contents.len() as u64, fnv64(contents.as_bytes())));
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> std::io::Result<()> {
        let text = format!("{:#}\n", value);
        self.write(name, &text)
    }

    /// Write the manifest last; it lists every other artifact.
    pub fn finalize(&mut self, base_seed: Option<u64>) -> std::io::Result<()> {
        let manifest = serde_json::json!({
            "command": self.command,
            "package_version": env!("CARGO_PKG_VERSION"),
            "config_hash_fnv64": format!("{:016x}", self.config_hash),
            "config": self.config_text,
            "base_seed": base_seed,
            "outputs": self
                .outputs
                .iter()
                .map(|(name, bytes, hash)| {
                    serde_json::json!({
                        "file": name,
                        "bytes": bytes,
                        "fnv64": format!("{hash:016x}"),
                    })
                })
                .collect::<Vec<_>>(),
        });
        let text = format!("{manifest:#}\n");
        fs::write(self.path.join("manifest.json"), text)
    }
}
