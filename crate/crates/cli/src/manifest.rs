use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::Failure;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    /// sha256 of the resolved options, output directory excluded.
    pub config_hash: String,
    pub instance_fingerprint: Option<String>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_s: f64,
    /// Artifacts written next to this manifest, relative names.
    pub artifacts: Vec<String>,
}

pub fn config_hash(options: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(options).expect("options serialize");
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, text).map_err(|e| Failure::io(&path, e))
    }
}
