use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub tool_version: String,
    /// Files per command, relative to the output directory.
    pub outputs: BTreeMap<String, Vec<String>>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            ..Self::default()
        }
    }

    pub fn artifact_count(&self) -> usize {
        self.outputs.values().map(Vec::len).sum()
    }

    /// Writes to a temporary sibling and renames it into place.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(Self::FILE_NAME);
        let tmp = dir.join(format!(".{}.tmp", Self::FILE_NAME));
        let text = serde_json::to_string_pretty(self).map_err(|e| LabError::Format(e.to_string()))?;
        std::fs::write(&tmp, text + "\n").map_err(|e| LabError::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| LabError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(Self::FILE_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| LabError::Format(format!("{}: {e}", path.display())))
    }
}
