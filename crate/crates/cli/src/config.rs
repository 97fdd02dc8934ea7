//! Optional TOML config file. Command-line flags take precedence over it.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolConfig {
    pub seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    pub threads: Option<usize>,
    pub profile: Option<String>,
    /// Severity parameter overrides (TOML).
    pub params: Option<PathBuf>,
    pub frost_textures: Option<PathBuf>,
}

impl ToolConfig {
    /// Relative paths in the file are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::from(robustkit::Error::io(path, e)))?;
        let mut cfg: ToolConfig = toml::from_str(&text).map_err(|e| {
            Failure::from(robustkit::Error::Parse { context: path.display().to_string(), message: e.to_string() })
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.params, &mut cfg.frost_textures].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
