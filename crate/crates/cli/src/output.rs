//! Output files: collected in memory, then written together once checked.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Files a command produces, written only after the whole run succeeded.
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::Other(format!("serialising {name}: {e}")))?;
        bytes.push(b'\n');
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// CSV body preceded by a `#` line holding the provenance as compact JSON.
    pub fn csv<P: Serialize>(&mut self, name: &str, provenance: &P, body: Vec<u8>) -> Result<(), CliError> {
        let header = serde_json::to_string(provenance)
            .map_err(|e| CliError::Other(format!("serialising provenance: {e}")))?;
        let mut bytes = format!("# {header}\n").into_bytes();
        bytes.extend(body);
        self.files.push((name.to_string(), bytes));
        Ok(())
    }

    /// Writes every file into `dir`, refusing to replace existing files unless `force`.
    pub fn write(self, dir: &Path, force: bool) -> Result<Vec<PathBuf>, CliError> {
        let paths: Vec<PathBuf> = self.files.iter().map(|(n, _)| dir.join(n)).collect();
        if !force {
            if let Some(existing) = paths.iter().find(|p| p.exists()) {
                return Err(CliError::Exists(existing.clone()));
            }
        }
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        for (path, (_, bytes)) in paths.iter().zip(self.files) {
            std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        }
        Ok(paths)
    }
}
