//! Outputs are buffered and only written once the whole command has
//! succeeded, so a failing run leaves no partial files behind.

use std::path::{Path, PathBuf};

use crate::error::CliError;

#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Writes every file to a temporary sibling, then renames them all into
    /// place. On failure the temporaries are removed.
    pub fn commit(self) -> Result<(), CliError> {
        let mut temps: Vec<(PathBuf, &Path)> = Vec::new();
        let cleanup = |temps: &[(PathBuf, &Path)]| {
            for (t, _) in temps {
                let _ = std::fs::remove_file(t);
            }
        };
        for (path, bytes) in &self.files {
            let name = path
                .file_name()
                .ok_or_else(|| CliError::input(format!("{} is not a file path", path.display())))?;
            let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
            if let Err(e) = std::fs::write(&tmp, bytes) {
                cleanup(&temps);
                return Err(CliError::input(format!("cannot write {}: {e}", path.display())));
            }
            temps.push((tmp, path));
        }
        for (i, (tmp, path)) in temps.iter().enumerate() {
            if let Err(e) = std::fs::rename(tmp, path) {
                cleanup(&temps[i..]);
                return Err(CliError::input(format!("cannot write {}: {e}", path.display())));
            }
        }
        Ok(())
    }
}

/// `base` with its extension replaced by `suffix` (for example
/// `model.json` -> `model.diagnostics.json`).
pub fn sibling(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    base.with_file_name(format!("{stem}.{suffix}"))
}
