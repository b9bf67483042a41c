use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::error::Failure;

/// Writes `bytes` to `path` atomically: the content lands under a temporary
/// name in the same directory and is renamed into place, so a concurrently
/// read file is never seen half-written.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

/// Maps an output-side I/O error to an internal failure.
pub fn write_failure(path: &Path, err: io::Error) -> Failure {
    Failure::internal(format!("cannot write {}: {err}", path.display()))
}

/// Refuses to clobber existing outputs unless `--force` was given. The check
/// runs before any work so a rerun without `--force` is a clean no-op.
pub fn check_overwrites(planned: &[PathBuf], force: bool) -> Result<(), Failure> {
    if force {
        return Ok(());
    }
    let existing: Vec<String> = planned
        .iter()
        .filter(|p| p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if existing.is_empty() {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "refusing to overwrite existing outputs (pass --force):\n  {}",
            existing.join("\n  ")
        )))
    }
}
