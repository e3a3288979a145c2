//! Experiment orchestration for `online-alloc`: TOML configs, a deterministic
//! parallel runner, the invariant verifier and figure CSVs.

pub mod config;
pub mod csvio;
pub mod figure;
pub mod runner;
pub mod verify;

use std::path::{Path, PathBuf};

/// Environment variable that redirects every output file into a directory.
pub const OUTPUT_DIR_ENV: &str = "DUALLOC_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("invariant failure: {0}")]
    Invariant(String),
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) | CliError::Run(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

/// `path`, moved into the override directory when one is given.
pub fn output_path(path: &Path, override_dir: Option<&Path>) -> PathBuf {
    match (override_dir, path.file_name()) {
        (Some(dir), Some(name)) => dir.join(name),
        _ => path.to_path_buf(),
    }
}

/// Write `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    std::fs::write(path, bytes).map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn override_directory_keeps_file_name() {
        let p = output_path(Path::new("a/b/out.csv"), Some(Path::new("/tmp/x")));
        assert_eq!(p, PathBuf::from("/tmp/x/out.csv"));
        assert_eq!(output_path(Path::new("out.csv"), None), PathBuf::from("out.csv"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Invariant(String::new()).exit_code(), 1);
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Io(String::new()).exit_code(), 3);
    }
}
