//! Run configuration. Values come from the built-in defaults, then an
//! optional `key = value` file, then command-line flags, later sources
//! winning. The resolved result is written next to each command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config values or inputs that fail validation. Exit code 1.
    #[error("{0}")]
    Invalid(String),
    /// Anything that went wrong while doing the work. Exit code 2.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}

/// Merges the config file and the flags that were given over the defaults
/// of `T`. Unknown keys are rejected.
pub fn resolve<T: DeserializeOwned>(file: Option<&Path>, flags: &impl Serialize) -> CliResult<T> {
    let mut table = match file {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| invalid(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    let flags = toml::Table::try_from(flags).map_err(|e| invalid(format!("flags: {e}")))?;
    table.extend(flags);
    toml::Value::Table(table)
        .try_into()
        .map_err(|e| invalid(format!("configuration: {e}")))
}

pub fn write_resolved<T: Serialize>(cfg: &T, path: &Path) -> anyhow::Result<()> {
    let text = toml::to_string(cfg).context("serializing resolved configuration")?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Resolves relative paths against the output root, when one is set.
#[derive(Clone, Debug, Default)]
pub struct Paths {
    pub root: Option<PathBuf>,
}

impl Paths {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn required(&self, p: &Path, what: &str) -> CliResult<PathBuf> {
        if p.as_os_str().is_empty() {
            return Err(invalid(format!("missing required setting '{what}'")));
        }
        Ok(self.resolve(p))
    }
}

/// Path of the resolved-config file written beside an output file.
pub fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".config.toml");
    file.with_file_name(name)
}
