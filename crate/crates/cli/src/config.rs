//! Loading JSON configs, seed precedence and the resolved-config echo.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{config_err, runtime_err, CliResult};

pub const SEED_ENV: &str = "FSP_SEED";

/// Reads a config file, or the defaults when no file is given. Unknown keys
/// are rejected by the schema types themselves.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

/// Seed precedence: flag, then `FSP_SEED`, then the config file, then 0.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| config_err(format!("{SEED_ENV} must be a non-negative integer, got {raw:?}"))),
        Err(_) => Ok(file.unwrap_or(0)),
    }
}

/// Prints the fully resolved config to standard error.
pub fn echo<T: Serialize>(command: &str, config: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(config).map_err(runtime_err)?;
    eprintln!("fsp {command}: resolved config\n{text}");
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(runtime_err)?;
    std::fs::write(path, text + "\n").map_err(|e| runtime_err(format!("cannot write {}: {e}", path.display())))
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| runtime_err(format!("cannot create {}: {e}", path.display())))
}
