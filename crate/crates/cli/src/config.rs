//! Flag/config-file merging and run manifests.
//!
//! A config file is a flat TOML table whose keys are the subcommand's long
//! flags in snake case, plus an optional `command` key naming the
//! subcommand (`"decompose"`, `"generate polymap"`, ...). File values
//! replace flag values; a flag given explicitly with a different value is
//! reported with a warning.

use std::fs;
use std::path::{Path, PathBuf};

use clap::parser::ValueSource;
use clap::ArgMatches;
use koopman_core::{io, KoopmanError};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = fs::read_to_string(path).map_err(|source| KoopmanError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    match serde_json::to_value(table).map_err(|e| CliError::Config(e.to_string()))? {
        Value::Object(map) => Ok(map),
        _ => Err(CliError::Config(format!("{}: expected a table", path.display()))),
    }
}

fn same(a: &Value, b: &Value) -> bool {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => x == y,
        _ => a == b,
    }
}

/// Overlays `file` onto the parsed flags and returns the merged arguments.
pub fn merge<T: Serialize + DeserializeOwned>(
    args: T,
    command: &str,
    matches: &ArgMatches,
    file: Option<Map<String, Value>>,
) -> Result<T, CliError> {
    let Some(mut file) = file else {
        return Ok(args);
    };
    if let Some(named) = file.remove("command") {
        if named.as_str() != Some(command) {
            return Err(CliError::Config(format!("config file is for command {named}, not \"{command}\"")));
        }
    }
    let Value::Object(mut merged) = serde_json::to_value(args).map_err(|e| CliError::Config(e.to_string()))? else {
        unreachable!("argument structs serialize to objects")
    };
    for (key, value) in file {
        let Some(current) = merged.get(&key) else {
            return Err(CliError::Config(format!("unknown key '{key}' for command \"{command}\"")));
        };
        let explicit = matches
            .try_get_raw(&key)
            .ok()
            .flatten()
            .is_some_and(|_| matches.value_source(&key) == Some(ValueSource::CommandLine));
        if explicit && !same(current, &value) {
            log::warn!("--{} {current} overridden by config file value {value}", key.replace('_', "-"));
        }
        merged.insert(key, value);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(e.to_string()))
}

/// The fully resolved configuration of a run, embedded in every output.
pub fn run_config(command: &str, args: &impl Serialize) -> Value {
    let mut map = Map::new();
    map.insert("command".into(), Value::String(command.into()));
    if let Ok(Value::Object(fields)) = serde_json::to_value(args) {
        map.extend(fields);
    }
    Value::Object(map)
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub summary: Value,
}

impl Manifest {
    pub fn new(config: Value, seed: Option<u64>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config,
            seed,
            outputs: Vec::new(),
            summary: Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        io::write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }
}
