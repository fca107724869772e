//! `--config file.json` support: a flat JSON object whose keys are the
//! subcommand's long flags in snake_case. Flags given on the command line win.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

pub fn load(path: &std::path::Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::Usage(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(CliError::Usage(format!("{}: {e}", path.display()))),
    }
}

fn to_object<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

/// Overlays the non-null command-line values on the config object.
pub fn merge<T>(cli: T, config: Option<&Map<String, Value>>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned + Default,
{
    let Some(config) = config else { return Ok(cli) };
    let known = to_object(&T::default());
    if let Some(k) = config.keys().find(|k| !known.contains_key(*k)) {
        let mut keys: Vec<&String> = known.keys().collect();
        keys.sort();
        return Err(CliError::Usage(format!("unknown config key '{k}' (expected one of {keys:?})")));
    }
    let mut merged = config.clone();
    for (k, v) in to_object(&cli) {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

pub fn required<T>(v: Option<T>, flag: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("missing --{flag} (flag or config key {})", flag.replace('-', "_"))))
}
