//! Resolution of a command's settings: defaults, then a config file (flat
//! TOML or JSON, or a previous run's manifest), then explicit flags.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{CliError, Result};
use crate::manifest::{InputDigest, RunManifest};

/// Contents of a `--config` file.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    pub values: Map<String, Value>,
    /// Present when the file is a run manifest.
    pub manifest: Option<RunManifest>,
}

pub fn read_config(path: &Path, command: &str) -> Result<ConfigSource> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
    let bad = |m: String| CliError::Usage(format!("config {}: {m}", path.display()));
    let is_json =
        path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    let value: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        let table: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| bad(e.to_string()))?
    };
    let Value::Object(map) = value else {
        return Err(bad("expected a key-value document".into()));
    };
    if map.contains_key("command") && map.contains_key("config") {
        let manifest: RunManifest =
            serde_json::from_value(Value::Object(map)).map_err(|e| bad(e.to_string()))?;
        if manifest.command != command {
            return Err(bad(format!(
                "manifest is for `{}`, not `{command}`",
                manifest.command
            )));
        }
        let Value::Object(values) = manifest.config.clone() else {
            return Err(bad("manifest config is not an object".into()));
        };
        return Ok(ConfigSource {
            values,
            manifest: Some(manifest),
        });
    }
    Ok(ConfigSource {
        values: map,
        manifest: None,
    })
}

fn keys(v: &Value) -> BTreeSet<String> {
    match v {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => BTreeSet::new(),
    }
}

/// Overlays the non-null fields of `flags` on `file` and deserializes the
/// result into `T`, whose `Default` supplies anything still missing. Keys
/// that `T` does not know are rejected.
pub fn resolve<F: Serialize, T: Serialize + DeserializeOwned + Default>(
    flags: &F,
    file: &ConfigSource,
) -> Result<T> {
    let mut merged = file.values.clone();
    let Value::Object(over) =
        serde_json::to_value(flags).map_err(|e| CliError::Usage(format!("invalid flags: {e}")))?
    else {
        unreachable!("flag structs serialize to objects");
    };
    for (k, v) in over {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    let known =
        keys(&serde_json::to_value(T::default()).map_err(|e| CliError::Usage(e.to_string()))?);
    let unknown: Vec<&String> = merged.keys().filter(|k| !known.contains(*k)).collect();
    if !unknown.is_empty() {
        return Err(CliError::Usage(format!(
            "unknown configuration keys: {unknown:?}"
        )));
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

/// When re-running from a manifest, every input must still hash to the
/// recorded digest.
pub fn check_inputs(source: &ConfigSource, current: &[InputDigest]) -> Result<()> {
    let Some(m) = &source.manifest else {
        return Ok(());
    };
    for cur in current {
        if let Some(old) = m.inputs.iter().find(|i| i.path == cur.path) {
            if old.sha256 != cur.sha256 {
                return Err(CliError::data(
                    &cur.path,
                    "contents changed since the manifest was written",
                ));
            }
        }
    }
    Ok(())
}
