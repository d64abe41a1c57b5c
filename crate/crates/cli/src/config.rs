use std::fs;
use std::path::{Path, PathBuf};

use ivtm::training::TrainConfig;
use serde_json::Value;

use crate::CliError;

/// Environment variable naming the directory that receives outputs when no
/// `--out` is given.
pub const CACHE_ENV: &str = "IVTM_CACHE_DIR";
const DEFAULT_CACHE: &str = ".ivtm";

pub fn cache_root() -> PathBuf {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map_or_else(|| PathBuf::from(DEFAULT_CACHE), PathBuf::from)
}

/// Default output location of a command.
pub fn default_out(command: &str) -> PathBuf {
    cache_root().join(command)
}

/// Parses a TOML or JSON file (by extension; TOML otherwise) into a JSON value.
pub fn read_value(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str::<Value>(&text).map_err(|e| e.to_string())
    };
    let value = parsed.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if !value.is_object() {
        return Err(CliError::Config(format!("{}: expected a table at the top level", path.display())));
    }
    Ok(value)
}

/// Recursively overlays `top` onto `base`; tables merge, everything else replaces.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `base` overlaid with the config file, if any. Unknown keys are rejected.
pub fn train_config(base: TrainConfig, file: Option<&Path>) -> Result<TrainConfig, CliError> {
    let Some(path) = file else { return Ok(base) };
    let mut value = serde_json::to_value(&base).expect("config serializes");
    merge(&mut value, read_value(path)?);
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Prints the effective configuration and, when `out` is given, stores it there.
pub fn echo<T: serde::Serialize>(command: &str, cfg: &T, out: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(cfg).expect("config serializes");
    eprintln!("effective {command} config:\n{text}");
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let path = dir.join("effective_config.json");
        fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn merge_overlays_nested_tables() {
        let mut a = json!({"x": 1, "t": {"a": 1, "b": 2}});
        merge(&mut a, json!({"t": {"b": 3}, "y": [1]}));
        assert_eq!(a, json!({"x": 1, "t": {"a": 1, "b": 3}, "y": [1]}));
    }
}
