use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;

/// A problem with arguments, configuration or input content the user can fix.
/// Maps to exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Deserializes `value`, naming the offending key path on failure.
pub fn from_value<T: DeserializeOwned>(value: Value, what: &str) -> anyhow::Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        usage(format!("invalid {what} config at key `{path}`: {}", e.inner()))
    })
}

/// Reads a JSON config file; a missing path yields `T::default()`.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>, what: &str) -> anyhow::Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let parsed = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        usage(format!("invalid {what} config at key `{path}`: {}", e.inner()))
    })?;
    de.end().map_err(|e| usage(format!("invalid {what} config: {e}")))?;
    Ok(parsed)
}
