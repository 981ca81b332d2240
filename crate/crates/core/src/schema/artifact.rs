use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EnrichedSchema, SchemaError};

pub const METADATA_FORMAT: &str = "ledgersql.metadata";
pub const METADATA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Envelope<'a> {
    format: &'static str,
    version: u32,
    schema: &'a EnrichedSchema,
}

#[derive(Deserialize)]
struct OwnedEnvelope {
    schema: EnrichedSchema,
}

/// Pretty-printed JSON; identical input gives identical bytes.
pub fn to_artifact_string(schema: &EnrichedSchema) -> String {
    let env = Envelope {
        format: METADATA_FORMAT,
        version: METADATA_VERSION,
        schema,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("metadata serializes");
    s.push('\n');
    s
}

pub fn save_metadata(schema: &EnrichedSchema, path: &Path) -> Result<(), SchemaError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, to_artifact_string(schema))?;
    Ok(())
}

pub fn load_metadata(path: &Path) -> Result<EnrichedSchema, SchemaError> {
    let text = std::fs::read_to_string(path)?;
    let raw: Value = serde_json::from_str(&text).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    let format = raw.get("format").and_then(Value::as_str).unwrap_or_default();
    let version = raw.get("version").and_then(Value::as_u64);
    if format != METADATA_FORMAT || version != Some(METADATA_VERSION as u64) {
        return Err(SchemaError::SchemaVersionMismatch {
            found: format!("{format}/{}", version.map(|v| v.to_string()).unwrap_or_else(|| "?".into())),
        });
    }
    let env: OwnedEnvelope = serde_json::from_value(raw).map_err(|e| SchemaError::Malformed(e.to_string()))?;
    Ok(env.schema)
}
