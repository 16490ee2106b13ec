use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use effcache_core::model::{Instance, InstanceFile};
use effcache_core::Error;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Solver(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Core(e) => match e {
                Error::NumericalFailure(_)
                | Error::SolverFailure(_)
                | Error::DecodingFailure { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub struct LoadedInstance {
    pub file: InstanceFile,
    pub instance: Instance,
    pub sha256: String,
}

pub fn load_instance(path: &Path) -> Result<LoadedInstance, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{}: not UTF-8", path.display())))?;
    let file = InstanceFile::from_json(&text)?;
    let instance = file.clone().into_instance()?;
    Ok(LoadedInstance {
        file,
        instance,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Run metadata shared by every JSON report. Holds no clock or host data so
/// identical inputs give identical bytes.
pub fn meta(command: &str, loaded: &LoadedInstance, seed: Option<u64>, params: Value) -> Value {
    let mut m = Map::new();
    m.insert("tool".into(), json!("effcache"));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("command".into(), json!(command));
    m.insert("instance_sha256".into(), json!(loaded.sha256));
    if let Some(seed) = seed {
        m.insert("seed".into(), json!(seed));
    }
    m.insert("params".into(), params);
    m.insert(
        "instance".into(),
        serde_json::to_value(&loaded.file).expect("instance files serialize"),
    );
    Value::Object(m)
}

/// Non-finite floats serialize as `null`; any `null` in a result means one
/// slipped through.
fn has_null(v: &Value) -> bool {
    match v {
        Value::Null => true,
        Value::Array(items) => items.iter().any(has_null),
        Value::Object(fields) => fields.values().any(has_null),
        _ => false,
    }
}

pub fn result_value(result: &impl Serialize) -> Result<Value, CliError> {
    let value = serde_json::to_value(result).map_err(|e| CliError::Solver(e.to_string()))?;
    if has_null(&value) {
        return Err(CliError::Solver(
            "result contains a non-finite number".into(),
        ));
    }
    Ok(value)
}

pub fn write_text(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|source| CliError::Io {
                path: PathBuf::from("<stdout>"),
                source,
            }),
    }
}

pub fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    text
}

/// `{"meta": ..., "result": ...}` to `out` or stdout.
pub fn emit(out: Option<&Path>, meta: Value, result: Value) -> Result<(), CliError> {
    write_text(out, &pretty(&json!({ "meta": meta, "result": result })))
}
