//! JSON run reports.
//!
//! Every report carries the schema version, the library version, the
//! effective parameters with the seed filled in, the derived constants and
//! the result, which is enough to replay the run.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub use tracerec::experiment::SCHEMA_VERSION;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub library_version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub parameters: Value,
    pub derived: Value,
    pub result: Value,
}

impl RunReport {
    pub fn new(
        command: &str,
        seed: Option<u64>,
        parameters: &impl Serialize,
        derived: Value,
        result: &impl Serialize,
    ) -> Result<Self, CliError> {
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            parameters: to_value(parameters)?,
            derived,
            result: to_value(result)?,
        })
    }
}

fn to_value(v: &impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Usage(format!("cannot encode report: {e}")))
}

pub fn render<T: Serialize>(report: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Usage(format!("cannot encode report: {e}")))?;
    text.push('\n');
    Ok(text)
}

pub fn persist_report<T: Serialize>(report: &T, path: &Path) -> Result<(), CliError> {
    std::fs::write(path, render(report)?)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn load_report<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Parse(tracerec::Error::Parse {
            line: e.line(),
            column: e.column(),
            message: format!("{}: {e}", path.display()),
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let report = RunReport::new("deck", Some(7), &serde_json::json!({"k": 3}), Value::Null, &[1, 2]).unwrap();
        persist_report(&report, &path).unwrap();
        let back: RunReport = load_report(&path).unwrap();
        assert_eq!(back, report);
        std::fs::write(&path, "{\n  \"schema_version\": }").unwrap();
        match load_report::<RunReport>(&path) {
            Err(CliError::Parse(tracerec::Error::Parse { line, .. })) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
