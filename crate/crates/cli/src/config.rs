//! TOML configuration files and merging with command-line flags.
//!
//! A config file has one table per subcommand, keyed like the flags:
//!
//! ```toml
//! [simulate]
//! x = "1101011"
//! delta = 0.3
//! count = 500
//! ```
//!
//! Flags given on the command line win over the file.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::*;
use crate::CliError;

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConfigFile {
    pub simulate: Option<SimulateArgs>,
    pub perturb: Option<PerturbArgs>,
    pub deck: Option<DeckArgs>,
    pub assemble: Option<AssembleArgs>,
    pub multiplicity: Option<MultiplicityArgs>,
    pub reconstruct: Option<ReconstructArgs>,
    pub experiment: Option<ExperimentArgs>,
    pub oracle: Option<OracleConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct OracleConfig {
    pub distribution: Option<DistributionArgs>,
    pub poly: Option<PolyArgs>,
    pub expectation: Option<ExpectationArgs>,
    pub gamma_beta: Option<GammaBetaArgs>,
    pub taylor: Option<TaylorArgs>,
    pub goodness: Option<GoodnessArgs>,
}

pub fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ConfigFile, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_column(text, s.start));
        CliError::Parse(tracerec::Error::Parse {
            line,
            column,
            message: e.message().to_string(),
        })
    })
}

/// One-based line and column of a byte offset.
fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Flags set on the command line, filled in from the file where unset.
pub fn overlay<T>(cli: &T, file: Option<&T>) -> Result<T, CliError>
where
    T: Serialize + DeserializeOwned,
{
    let mut merged = match file {
        Some(f) => to_map(f)?,
        None => serde_json::Map::new(),
    };
    for (key, value) in to_map(cli)? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(serde_json::Value::Object(merged))
        .map_err(|e| CliError::Usage(format!("bad configuration: {e}")))
}

fn to_map<T: Serialize>(v: &T) -> Result<serde_json::Map<String, serde_json::Value>, CliError> {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::Object(m)) => Ok(m),
        _ => Err(CliError::Usage("arguments are not a key-value table".into())),
    }
}

/// A key that must be set either as a flag or in the config file.
pub fn need<T: Clone>(value: &Option<T>, key: &str) -> Result<T, CliError> {
    value
        .clone()
        .ok_or_else(|| CliError::Usage(format!("missing required key `{key}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locates_errors() {
        let err = parse_config("[simulate]\ndelta = 0.3\ncount = \"many\"\n").unwrap_err();
        match err {
            CliError::Parse(tracerec::Error::Parse { line, column, .. }) => {
                assert_eq!((line, column), (3, 9));
            }
            other => panic!("{other:?}"),
        }
        let err = parse_config("[simulate]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, CliError::Parse(tracerec::Error::Parse { line: 2, .. })));
    }

    #[test]
    fn flags_override_the_file() {
        let file = parse_config("[simulate]\nx = \"0110\"\ndelta = 0.3\ncount = 9\n").unwrap();
        let cli = SimulateArgs {
            count: Some(4),
            ..Default::default()
        };
        let merged = overlay(&cli, file.simulate.as_ref()).unwrap();
        assert_eq!(merged.count, Some(4));
        assert_eq!(merged.delta, Some(0.3));
        assert_eq!(merged.x.as_deref(), Some("0110"));
        assert!(need(&merged.seed, "seed").is_err());
    }

    #[test]
    fn line_columns() {
        assert_eq!(line_column("ab\ncd", 0), (1, 1));
        assert_eq!(line_column("ab\ncd", 4), (2, 2));
    }
}
