use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Simulate,
    Derive,
    SolveMeasure,
    Games,
    Histories,
    Lln,
    Nogo,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Simulate,
        Kind::Derive,
        Kind::SolveMeasure,
        Kind::Games,
        Kind::Histories,
        Kind::Lln,
        Kind::Nogo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Simulate => "simulate",
            Kind::Derive => "derive",
            Kind::SolveMeasure => "solve-measure",
            Kind::Games => "games",
            Kind::Histories => "histories",
            Kind::Lln => "lln",
            Kind::Nogo => "nogo",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Kind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
            CliError::Schema(format!(
                "unknown kind {s:?}; expected one of {} with fields schema_version, kind, seed, parameters",
                names.join(", ")
            ))
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub report: Option<String>,
    pub csv: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    schema_version: u32,
    kind: String,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    parameters: serde_json::Value,
    #[serde(default)]
    output: OutputPaths,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub kind: Kind,
    pub seed: u64,
    pub parameters: serde_json::Value,
    #[serde(skip)]
    pub output: OutputPaths,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        let raw: RawScenario = serde_json::from_value(value).map_err(|e| {
            CliError::Schema(format!(
                "{e}; a scenario has fields schema_version, kind, seed, parameters, output"
            ))
        })?;
        if raw.schema_version != SCHEMA_VERSION {
            return Err(CliError::Schema(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                raw.schema_version
            )));
        }
        Ok(Scenario {
            schema_version: raw.schema_version,
            kind: raw.kind.parse()?,
            seed: raw.seed,
            parameters: if raw.parameters.is_null() {
                serde_json::Value::Object(Default::default())
            } else {
                raw.parameters
            },
            output: raw.output,
        })
    }

    /// Kind-specific parameters.
    pub fn params<T: serde::de::DeserializeOwned>(&self) -> Result<T, CliError> {
        serde_json::from_value(self.parameters.clone())
            .map_err(|e| CliError::Schema(format!("{} parameters: {e}", self.kind)))
    }
}
