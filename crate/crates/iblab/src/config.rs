//! `--config path.json` overlay and small argument parsers.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, HarnessResult};
use crate::io::{read_json, SCHEMA_VERSION};

/// Replaces fields of `args` with the matching keys of the JSON object at `path`.
///
/// Keys use the snake_case field names; unknown keys are rejected. A
/// `schema_version` key is accepted when it matches the current version.
pub fn overlay<T: Serialize + DeserializeOwned>(args: T, path: Option<&Path>) -> HarnessResult<T> {
    let Some(path) = path else { return Ok(args) };
    let file: serde_json::Value = read_json(path)?;
    let serde_json::Value::Object(entries) = file else {
        return Err(HarnessError::Config(format!("{} must contain a JSON object", path.display())));
    };
    let mut base = serde_json::to_value(&args).map_err(HarnessError::json("arguments"))?;
    let fields = base.as_object_mut().expect("argument structs serialize to objects");
    for (key, value) in entries {
        if key == "schema_version" {
            if value.as_str() != Some(SCHEMA_VERSION) {
                return Err(HarnessError::Config(format!("unsupported schema_version {value}")));
            }
            continue;
        }
        if !fields.contains_key(&key) {
            return Err(HarnessError::Config(format!("unknown configuration key {key:?}")));
        }
        fields.insert(key, value);
    }
    serde_json::from_value(base).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

/// Comma-separated list argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct List<T>(pub Vec<T>);

impl<T: FromStr> FromStr for List<T>
where
    T::Err: fmt::Display,
{
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|v| v.trim().parse::<T>().map_err(|e| format!("{v:?}: {e}")))
            .collect::<Result<Vec<T>, String>>()
            .map(List)
    }
}

/// Seed list given as `a,b,c` or as an exclusive range `a..b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seeds(pub Vec<u64>);

impl FromStr for Seeds {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once("..") {
            Some((lo, hi)) => {
                let lo: u64 = lo.trim().parse().map_err(|e| format!("{lo:?}: {e}"))?;
                let hi: u64 = hi.trim().parse().map_err(|e| format!("{hi:?}: {e}"))?;
                Ok(Seeds((lo..hi).collect()))
            }
            None => Ok(Seeds(s.parse::<List<u64>>()?.0)),
        }
    }
}
