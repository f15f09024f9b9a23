//! Run configuration: flags merged over a flat JSON config file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

/// Everything needed to reproduce a run. Written into every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub parameters: BTreeMap<&'static str, Value>,
    pub output_path: Option<PathBuf>,
    pub output_format: Format,
    pub seed: u64,
    pub workers: Option<usize>,
}

/// A flat key-value config file plus the keys that have been consumed, so
/// unknown keys can be reported.
pub struct Resolver {
    file: Map<String, Value>,
    used: Vec<&'static str>,
    pub parameters: BTreeMap<&'static str, Value>,
}

impl Resolver {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let file = match path {
            None => Map::new(),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", p.display())))?;
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => {
                        if let Some((k, _)) = map.iter().find(|(_, v)| v.is_object() || v.is_array()) {
                            return Err(Failure::Usage(format!(
                                "config {}: key {k:?} is nested; the file must be flat",
                                p.display()
                            )));
                        }
                        map
                    }
                    Ok(_) => {
                        return Err(Failure::Usage(format!(
                            "config {}: expected a JSON object",
                            p.display()
                        )))
                    }
                    Err(e) => return Err(Failure::Usage(format!("config {}: {e}", p.display()))),
                }
            }
        };
        Ok(Resolver {
            file,
            used: Vec::new(),
            parameters: BTreeMap::new(),
        })
    }

    /// Flag value if given, otherwise the config file value, otherwise `None`.
    /// Global keys are not echoed into `parameters`.
    pub fn global<T: DeserializeOwned>(&mut self, key: &'static str, flag: Option<T>) -> Result<Option<T>, Failure> {
        self.used.push(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::Usage(format!("config key {key:?}: {e}"))),
        }
    }

    pub fn optional<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
    ) -> Result<Option<T>, Failure> {
        let v = self.global(key, flag)?;
        if let Some(x) = &v {
            self.record(key, x);
        }
        Ok(v)
    }

    pub fn or<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
        default: T,
    ) -> Result<T, Failure> {
        let v = self.global(key, flag)?.unwrap_or(default);
        self.record(key, &v);
        Ok(v)
    }

    pub fn required<T: DeserializeOwned + Serialize>(
        &mut self,
        key: &'static str,
        flag: Option<T>,
    ) -> Result<T, Failure> {
        self.optional(key, flag)?
            .ok_or_else(|| Failure::Missing(key))
    }

    pub fn record<T: Serialize>(&mut self, key: &'static str, v: &T) {
        let value = serde_json::to_value(v).unwrap_or(Value::Null);
        self.parameters.insert(key, value);
    }

    /// Keys in the config file that no step asked for.
    pub fn unknown_keys(&self) -> Vec<String> {
        self.file
            .keys()
            .filter(|k| !self.used.contains(&k.as_str()))
            .cloned()
            .collect()
    }
}
